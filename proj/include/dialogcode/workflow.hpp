#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialogcode/backend.hpp"
#include "dialogcode/evaluation.hpp"
#include "dialogcode/store.hpp"

namespace dialogcode {

// Store-backed steps shared by the CLI and the HTTP service.

// Saves config and lesson, compiles, then codes the lesson while recording
// events under `run_id`. Validation failures throw before any event is
// written; backend failures end in a failed run.
CodingRun execute_run(Store& store, const std::string& run_id, const Lesson& lesson, const InstructionConfig& config,
                      Backend& backend, const SessionPolicy& policy);

// Records one adjudication for a complete run. Labels may be aliases.
// Errors: NotFoundError unknown_run; ValidationError run_incomplete,
// unknown_turn, unknown_label, empty_codes, uc_exclusivity, missing_gold,
// no_disagreement (unless allow_agreement).
Adjudication record_adjudication(Store& store, const std::string& run_id, TurnId turn_id,
                                 std::span<const std::string> labels, const std::string& note, bool allow_agreement);

struct FeedbackOutcome {
  std::string old_config_hash;
  std::string new_config_hash;
  std::size_t cycle = 0;
  std::size_t added_examples = 0;
};

// Turns the run's pending adjudications into a new stored config and appends
// feedback_compiled and config_saved events.
// Errors: run_incomplete, no_pending_adjudications, missing_gold, and
// BudgetError when the grown config no longer fits.
FeedbackOutcome compile_feedback(Store& store, const std::string& run_id);

// Evaluates a stored, complete run against `gold`, or the stored gold.
MetricsReport evaluate_stored_run(Store& store, const std::string& run_id, MatchMode mode,
                                  const std::optional<GoldAnnotationSet>& gold = std::nullopt);

}  // namespace dialogcode
