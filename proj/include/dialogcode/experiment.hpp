#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialogcode/backend.hpp"
#include "dialogcode/coder.hpp"
#include "dialogcode/evaluation.hpp"
#include "dialogcode/example_selection.hpp"
#include "dialogcode/instruction.hpp"
#include "dialogcode/json_io.hpp"

namespace dialogcode {

struct LessonData {
  Lesson lesson;
  GoldAnnotationSet gold;
};

struct ConditionSpec {
  std::string condition_id;
  ExampleSelectionSpec selection;  // carries the seed

  bool operator==(const ConditionSpec&) const = default;
};

// The four pre-registered conditions: one example per code, ten per code,
// 120 and 500 turns of contextual flow.
std::vector<ConditionSpec> builtin_conditions();

struct ConditionResult {
  std::string condition_id;
  InstructionConfig config;
  InstructionDocument document;
  CodingRun run;
  MetricsReport report;
};

// Selects examples from `corpus`, compiles base_config with them, codes the
// test lesson in a fresh session set and evaluates it.
// Errors: ValidationError example_test_overlap when a corpus lesson shares
// the test lesson's id, run_failed when the backend run fails, plus anything
// raised by selection or compilation.
ConditionResult run_condition(std::span<const LessonData> corpus, const LessonData& test,
                              const InstructionConfig& base_config, const ConditionSpec& spec, Backend& backend,
                              const SessionPolicy& policy, MatchMode mode = MatchMode::exact);

// Names of sections whose text differs between two documents.
std::vector<std::string> differing_sections(const InstructionDocument& a, const InstructionDocument& b);

struct ConditionColumn {
  std::string condition_id;
  std::vector<Ratio> precision;  // aligned with ComparisonTable::code_ids
  double turn_precision = 0.0;

  bool operator==(const ConditionColumn&) const = default;
};

struct ComparisonTable {
  std::string codebook_version;
  std::vector<CodeId> code_ids;
  std::vector<ConditionColumn> conditions;

  bool operator==(const ComparisonTable&) const = default;
};

// Errors: ValidationError too_few_reports (< 2), codebook_mismatch.
ComparisonTable compare_conditions(std::span<const std::pair<std::string, MetricsReport>> reports);

// Codes as rows, conditions as columns, precision in percent, then a turn
// precision row.
std::string render_comparison(const ComparisonTable& table);

struct ExperimentDefinition {
  std::string experiment_id;
  InstructionConfig base_config;
  std::vector<ConditionSpec> conditions;
  std::vector<LessonData> example_corpus;
  LessonData test;
  SessionPolicy policy;
  std::string backend = std::string(kMockKeywordBackend);
  std::optional<LiveBackendConfig> live;
  MatchMode match_mode = MatchMode::exact;
};

// Reads an experiment definition file. Lesson, gold and config paths are
// resolved against the file's directory.
ExperimentDefinition load_experiment(const std::filesystem::path& file);

struct ExperimentResult {
  std::string experiment_id;
  std::vector<ConditionResult> conditions;
  ComparisonTable table;
};

using BackendFactory = std::function<std::unique_ptr<Backend>()>;

// Runs every condition in order, each with a fresh backend from `make`.
// `on_condition` sees each result as soon as it is ready.
ExperimentResult run_experiment(const ExperimentDefinition& def, const BackendFactory& make,
                                const std::function<void(const ConditionResult&)>& on_condition = {});

// One refinement step: old -> new config hash plus the evidence behind it.
struct LineageEntry {
  std::size_t cycle = 0;
  std::string old_hash;
  std::string new_hash;
  std::vector<FeedbackItem> feedback;
  std::vector<ConfusionPair> confusion_pairs;

  bool operator==(const LineageEntry&) const = default;
};

struct RefinementResult {
  std::vector<FeedbackItem> feedback;
  InstructionConfig config;
  LineageEntry lineage;
};

// Builds the feedback set (filling agent_codes from the run), injects it and
// records a lineage entry. Adjudicating a turn where gold and prediction
// already agree throws ValidationError no_disagreement unless
// allow_agreement is set.
RefinementResult refinement_cycle(const CodingRun& run, const GoldAnnotationSet& gold,
                                  std::span<const FeedbackItem> adjudications, const InstructionConfig& config,
                                  const Lesson& lesson, std::size_t cycle, bool allow_agreement = false);

// Append-only, hash-linked chain of refinement steps.
class Lineage {
 public:
  explicit Lineage(std::string base_hash) : base_hash_(std::move(base_hash)) {}

  const std::string& base_hash() const noexcept { return base_hash_; }
  const std::string& tip() const noexcept { return entries_.empty() ? base_hash_ : entries_.back().new_hash; }
  std::span<const LineageEntry> entries() const noexcept { return entries_; }

  // Throws ValidationError lineage_broken unless entry.old_hash == tip().
  void append(LineageEntry entry);

 private:
  std::string base_hash_;
  std::vector<LineageEntry> entries_;
};

// Re-applies every entry's feedback to `base`, checking each hash on the way.
// Throws ValidationError lineage_broken on the first mismatch.
InstructionConfig replay_lineage(const InstructionConfig& base, std::span<const LineageEntry> entries,
                                 const Lesson& lesson);

Json selection_to_json(const ExampleSelectionSpec& spec);
ExampleSelectionSpec selection_from_json(const Json& j);

Json lineage_entry_to_json(const LineageEntry& entry);
LineageEntry lineage_entry_from_json(const Json& j);

Json comparison_to_json(const ComparisonTable& table);

// experiment_id, comparison table, and per condition its config hash,
// example count, run status and metrics.
Json experiment_result_json(const ExperimentResult& result);

}  // namespace dialogcode
