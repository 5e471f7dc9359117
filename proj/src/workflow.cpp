#include "dialogcode/workflow.hpp"

#include "dialogcode/error.hpp"
#include "dialogcode/experiment.hpp"

namespace dialogcode {
namespace {

RunState complete_run(const Store& store, const std::string& run_id) {
  auto state = store.load_run(run_id);
  if (state.run.status != RunStatus::complete) {
    throw ValidationError("run_incomplete", "run '" + run_id + "' is " + std::string(to_string(state.run.status)));
  }
  return state;
}

GoldAnnotationSet stored_gold(const Store& store, const RunState& state, const Codebook& codebook) {
  auto gold = store.load_gold(state.run.lesson_id, codebook);
  if (!gold) throw ValidationError("missing_gold", "no gold labels stored for lesson '" + state.run.lesson_id + "'");
  return *gold;
}

}  // namespace

CodingRun execute_run(Store& store, const std::string& run_id, const Lesson& lesson, const InstructionConfig& config,
                      Backend& backend, const SessionPolicy& policy) {
  if (policy.batch_size == 0) throw ValidationError("invalid_batch_size", "batch size must be at least 1");
  const auto document = compile_instructions(config);
  store.put_lesson(lesson);
  const auto hash = store.save_config(config);
  RunRecorder recorder(store, run_id);
  store.record(run_id, event_kind::config_saved, {{"config_hash", hash}});
  return code_lesson(lesson, document, config.codebook, backend, policy, &recorder, run_id);
}

Adjudication record_adjudication(Store& store, const std::string& run_id, TurnId turn_id,
                                 std::span<const std::string> labels, const std::string& note, bool allow_agreement) {
  const auto state = complete_run(store, run_id);
  const auto config = store.load_config(state.run.config_hash);
  const auto& codebook = config.codebook;

  const TurnCoding* coding = nullptr;
  for (const auto& c : state.run.codings) {
    if (c.turn_id == turn_id) coding = &c;
  }
  if (!coding) throw ValidationError("unknown_turn", "turn " + std::to_string(turn_id) + " is not part of the run");
  if (labels.empty()) throw ValidationError("empty_codes", "an adjudication needs at least one code");
  const auto codes = resolve_labels(codebook, labels);
  if (!uc_exclusive(codes)) throw ValidationError("uc_exclusivity", "UC cannot be combined with other codes");

  if (!allow_agreement) {
    const auto gold = stored_gold(store, state, codebook);
    auto it = gold.labels.find(turn_id);
    if (it != gold.labels.end() && it->second == coding->predicted) {
      throw ValidationError("no_disagreement", "turn " + std::to_string(turn_id) +
                                                   ": gold and prediction agree; pass allow_agreement to override");
    }
  }
  store.record(run_id, event_kind::adjudication,
               {{"turn_id", turn_id}, {"codes", codes_to_json(codes)}, {"note", note}, {"allow_agreement", allow_agreement}});
  return {turn_id, codes, note, {}};
}

FeedbackOutcome compile_feedback(Store& store, const std::string& run_id) {
  const auto state = complete_run(store, run_id);
  const auto pending = state.pending_adjudications();
  if (pending.empty()) {
    throw ValidationError("no_pending_adjudications", "run '" + run_id + "' has no adjudications to compile");
  }
  const auto config = store.load_config(state.run.config_hash);
  const auto gold = stored_gold(store, state, config.codebook);
  const auto lesson = store.load_lesson(state.run.lesson_id);

  std::vector<FeedbackItem> items;
  for (const auto& a : pending) items.push_back({a.turn_id, {}, a.codes, a.note});
  // Agreement overrides were checked when each adjudication was recorded.
  const auto cycle = store.next_cycle(state.run.config_hash);
  auto result = refinement_cycle(state.run, gold, items, config, lesson, cycle, true);

  const auto hash = store.save_config(result.config);
  store.record(run_id, event_kind::feedback_compiled, lineage_entry_to_json(result.lineage));
  store.record(run_id, event_kind::config_saved, {{"config_hash", hash}});
  return {result.lineage.old_hash, hash, cycle, items.size()};
}

MetricsReport evaluate_stored_run(Store& store, const std::string& run_id, MatchMode mode,
                                  const std::optional<GoldAnnotationSet>& gold) {
  const auto state = complete_run(store, run_id);
  const auto config = store.load_config(state.run.config_hash);
  const auto labels = gold ? *gold : stored_gold(store, state, config.codebook);
  return evaluate_run(labels, state.run, config.codebook, mode);
}

}  // namespace dialogcode
