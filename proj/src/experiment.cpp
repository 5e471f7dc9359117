#include "dialogcode/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dialogcode/error.hpp"
#include "dialogcode/store.hpp"

namespace dialogcode {
namespace {

[[noreturn]] void bad(const std::string& what) { throw ValidationError("invalid_json", what); }

std::string cell(const Ratio& r) {
  if (!r) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *r * 100.0);
  return buf;
}

LessonData load_lesson_pair(const Json& j, const std::filesystem::path& dir, const Codebook& codebook) {
  if (!j.is_object() || !j.contains("lesson") || !j.contains("gold")) bad("lesson entries need 'lesson' and 'gold'");
  LessonData data;
  data.lesson = parse_transcript(read_file(dir / j.at("lesson").get<std::string>()));
  data.gold = parse_gold(read_file(dir / j.at("gold").get<std::string>()), data.lesson, codebook);
  return data;
}

}  // namespace

std::vector<ConditionSpec> builtin_conditions() {
  return {
      {"condition-1", {PerCodeIsolated{1}, 1}},
      {"condition-2", {PerCodeIsolated{10}, 2}},
      {"condition-3", {ContextualFlow{120, kDefaultFlowWindow}, 3}},
      {"condition-4", {ContextualFlow{500, kDefaultFlowWindow}, 4}},
  };
}

ConditionResult run_condition(std::span<const LessonData> corpus, const LessonData& test,
                              const InstructionConfig& base_config, const ConditionSpec& spec, Backend& backend,
                              const SessionPolicy& policy, MatchMode mode) {
  std::vector<Lesson> lessons;
  std::vector<GoldAnnotationSet> gold;
  for (const auto& data : corpus) {
    if (data.lesson.lesson_id == test.lesson.lesson_id) {
      throw ValidationError("example_test_overlap", "example corpus contains the test lesson '" +
                                                       test.lesson.lesson_id + "'");
    }
    lessons.push_back(data.lesson);
    gold.push_back(data.gold);
  }

  ConditionResult result;
  result.condition_id = spec.condition_id;
  result.config = base_config;
  result.config.examples = select_examples(lessons, gold, base_config.codebook, spec.selection);
  result.document = compile_instructions(result.config);
  result.run = code_lesson(test.lesson, result.document, result.config.codebook, backend, policy, nullptr,
                           spec.condition_id);
  if (result.run.status != RunStatus::complete) {
    throw ValidationError("run_failed", spec.condition_id + ": " + result.run.failure);
  }
  result.report = evaluate_run(test.gold, result.run, result.config.codebook, mode);
  return result;
}

std::vector<std::string> differing_sections(const InstructionDocument& a, const InstructionDocument& b) {
  std::vector<std::string> out;
  for (auto name : kSectionOrder) {
    if (a.section_text(name) != b.section_text(name)) out.emplace_back(name);
  }
  return out;
}

ComparisonTable compare_conditions(std::span<const std::pair<std::string, MetricsReport>> reports) {
  if (reports.size() < 2) throw ValidationError("too_few_reports", "comparison needs at least two reports");
  ComparisonTable table;
  const auto& first = reports.front().second;
  table.codebook_version = first.codebook_version;
  for (const auto& row : first.per_code) table.code_ids.push_back(row.code_id);

  for (const auto& [id, report] : reports) {
    bool same = report.codebook_version == table.codebook_version && report.per_code.size() == table.code_ids.size();
    for (std::size_t i = 0; same && i < report.per_code.size(); ++i) same = report.per_code[i].code_id == table.code_ids[i];
    if (!same) throw ValidationError("codebook_mismatch", "report '" + id + "' uses a different codebook");
    ConditionColumn column{id, {}, report.turn_precision};
    for (const auto& row : report.per_code) column.precision.push_back(row.precision);
    table.conditions.push_back(std::move(column));
  }
  return table;
}

std::string render_comparison(const ComparisonTable& table) {
  std::ostringstream out;
  std::size_t width = 9;
  for (const auto& c : table.conditions) width = std::max(width, c.condition_id.size());
  const auto pad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };

  out << "Code  ";
  for (const auto& c : table.conditions) out << ' ' << pad(c.condition_id, width);
  out << '\n';
  for (std::size_t i = 0; i < table.code_ids.size(); ++i) {
    out << table.code_ids[i] << std::string(table.code_ids[i].size() < 6 ? 6 - table.code_ids[i].size() : 0, ' ');
    for (const auto& c : table.conditions) out << ' ' << pad(cell(c.precision[i]), width);
    out << '\n';
  }
  out << "Turns ";
  for (const auto& c : table.conditions) out << ' ' << pad(cell(c.turn_precision), width);
  out << '\n';
  return out.str();
}

namespace {

ExperimentDefinition parse_experiment(const std::filesystem::path& file) {
  const auto j = Json::parse(read_file(file), nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad(file.string() + " is not a JSON object");
  const auto dir = file.parent_path();

  ExperimentDefinition def;
  if (!j.contains("experiment_id") || !j.at("experiment_id").is_string()) bad("missing 'experiment_id'");
  def.experiment_id = j.at("experiment_id").get<std::string>();

  if (!j.contains("base_config")) bad("missing 'base_config'");
  const auto& base = j.at("base_config");
  if (base.is_string()) {
    const auto parsed = Json::parse(read_file(dir / base.get<std::string>()), nullptr, false);
    if (parsed.is_discarded()) bad("base_config file is not JSON");
    def.base_config = config_from_json(parsed);
  } else {
    def.base_config = config_from_json(base);
  }

  if (!j.contains("conditions") || !j.at("conditions").is_array()) bad("missing 'conditions'");
  for (const auto& c : j.at("conditions")) {
    if (!c.contains("condition_id") || !c.contains("selection")) bad("conditions need condition_id and selection");
    ConditionSpec spec;
    spec.condition_id = c.at("condition_id").get<std::string>();
    spec.selection = selection_from_json(c.at("selection"));
    if (c.contains("seed")) spec.selection.seed = c.at("seed").get<std::uint64_t>();
    def.conditions.push_back(std::move(spec));
  }

  if (!j.contains("example_corpus") || !j.contains("test_lesson")) bad("missing 'example_corpus' or 'test_lesson'");
  for (const auto& entry : j.at("example_corpus")) {
    def.example_corpus.push_back(load_lesson_pair(entry, dir, def.base_config.codebook));
  }
  def.test = load_lesson_pair(j.at("test_lesson"), dir, def.base_config.codebook);
  if (j.contains("policy")) def.policy = policy_from_json(j.at("policy"));
  if (j.contains("backend")) def.backend = j.at("backend").get<std::string>();
  if (j.contains("backend_config")) {
    const auto& b = j.at("backend_config");
    LiveBackendConfig live;
    live.endpoint = b.value("endpoint", "");
    live.model = b.value("model", "");
    live.key_env = b.value("key_env", live.key_env);
    live.timeout_seconds = b.value("timeout_seconds", live.timeout_seconds);
    def.live = live;
  }
  if (j.contains("match_mode")) {
    auto mode = match_mode_from_string(j.at("match_mode").get<std::string>());
    if (!mode) bad("unknown match_mode");
    def.match_mode = *mode;
  }
  return def;
}

}  // namespace

ExperimentDefinition load_experiment(const std::filesystem::path& file) {
  try {
    return parse_experiment(file);
  } catch (const Json::exception& e) {
    bad(file.string() + ": " + e.what());
  }
}

ExperimentResult run_experiment(const ExperimentDefinition& def, const BackendFactory& make,
                                const std::function<void(const ConditionResult&)>& on_condition) {
  ExperimentResult result;
  result.experiment_id = def.experiment_id;
  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (const auto& spec : def.conditions) {
    auto backend = make();
    auto condition =
        run_condition(def.example_corpus, def.test, def.base_config, spec, *backend, def.policy, def.match_mode);
    if (on_condition) on_condition(condition);
    reports.emplace_back(condition.condition_id, condition.report);
    result.conditions.push_back(std::move(condition));
  }
  result.table = compare_conditions(reports);
  return result;
}

RefinementResult refinement_cycle(const CodingRun& run, const GoldAnnotationSet& gold,
                                  std::span<const FeedbackItem> adjudications, const InstructionConfig& config,
                                  const Lesson& lesson, std::size_t cycle, bool allow_agreement) {
  const auto pairs = align_labels(gold, run);
  RefinementResult result;
  for (const auto& adj : adjudications) {
    auto it = std::find_if(pairs.begin(), pairs.end(), [&](const LabelPair& p) { return p.turn_id == adj.turn_id; });
    if (it == pairs.end()) {
      throw ValidationError("unknown_turn", "turn " + std::to_string(adj.turn_id) + " was not coded in this run");
    }
    if (!allow_agreement && it->gold == it->predicted) {
      throw ValidationError("no_disagreement",
                            "turn " + std::to_string(adj.turn_id) + ": gold and prediction already agree");
    }
    FeedbackItem item = adj;
    item.agent_codes = it->predicted;
    result.feedback.push_back(std::move(item));
  }
  result.config = inject_feedback(config, result.feedback, lesson);
  result.lineage = {cycle, config_hash(config), config_hash(result.config), result.feedback, confusion_pairs(pairs)};
  return result;
}

void Lineage::append(LineageEntry entry) {
  if (entry.old_hash != tip()) {
    throw ValidationError("lineage_broken", "entry for cycle " + std::to_string(entry.cycle) + " starts from " +
                                                entry.old_hash + ", chain tip is " + tip());
  }
  entries_.push_back(std::move(entry));
}

InstructionConfig replay_lineage(const InstructionConfig& base, std::span<const LineageEntry> entries,
                                 const Lesson& lesson) {
  InstructionConfig config = base;
  for (const auto& entry : entries) {
    const auto hash = config_hash(config);
    if (hash != entry.old_hash) {
      throw ValidationError("lineage_broken",
                            "cycle " + std::to_string(entry.cycle) + " expects " + entry.old_hash + ", have " + hash);
    }
    config = inject_feedback(config, entry.feedback, lesson);
    if (config_hash(config) != entry.new_hash) {
      throw ValidationError("lineage_broken", "cycle " + std::to_string(entry.cycle) + " does not reproduce " +
                                                  entry.new_hash);
    }
  }
  return config;
}

Json selection_to_json(const ExampleSelectionSpec& spec) {
  if (const auto* p = std::get_if<PerCodeIsolated>(&spec.mode)) {
    return {{"mode", "per_code_isolated"}, {"k", p->k}, {"seed", spec.seed}};
  }
  const auto& f = std::get<ContextualFlow>(spec.mode);
  return {{"mode", "contextual_flow"}, {"total_n", f.total_n}, {"window", f.window}, {"seed", spec.seed}};
}

ExampleSelectionSpec selection_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("mode")) bad("selection needs a 'mode'");
  ExampleSelectionSpec spec;
  try {
    spec.seed = j.value("seed", std::uint64_t{0});
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "per_code_isolated") {
      spec.mode = PerCodeIsolated{j.at("k").get<std::size_t>()};
    } else if (mode == "contextual_flow") {
      spec.mode = ContextualFlow{j.at("total_n").get<std::size_t>(), j.value("window", kDefaultFlowWindow)};
    } else {
      bad("unknown selection mode '" + mode + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("selection: ") + e.what());
  }
  return spec;
}

Json lineage_entry_to_json(const LineageEntry& entry) {
  Json feedback = Json::array();
  for (const auto& f : entry.feedback) feedback.push_back(feedback_to_json(f));
  Json pairs = Json::array();
  for (const auto& p : entry.confusion_pairs) {
    pairs.push_back({{"gold", p.gold_code}, {"predicted", p.predicted_code}, {"count", p.count}});
  }
  return {{"cycle", entry.cycle},
          {"old_hash", entry.old_hash},
          {"new_hash", entry.new_hash},
          {"feedback", feedback},
          {"confusion_pairs", pairs}};
}

LineageEntry lineage_entry_from_json(const Json& j) {
  LineageEntry entry;
  try {
    entry.cycle = j.at("cycle").get<std::size_t>();
    entry.old_hash = j.at("old_hash").get<std::string>();
    entry.new_hash = j.at("new_hash").get<std::string>();
    for (const auto& f : j.at("feedback")) entry.feedback.push_back(feedback_from_json(f));
    for (const auto& p : j.at("confusion_pairs")) {
      entry.confusion_pairs.push_back(
          {p.at("gold").get<std::string>(), p.at("predicted").get<std::string>(), p.at("count").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("lineage entry: ") + e.what());
  }
  return entry;
}

Json comparison_to_json(const ComparisonTable& table) {
  Json conditions = Json::array();
  for (const auto& c : table.conditions) {
    Json precision = Json::array();
    for (const auto& p : c.precision) precision.push_back(p ? Json(*p) : Json(nullptr));
    conditions.push_back({{"condition_id", c.condition_id}, {"precision", precision}, {"turn_precision", c.turn_precision}});
  }
  return {{"codebook_version", table.codebook_version}, {"code_ids", table.code_ids}, {"conditions", conditions}};
}

Json experiment_result_json(const ExperimentResult& result) {
  Json conditions = Json::array();
  for (const auto& c : result.conditions) {
    conditions.push_back({{"condition_id", c.condition_id},
                          {"config_hash", c.document.config_hash},
                          {"examples", c.config.examples.items.size()},
                          {"token_estimate", c.document.token_estimate},
                          {"status", std::string(to_string(c.run.status))},
                          {"metrics", metrics_to_json(c.report)}});
  }
  return {{"experiment_id", result.experiment_id},
          {"conditions", conditions},
          {"comparison", comparison_to_json(result.table)}};
}

}  // namespace dialogcode
