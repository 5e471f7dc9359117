#include "dialogcode/json_io.hpp"

#include "dialogcode/error.hpp"

namespace dialogcode {
namespace {

[[noreturn]] void bad(const std::string& what) { throw ValidationError("invalid_json", what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) bad(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T as(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T as_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return as<T>(j, key);
}

std::vector<std::string> strings(const Json& j, const char* key) {
  return as_or<std::vector<std::string>>(j, key, {});
}

}  // namespace

std::string canonical_dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::strict); }

Json codes_to_json(const CodeSet& codes) {
  Json out = Json::array();
  for (const auto& c : codes) out.push_back(c);
  return out;
}

CodeSet codes_from_json(const Json& j) {
  if (!j.is_array()) bad("code list must be an array");
  CodeSet out;
  for (const auto& c : j) {
    if (!c.is_string()) bad("code ids must be strings");
    out.insert(c.get<std::string>());
  }
  return out;
}

Json codebook_to_json(const Codebook& codebook) {
  Json codes = Json::array();
  for (const auto& c : codebook.codes()) {
    codes.push_back({{"id", c.id},
                     {"name", c.name},
                     {"definition", c.definition},
                     {"keywords", c.keywords},
                     {"exclusions", c.exclusions},
                     {"aliases", c.aliases}});
  }
  return {{"version", codebook.version()}, {"codes", codes}};
}

Codebook codebook_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "builtin:cdas") return builtin_cdas();
    bad("unknown built-in codebook '" + j.get<std::string>() + "'");
  }
  std::vector<Code> codes;
  const auto& list = field(j, "codes");
  if (!list.is_array()) bad("'codes' must be an array");
  for (const auto& c : list) {
    Code code;
    code.id = as<std::string>(c, "id");
    code.name = as_or<std::string>(c, "name", "");
    code.definition = as_or<std::string>(c, "definition", "");
    code.keywords = strings(c, "keywords");
    code.exclusions = as_or<std::string>(c, "exclusions", "");
    code.aliases = strings(c, "aliases");
    codes.push_back(std::move(code));
  }
  return Codebook(as_or<std::string>(j, "version", "custom"), std::move(codes));
}

Json turn_to_json(const Turn& turn) {
  return {{"turn_id", turn.turn_id}, {"speaker", turn.speaker}, {"text", turn.text}};
}

Turn turn_from_json(const Json& j) {
  return Turn{as<TurnId>(j, "turn_id"), as_or<std::string>(j, "speaker", ""), as<std::string>(j, "text")};
}

Json tree_to_json(const DecisionTree& tree) {
  Json steps = Json::array();
  for (const auto& step : tree.steps) {
    Json branches = Json::array();
    for (const auto& b : step.branches) {
      Json action;
      switch (b.action.kind) {
        case ActionKind::assign: action = {{"type", "assign"}, {"codes", codes_to_json(b.action.codes)}}; break;
        case ActionKind::uncoded: action = {{"type", "uncoded"}}; break;
        case ActionKind::go_to: action = {{"type", "goto"}, {"step", b.action.target}}; break;
        case ActionKind::continue_to_next: action = {{"type", "continue"}}; break;
      }
      branches.push_back({{"condition", b.condition}, {"action", action}});
    }
    steps.push_back({{"number", step.number}, {"title", step.title}, {"branches", branches}});
  }
  return {{"steps", steps}};
}

DecisionTree tree_from_json(const Json& j) {
  DecisionTree tree;
  if (j.is_null()) return tree;
  const auto& steps = field(j, "steps");
  if (!steps.is_array()) bad("'steps' must be an array");
  for (const auto& s : steps) {
    Step step;
    step.number = as<int>(s, "number");
    step.title = as_or<std::string>(s, "title", "");
    for (const auto& b : field(s, "branches")) {
      Branch branch;
      branch.condition = as<std::string>(b, "condition");
      const auto& action = field(b, "action");
      const auto type = as<std::string>(action, "type");
      if (type == "assign") branch.action = BranchAction::assign(codes_from_json(field(action, "codes")));
      else if (type == "uncoded") branch.action = BranchAction::uncoded();
      else if (type == "goto") branch.action = BranchAction::go_to(as<int>(action, "step"));
      else if (type == "continue") branch.action = BranchAction::next();
      else bad("unknown branch action '" + type + "'");
      step.branches.push_back(std::move(branch));
    }
    tree.steps.push_back(std::move(step));
  }
  return tree;
}

Json example_to_json(const ExampleItem& item) {
  Json context = Json::array();
  for (const auto& t : item.context_turns) context.push_back(turn_to_json(t));
  return {{"kind", std::string(to_string(item.kind))},
          {"context", context},
          {"focus", turn_to_json(item.focus_turn)},
          {"codes", codes_to_json(item.gold_codes)},
          {"rationale", item.rationale ? Json(*item.rationale) : Json(nullptr)},
          {"adjudicated", item.adjudicated}};
}

ExampleItem example_from_json(const Json& j) {
  ExampleItem item;
  const auto kind = as<std::string>(j, "kind");
  auto parsed = example_kind_from_string(kind);
  if (!parsed) bad("unknown example kind '" + kind + "'");
  item.kind = *parsed;
  if (j.contains("context") && !j.at("context").is_null()) {
    for (const auto& t : j.at("context")) item.context_turns.push_back(turn_from_json(t));
  }
  item.focus_turn = turn_from_json(field(j, "focus"));
  item.gold_codes = codes_from_json(field(j, "codes"));
  if (j.contains("rationale") && !j.at("rationale").is_null()) item.rationale = as<std::string>(j, "rationale");
  item.adjudicated = as_or<bool>(j, "adjudicated", false);
  return item;
}

Json config_to_json(const InstructionConfig& config) {
  Json rules = Json::array();
  for (const auto& r : config.global_rules) rules.push_back({{"priority", r.priority}, {"text", r.text}});
  Json examples = Json::array();
  for (const auto& e : config.examples.items) examples.push_back(example_to_json(e));
  return {{"role_preamble", config.role_preamble},
          {"global_rules", rules},
          {"codebook", codebook_to_json(config.codebook)},
          {"decision_tree", tree_to_json(config.decision_tree)},
          {"justification_rules", config.justification_rules},
          {"stability_rules", config.stability_rules},
          {"examples", examples},
          {"token_budget", config.token_budget}};
}

InstructionConfig config_from_json(const Json& j) {
  if (!j.is_object()) bad("instruction config must be a JSON object");
  InstructionConfig config;
  config.role_preamble = as<std::string>(j, "role_preamble");
  if (j.contains("global_rules")) {
    for (const auto& r : j.at("global_rules")) {
      config.global_rules.push_back({as<int>(r, "priority"), as<std::string>(r, "text")});
    }
  }
  config.codebook = j.contains("codebook") ? codebook_from_json(j.at("codebook")) : builtin_cdas();
  config.decision_tree = j.contains("decision_tree") ? tree_from_json(j.at("decision_tree")) : DecisionTree{};
  config.justification_rules = strings(j, "justification_rules");
  config.stability_rules = strings(j, "stability_rules");
  if (j.contains("examples")) {
    for (const auto& e : j.at("examples")) config.examples.items.push_back(example_from_json(e));
  }
  const auto budget = as_or<long long>(j, "token_budget", static_cast<long long>(kDefaultTokenBudget));
  if (budget <= 0) bad("'token_budget' must be positive");
  config.token_budget = static_cast<std::size_t>(budget);
  return config;
}

Json document_sidecar(const InstructionDocument& doc) {
  Json sections = Json::array();
  for (const auto& s : doc.sections) sections.push_back({{"name", s.name}, {"begin", s.begin}, {"end", s.end}});
  return {{"section_map", sections},
          {"token_estimate", doc.token_estimate},
          {"token_budget", doc.token_budget},
          {"config_hash", doc.config_hash},
          {"warnings", doc.warnings}};
}

Json policy_to_json(const SessionPolicy& policy) {
  return {{"batch_size", policy.batch_size},
          {"reset_between_batches", policy.reset_between_batches},
          {"verify_rules_first", policy.verify_rules_first},
          {"stability_probe", policy.stability_probe},
          {"self_check_suffix", policy.self_check_suffix}};
}

SessionPolicy policy_from_json(const Json& j) {
  SessionPolicy p;
  if (j.is_null()) return p;
  const auto batch = as_or<long long>(j, "batch_size", static_cast<long long>(p.batch_size));
  if (batch <= 0) bad("'batch_size' must be at least 1");
  p.batch_size = static_cast<std::size_t>(batch);
  p.reset_between_batches = as_or<bool>(j, "reset_between_batches", p.reset_between_batches);
  p.verify_rules_first = as_or<bool>(j, "verify_rules_first", p.verify_rules_first);
  p.stability_probe = as_or<bool>(j, "stability_probe", p.stability_probe);
  p.self_check_suffix = as_or<bool>(j, "self_check_suffix", p.self_check_suffix);
  return p;
}

Json coding_to_json(const TurnCoding& coding) {
  return {{"turn_id", coding.turn_id},
          {"predicted", codes_to_json(coding.predicted)},
          {"justification", coding.justification},
          {"raw_span", {coding.raw_span.begin, coding.raw_span.end}}};
}

TurnCoding coding_from_json(const Json& j) {
  TurnCoding c;
  c.turn_id = as<TurnId>(j, "turn_id");
  c.predicted = codes_from_json(field(j, "predicted"));
  c.justification = as_or<std::string>(j, "justification", "");
  const auto span = as_or<std::vector<std::size_t>>(j, "raw_span", {0, 0});
  if (span.size() != 2) bad("'raw_span' must hold two offsets");
  c.raw_span = {span[0], span[1]};
  return c;
}

Json log_entry_to_json(const LogEntry& entry) {
  return {{"session", entry.session},
          {"batch", entry.batch},
          {"purpose", std::string(to_string(entry.purpose))},
          {"role", std::string(to_string(entry.message.role))},
          {"content", entry.message.content}};
}

LogEntry log_entry_from_json(const Json& j) {
  LogEntry e;
  e.session = as<std::size_t>(j, "session");
  e.batch = as<std::size_t>(j, "batch");
  const auto purpose = purpose_from_string(as<std::string>(j, "purpose"));
  const auto role = role_from_string(as<std::string>(j, "role"));
  if (!purpose || !role) bad("log entry has an unknown purpose or role");
  e.purpose = *purpose;
  e.message = {*role, as<std::string>(j, "content")};
  return e;
}

Json feedback_to_json(const FeedbackItem& item) {
  return {{"turn_id", item.turn_id},
          {"agent_codes", codes_to_json(item.agent_codes)},
          {"adjudicated_codes", codes_to_json(item.adjudicated_codes)},
          {"note", item.note}};
}

FeedbackItem feedback_from_json(const Json& j) {
  FeedbackItem item;
  item.turn_id = as<TurnId>(j, "turn_id");
  if (j.contains("agent_codes")) item.agent_codes = codes_from_json(j.at("agent_codes"));
  item.adjudicated_codes = codes_from_json(field(j, "adjudicated_codes"));
  item.note = as_or<std::string>(j, "note", "");
  return item;
}

namespace {

Json ratio_json(const Ratio& r) { return r ? Json(*r) : Json(nullptr); }

Ratio ratio_from(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) bad(std::string("field '") + key + "' must be a number or null");
  return v.get<double>();
}

}  // namespace

Json metrics_to_json(const MetricsReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.per_code) {
    rows.push_back({{"code_id", r.code_id},
                    {"precision", ratio_json(r.precision)},
                    {"recall", ratio_json(r.recall)},
                    {"accuracy", ratio_json(r.accuracy)},
                    {"f1", ratio_json(r.f1)}});
  }
  return {{"codebook_version", report.codebook_version},
          {"per_code", rows},
          {"turn_precision", report.turn_precision},
          {"match_mode", std::string(to_string(report.match_mode))},
          {"turn_count", report.turn_count}};
}

MetricsReport metrics_from_json(const Json& j) {
  MetricsReport report;
  report.codebook_version = as_or<std::string>(j, "codebook_version", "");
  for (const auto& r : field(j, "per_code")) {
    report.per_code.push_back({as<std::string>(r, "code_id"), ratio_from(r, "precision"), ratio_from(r, "recall"),
                               ratio_from(r, "accuracy"), ratio_from(r, "f1")});
  }
  report.turn_precision = as<double>(j, "turn_precision");
  const auto mode = match_mode_from_string(as<std::string>(j, "match_mode"));
  if (!mode) bad("unknown match_mode");
  report.match_mode = *mode;
  report.turn_count = as<std::size_t>(j, "turn_count");
  return report;
}

Json run_report_json(const CodingRun& run) {
  Json codings = Json::array();
  for (const auto& c : run.codings) codings.push_back(coding_to_json(c));
  return {{"lesson_id", run.lesson_id},
          {"config_hash", run.config_hash},
          {"backend_id", run.backend_id},
          {"policy", policy_to_json(run.policy)},
          {"status", std::string(to_string(run.status))},
          {"batch_count", run.batch_count},
          {"batches_done", run.batches_done},
          {"failed_batch", run.failed_batch ? Json(*run.failed_batch) : Json(nullptr)},
          {"failure", run.failure},
          {"warnings", run.warnings},
          {"codings", codings}};
}

}  // namespace dialogcode
