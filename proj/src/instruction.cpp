#include "dialogcode/instruction.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "dialogcode/error.hpp"
#include "dialogcode/hash.hpp"
#include "dialogcode/json_io.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace {

constexpr std::array<ExampleKind, 4> kKindOrder = {ExampleKind::core, ExampleKind::ambiguous,
                                                   ExampleKind::multi_utterance, ExampleKind::edge};

std::string kind_heading(ExampleKind kind) {
  switch (kind) {
    case ExampleKind::core: return "Core examples";
    case ExampleKind::ambiguous: return "Ambiguous examples";
    case ExampleKind::multi_utterance: return "Multi-utterance examples";
    case ExampleKind::edge: return "Edge examples";
  }
  return {};
}

void render_turn(std::ostringstream& out, const Turn& turn) {
  out << "Turn " << turn.turn_id << " (" << text::escape_field(turn.speaker)
      << "): " << text::escape_field(turn.text) << "\n";
}

void render_example(std::ostringstream& out, std::size_t number, const ExampleItem& item) {
  out << "Example " << number << "\n";
  if (!item.context_turns.empty()) {
    out << "  Context:\n";
    for (const auto& turn : item.context_turns) {
      out << "    ";
      render_turn(out, turn);
    }
  }
  out << "  ";
  render_turn(out, item.focus_turn);
  out << "  Codes: " << join_codes(item.gold_codes) << "\n";
  if (item.rationale) out << "  Rationale: " << text::squash_whitespace(*item.rationale) << "\n";
}

void check_examples(const ExampleSet& examples, const Codebook& codebook) {
  for (std::size_t i = 0; i < examples.items.size(); ++i) {
    const auto& item = examples.items[i];
    const auto where = "example " + std::to_string(i + 1);
    if (item.gold_codes.empty()) throw ValidationError("empty_codes", where + " has no gold codes");
    for (const auto& code : item.gold_codes) {
      if (!codebook.contains(code)) throw ValidationError("unknown_code", where + " uses unknown code '" + code + "'");
    }
    if (!uc_exclusive(item.gold_codes)) {
      throw ValidationError("uc_exclusivity", where + " combines UC with other codes");
    }
  }
}

}  // namespace

std::string_view to_string(ExampleKind kind) {
  switch (kind) {
    case ExampleKind::core: return "core";
    case ExampleKind::ambiguous: return "ambiguous";
    case ExampleKind::multi_utterance: return "multi_utterance";
    case ExampleKind::edge: return "edge";
  }
  return "core";
}

std::optional<ExampleKind> example_kind_from_string(std::string_view s) {
  for (auto kind : kKindOrder) {
    if (to_string(kind) == s) return kind;
  }
  return std::nullopt;
}

const Section* InstructionDocument::section(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::string_view InstructionDocument::section_text(std::string_view name) const {
  const auto* s = section(name);
  if (!s) return {};
  return std::string_view(text).substr(s->begin, s->end - s->begin);
}

std::string config_hash(const InstructionConfig& config) {
  return sha256_hex(canonical_dump(config_to_json(config)));
}

InstructionDocument compile_instructions(const InstructionConfig& config, const TokenEstimator& estimator) {
  if (text::trim(config.role_preamble).empty()) {
    throw ValidationError("empty_preamble", "role preamble must not be empty");
  }
  if (config.token_budget == 0) throw ValidationError("invalid_budget", "token budget must be positive");
  const auto tree_report = validate_decision_tree(config.decision_tree, config.codebook);
  if (!tree_report.ok()) {
    throw ValidationError("invalid_tree", "decision tree: " + tree_report.violations.front().message);
  }
  check_examples(config.examples, config.codebook);

  std::array<std::string, kSectionOrder.size()> parts;

  parts[0] = config.role_preamble + "\n\n";

  {
    std::vector<std::size_t> order(config.global_rules.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return config.global_rules[a].priority > config.global_rules[b].priority;
    });
    std::ostringstream out;
    out << "## Global rules (highest priority first)\n";
    if (order.empty()) out << "(none)\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
      out << i + 1 << ". " << config.global_rules[order[i]].text << "\n";
    }
    out << "\n";
    parts[1] = out.str();
  }

  {
    std::ostringstream out;
    out << "## Definition of codes\n";
    for (const auto& code : config.codebook.codes()) {
      out << code.id << " (" << code.name << "): " << code.definition << "\n";
      if (!code.exclusions.empty()) out << "  Excludes: " << code.exclusions << "\n";
      if (!code.keywords.empty()) out << "  Keywords: " << text::join(code.keywords, ", ") << "\n";
      if (!code.aliases.empty()) out << "  Also labelled: " << text::join(code.aliases, ", ") << "\n";
    }
    out << "\n";
    parts[2] = out.str();
  }

  parts[3] = "## Decision tree\n" +
             (config.decision_tree.steps.empty() ? std::string("(none)\n") : render_decision_tree(config.decision_tree)) +
             "\n";

  const auto bullet_section = [](std::string_view heading, const std::vector<std::string>& rules) {
    std::ostringstream out;
    out << "## " << heading << "\n";
    if (rules.empty()) out << "(none)\n";
    for (const auto& rule : rules) out << "- " << rule << "\n";
    out << "\n";
    return out.str();
  };
  parts[4] = bullet_section("Rules for justification", config.justification_rules);
  parts[5] = bullet_section("Stability control", config.stability_rules);

  {
    std::ostringstream out;
    out << "## Examples\n";
    std::size_t number = 0;
    for (auto kind : kKindOrder) {
      bool heading = false;
      for (const auto& item : config.examples.items) {
        if (item.adjudicated || item.kind != kind) continue;
        if (!heading) out << "### " << kind_heading(kind) << "\n";
        heading = true;
        render_example(out, ++number, item);
      }
    }
    bool heading = false;
    for (const auto& item : config.examples.items) {
      if (!item.adjudicated) continue;
      if (!heading) out << "### Adjudicated examples\n";
      heading = true;
      render_example(out, ++number, item);
    }
    if (number == 0) out << "(none)\n";
    parts[6] = out.str();
  }

  InstructionDocument doc;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto begin = doc.text.size();
    doc.text += parts[i];
    doc.sections.push_back({std::string(kSectionOrder[i]), begin, doc.text.size()});
  }
  doc.token_estimate = estimator(doc.text);
  doc.token_budget = config.token_budget;
  doc.config_hash = config_hash(config);

  if (doc.token_estimate > config.token_budget) throw BudgetError(doc.token_estimate, config.token_budget);
  if (static_cast<double>(doc.token_estimate) >= kBudgetWarningRatio * static_cast<double>(config.token_budget)) {
    doc.warnings.push_back("token estimate " + std::to_string(doc.token_estimate) + " is at or above 80% of budget " +
                           std::to_string(config.token_budget));
  }
  return doc;
}

std::size_t count_utterances(std::string_view text) {
  std::size_t count = 0;
  bool has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c)) has_content = true;
    const bool terminator = c == '.' || c == '!' || c == '?';
    const bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
    if (terminator && boundary && has_content) {
      ++count;
      has_content = false;
    }
  }
  if (has_content) ++count;
  return count;
}

QuotaReport validate_example_quota(const ExampleSet& examples, const Codebook& codebook, const ExampleQuota& quota) {
  QuotaReport report;
  std::map<ExampleKind, std::size_t> counts;
  CodeSet core_codes;

  for (const auto& item : examples.items) {
    if (item.adjudicated) continue;
    ++counts[item.kind];
    if (item.kind == ExampleKind::core) core_codes.insert(item.gold_codes.begin(), item.gold_codes.end());
    if (item.kind == ExampleKind::multi_utterance && item.gold_codes.size() < 2 &&
        count_utterances(item.focus_turn.text) < 2) {
      report.violations.push_back({"multi_utterance_not_mixed",
                                   "multi-utterance example for turn " + std::to_string(item.focus_turn.turn_id) +
                                       " has a single code and a single utterance"});
    }
  }

  const auto check_min = [&](ExampleKind kind, std::size_t minimum) {
    const auto n = counts[kind];
    const std::string name(to_string(kind));
    if (n == 0 && minimum > 0) {
      report.violations.push_back({name + "_missing", "no " + name + " examples (need at least " +
                                                           std::to_string(minimum) + ")"});
    } else if (n < minimum) {
      report.violations.push_back({name + "_below_minimum", std::to_string(n) + " " + name +
                                                                 " examples, need at least " + std::to_string(minimum)});
    }
  };
  const auto check_max = [&](ExampleKind kind, std::size_t maximum) {
    const auto n = counts[kind];
    const std::string name(to_string(kind));
    if (n > maximum) {
      report.violations.push_back({name + "_above_maximum", std::to_string(n) + " " + name +
                                                                 " examples, at most " + std::to_string(maximum)});
    }
  };

  check_min(ExampleKind::core, quota.core_min);
  check_max(ExampleKind::core, quota.core_max);
  for (const auto& id : codebook.substantive_ids()) {
    if (!core_codes.count(id)) {
      report.violations.push_back({"core_missing_code", "no core example covers code " + id});
    }
  }
  check_min(ExampleKind::ambiguous, quota.ambiguous_min);
  check_max(ExampleKind::ambiguous, quota.ambiguous_max);
  check_min(ExampleKind::multi_utterance, quota.multi_utterance_min);
  check_min(ExampleKind::edge, quota.edge_min);
  return report;
}

InstructionConfig default_cdas_config() {
  InstructionConfig config;
  config.role_preamble =
      "You are a coding assistant specializing in applying the Cambridge Dialogue Analysis Scheme (CDAS) to "
      "analyse classroom dialogue interactions. Your task is to automatically assign the most relevant CDAS codes "
      "to classroom dialogues using a structured decision-making process. The coding scheme is based on the "
      "intention of the speaker, so interpreting the utterances in the context of the dialogue is critical.";
  config.global_rules = {
      {100, "Only use the codes defined below. A turn may receive more than one code."},
      {90, "Code the meaning carried across turns; read every turn against the turns before it."},
      {80, "Only code the dialogue. Never answer or continue the conversation in the transcript."},
      {70, "Follow the decision tree step by step for every utterance in a turn."},
      {60, "For each turn output `Turn <id>`, then `Codes: <codes>`, then `Justification: <reason>`."},
  };
  config.codebook = builtin_cdas();
  config.decision_tree = cdas_decision_tree();
  config.justification_rules = {
      "Invitational codes (ELI, IRE, IC, OI) exclude rhetorical and non-verbal prompts.",
      "Cite the words in the turn that support each assigned code.",
      "In a multi-utterance turn, code each utterance's function and report the union of codes.",
  };
  config.stability_rules = {
      "When a similar earlier turn was coded differently, ask: \"A similar response was coded as [X]. Does this "
      "classification align?\"",
      "End every turn block with the line \"Coding confirmed using decision tree.\"",
  };
  return config;
}

}  // namespace dialogcode
