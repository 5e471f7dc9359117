#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/codebook.hpp"
#include "dialogcode/decision_tree.hpp"
#include "dialogcode/tokens.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

enum class ExampleKind { core, ambiguous, multi_utterance, edge };

std::string_view to_string(ExampleKind kind);
std::optional<ExampleKind> example_kind_from_string(std::string_view s);

struct ExampleItem {
  ExampleKind kind = ExampleKind::core;
  std::vector<Turn> context_turns;
  Turn focus_turn;
  CodeSet gold_codes;
  std::optional<std::string> rationale;
  // Added by an adjudication cycle; rendered in its own sub-block and not
  // counted against the curated quotas.
  bool adjudicated = false;

  bool operator==(const ExampleItem&) const = default;
};

struct ExampleSet {
  std::vector<ExampleItem> items;

  bool operator==(const ExampleSet&) const = default;
};

struct PriorityRule {
  int priority = 0;
  std::string text;

  bool operator==(const PriorityRule&) const = default;
};

struct InstructionConfig {
  std::string role_preamble;
  std::vector<PriorityRule> global_rules;
  Codebook codebook = builtin_cdas();
  DecisionTree decision_tree;
  std::vector<std::string> justification_rules;
  std::vector<std::string> stability_rules;
  ExampleSet examples;
  std::size_t token_budget = kDefaultTokenBudget;

  bool operator==(const InstructionConfig&) const = default;
};

// Canonical section order of a compiled document.
inline constexpr std::array<std::string_view, 7> kSectionOrder = {
    "role", "global_rules", "code_definitions", "decision_tree", "justification_rules", "stability_control",
    "examples"};

struct Section {
  std::string name;
  std::size_t begin = 0;  // [begin, end) character offsets into the text
  std::size_t end = 0;

  bool operator==(const Section&) const = default;
};

struct InstructionDocument {
  std::string text;
  std::vector<Section> sections;  // canonical order, contiguous, covering text
  std::size_t token_estimate = 0;
  std::size_t token_budget = 0;
  std::string config_hash;
  std::vector<std::string> warnings;

  const Section* section(std::string_view name) const;
  std::string_view section_text(std::string_view name) const;
};

// Stable content hash over the canonical JSON form of the config.
std::string config_hash(const InstructionConfig& config);

// Renders the config into a byte-stable instruction document.
// Throws ValidationError for an invalid tree or unknown example codes and
// BudgetError when the estimate exceeds the config's token budget.
InstructionDocument compile_instructions(const InstructionConfig& config,
                                         const TokenEstimator& estimator = estimate_tokens);

// Quota check for curated anchor examples.
struct QuotaViolation {
  std::string kind;  // e.g. "core_below_minimum"
  std::string message;
};

struct QuotaReport {
  std::vector<QuotaViolation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

struct ExampleQuota {
  std::size_t core_min = 10;
  std::size_t core_max = 15;
  std::size_t ambiguous_min = 5;
  std::size_t ambiguous_max = 10;
  std::size_t multi_utterance_min = 5;
  std::size_t edge_min = 5;
};

QuotaReport validate_example_quota(const ExampleSet& examples, const Codebook& codebook,
                                   const ExampleQuota& quota = {});

// Sentence-level utterance count used to recognise multi-utterance turns.
std::size_t count_utterances(std::string_view text);

// The baseline CDAS configuration: role, prioritised global rules, the default
// decision tree, and justification/stability rules. No examples.
InstructionConfig default_cdas_config();

}  // namespace dialogcode
