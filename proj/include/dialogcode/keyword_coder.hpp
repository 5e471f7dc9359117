#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/backend.hpp"
#include "dialogcode/codebook.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

// Deterministic cue-word coder. It knows nothing about dialogue context and
// makes no claim to CDAS fidelity; it exists to drive the pipeline end to end
// and to act as an oracle for pipeline mechanics.

enum class TriggerKind {
  contains,          // phrase as whole words, case-insensitive
  contains_pattern,  // `first` ... `second`, both whole words, first before second
  ends_with,         // trimmed text ends with `first`
};

struct Trigger {
  TriggerKind kind = TriggerKind::contains;
  std::string first;
  std::string second;

  bool operator==(const Trigger&) const = default;
};

struct KeywordRule {
  CodeId code_id;
  Trigger trigger;
  // Rule is skipped if any of these codes already matched earlier.
  CodeSet unless_matched;

  bool operator==(const KeywordRule&) const = default;
};

struct KeywordRuleSet {
  std::vector<KeywordRule> rules;  // precedence order
  CodeId default_code{kUncoded};
};

// IRE <- why | what if; A <- yes | i agree; Q <- disagree | are you sure;
// RE <- because | therefore | so | would | could | might | if...then;
// OI <- ends with "?" unless an invitation code matched; else UC.
// Throws ValidationError if the codebook lacks one of those ids.
KeywordRuleSet default_keyword_rules(const Codebook& codebook);

struct KeywordMatch {
  CodeSet codes;
  std::vector<std::string> cues;  // human-readable triggers that fired
};

KeywordMatch keyword_match(std::string_view text, const KeywordRuleSet& rules);
CodeSet keyword_code_turn(const Turn& turn, const KeywordRuleSet& rules);

// Backend `mock-keyword`: reads `Turn <id> (<speaker>): <text>` lines from the
// last user message, codes each with the keyword rules and answers in the
// reference response format. Probes get fixed canned answers.
class KeywordBackend final : public Backend {
 public:
  explicit KeywordBackend(KeywordRuleSet rules);

  std::string id() const override { return std::string(kMockKeywordBackend); }
  bool deterministic() const override { return true; }
  std::string send(std::span<const Message> messages) override;

 private:
  KeywordRuleSet rules_;
};

// Parses `Turn <id> (<speaker>): <text>` request lines; text is unescaped.
std::vector<Turn> parse_batch_request(std::string_view request);

}  // namespace dialogcode
