#include "dialogcode/keyword_coder.hpp"

#include <cctype>

#include "dialogcode/error.hpp"
#include "dialogcode/response.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace {

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'') {
      current += static_cast<char>(std::tolower(u));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

bool contains_phrase(const std::vector<std::string>& text, const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > text.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= text.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < phrase.size() && match; ++k) match = text[i + k] == phrase[k];
    if (match) return true;
  }
  return false;
}

bool fires(const Trigger& trigger, std::string_view raw, const std::vector<std::string>& text) {
  switch (trigger.kind) {
    case TriggerKind::contains:
      return contains_phrase(text, words(trigger.first));
    case TriggerKind::contains_pattern: {
      const auto first = words(trigger.first);
      const auto second = words(trigger.second);
      if (first.size() != 1 || second.size() != 1) return false;
      for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != first[0]) continue;
        for (std::size_t j = i + 1; j < text.size(); ++j) {
          if (text[j] == second[0]) return true;
        }
      }
      return false;
    }
    case TriggerKind::ends_with: {
      const auto trimmed = text::trim(raw);
      return trimmed.size() >= trigger.first.size() &&
             trimmed.substr(trimmed.size() - trigger.first.size()) == trigger.first;
    }
  }
  return false;
}

std::string describe(const Trigger& trigger) {
  switch (trigger.kind) {
    case TriggerKind::contains: return "'" + trigger.first + "'";
    case TriggerKind::contains_pattern: return "'" + trigger.first + "...' + '" + trigger.second + "'";
    case TriggerKind::ends_with: return "ends with '" + trigger.first + "'";
  }
  return {};
}

}  // namespace

KeywordRuleSet default_keyword_rules(const Codebook& codebook) {
  for (const char* id : {"IRE", "A", "Q", "RE", "OI", "ELI", "IC"}) {
    if (!codebook.contains(id)) {
      throw ValidationError("missing_code", std::string("keyword rules need code '") + id + "' in the codebook");
    }
  }
  const auto contains = [](const char* code, const char* phrase) {
    return KeywordRule{code, {TriggerKind::contains, phrase, ""}, {}};
  };

  KeywordRuleSet set;
  set.rules = {
      contains("IRE", "why"),
      contains("IRE", "what if"),
      contains("A", "yes"),
      contains("A", "i agree"),
      contains("Q", "disagree"),
      contains("Q", "are you sure"),
      contains("RE", "because"),
      contains("RE", "therefore"),
      contains("RE", "so"),
      contains("RE", "would"),
      contains("RE", "could"),
      contains("RE", "might"),
      KeywordRule{"RE", {TriggerKind::contains_pattern, "if", "then"}, {}},
      KeywordRule{"OI", {TriggerKind::ends_with, "?", ""}, {"ELI", "IRE", "IC"}},
  };
  set.default_code = std::string(kUncoded);
  return set;
}

KeywordMatch keyword_match(std::string_view text, const KeywordRuleSet& rules) {
  KeywordMatch match;
  const auto tokens = words(text);
  for (const auto& rule : rules.rules) {
    bool suppressed = false;
    for (const auto& code : rule.unless_matched) suppressed = suppressed || match.codes.count(code) != 0;
    if (suppressed || !fires(rule.trigger, text, tokens)) continue;
    match.codes.insert(rule.code_id);
    match.cues.push_back(rule.code_id + " <- " + describe(rule.trigger));
  }
  if (match.codes.empty()) match.codes.insert(rules.default_code);
  return match;
}

CodeSet keyword_code_turn(const Turn& turn, const KeywordRuleSet& rules) {
  return keyword_match(turn.text, rules).codes;
}

std::vector<Turn> parse_batch_request(std::string_view request) {
  std::vector<Turn> turns;
  for (auto line : text::lines(request)) {
    if (!line.starts_with("Turn ")) continue;
    auto rest = line.substr(5);
    std::size_t n = 0;
    while (n < rest.size() && std::isdigit(static_cast<unsigned char>(rest[n]))) ++n;
    long long id = 0;
    if (n == 0 || !text::parse_positive_int(rest.substr(0, n), id)) continue;
    rest.remove_prefix(n);
    if (!rest.starts_with(" (")) continue;
    rest.remove_prefix(2);
    const auto close = rest.find("): ");
    if (close == std::string_view::npos) continue;
    Turn turn;
    turn.turn_id = id;
    if (!text::unescape_field(rest.substr(0, close), turn.speaker) ||
        !text::unescape_field(rest.substr(close + 3), turn.text)) {
      continue;
    }
    turns.push_back(std::move(turn));
  }
  return turns;
}

KeywordBackend::KeywordBackend(KeywordRuleSet rules) : rules_(std::move(rules)) {}

std::string KeywordBackend::send(std::span<const Message> messages) {
  const Message* last = nullptr;
  for (const auto& m : messages) {
    if (m.role == Role::user) last = &m;
  }
  if (!last) return "Ready to code.";

  const auto& content = last->content;
  if (content.find("Does this classification align?") != std::string::npos) {
    return "The classification aligns with the earlier coding.";
  }
  const auto turns = parse_batch_request(content);
  if (turns.empty()) {
    if (content.find("multi-utterance") != std::string::npos) {
      return "Each utterance in a turn is coded for its own function; the turn receives the union of those codes.";
    }
    return "Understood. I will follow the instructions and the decision tree in order.";
  }

  std::vector<TurnCoding> codings;
  codings.reserve(turns.size());
  for (const auto& turn : turns) {
    auto match = keyword_match(turn.text, rules_);
    TurnCoding coding;
    coding.turn_id = turn.turn_id;
    coding.predicted = std::move(match.codes);
    coding.justification =
        match.cues.empty() ? std::string("No keyword cue matched.") : "Cues: " + text::join(match.cues, "; ");
    codings.push_back(std::move(coding));
  }
  const bool self_check = content.find(kSelfCheckLine) != std::string::npos;
  return render_agent_response(codings, turns, self_check);
}

}  // namespace dialogcode
