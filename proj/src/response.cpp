#include "dialogcode/response.hpp"

#include <cctype>
#include <map>
#include <sstream>

#include "dialogcode/error.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace {

struct Line {
  std::string_view text;
  std::size_t begin;
};

std::vector<Line> split_lines(std::string_view s) {
  std::vector<Line> out;
  std::size_t start = 0;
  while (start < s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back({line, start});
    start = end + 1;
  }
  return out;
}

bool is_emphasis(char c) { return c == '*' || c == '_'; }

std::string_view skip_markup(std::string_view s) {
  while (!s.empty()) {
    const char c = s.front();
    if (std::isspace(static_cast<unsigned char>(c)) || is_emphasis(c) || c == '#' || c == '>' || c == '-') {
      s.remove_prefix(1);
    } else {
      break;
    }
  }
  return s;
}

std::string strip_emphasis(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (!is_emphasis(c)) out += c;
  }
  return out;
}

// `Turn <digits>` at the start of a line, ignoring markup. The id must not run
// into letters or further digits.
std::optional<TurnId> header_turn(std::string_view line) {
  auto s = skip_markup(line);
  if (!text::istarts_with(s, "turn")) return std::nullopt;
  s.remove_prefix(4);
  if (s.empty() || !std::isspace(static_cast<unsigned char>(s.front()))) return std::nullopt;
  s = text::trim(s);
  std::size_t n = 0;
  while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
  if (n == 0) return std::nullopt;
  if (n < s.size() && std::isalpha(static_cast<unsigned char>(s[n]))) return std::nullopt;
  long long id = 0;
  if (!text::parse_positive_int(s.substr(0, n), id)) return std::nullopt;
  return id;
}

// Value after `<key>:` when the line, ignoring markup, starts with the key.
std::optional<std::string_view> keyed_value(std::string_view line, std::string_view key) {
  auto s = skip_markup(line);
  if (!text::istarts_with(s, key)) return std::nullopt;
  s.remove_prefix(key.size());
  while (!s.empty() && (is_emphasis(s.front()) || s.front() == ' ')) s.remove_prefix(1);
  if (s.empty() || s.front() != ':') return std::nullopt;
  s.remove_prefix(1);
  while (!s.empty() && (is_emphasis(s.front()) || std::isspace(static_cast<unsigned char>(s.front())))) {
    s.remove_prefix(1);
  }
  return text::trim(s);
}

std::optional<std::vector<std::string>> codes_line(std::string_view line) {
  const auto stripped = strip_emphasis(line);
  const auto value = keyed_value(stripped, "codes");
  if (!value) return std::nullopt;
  std::vector<std::string> labels;
  std::string token;
  const auto flush = [&] {
    auto t = text::trim(token);
    while (!t.empty() && (t.back() == '.' || t.back() == ']' || t.back() == ')')) t.remove_suffix(1);
    while (!t.empty() && (t.front() == '[' || t.front() == '(')) t.remove_prefix(1);
    t = text::trim(t);
    if (!t.empty()) labels.emplace_back(t);
    token.clear();
  };
  for (char c : *value) {
    if (c == ',' || c == ';') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  return labels;
}

}  // namespace

std::optional<CodeSet> find_codes_line(std::string_view text, const Codebook& codebook) {
  std::optional<std::vector<std::string>> last;
  for (const auto& line : split_lines(text)) {
    if (auto labels = codes_line(line.text)) last = std::move(labels);
  }
  if (!last) return std::nullopt;
  return resolve_labels(codebook, *last);
}

ParsedResponse parse_agent_response(std::string_view response, std::span<const Turn> batch_turns,
                                    const Codebook& codebook, const ParseOptions& options) {
  struct Block {
    std::size_t first_line;
    std::size_t last_line;  // exclusive
  };

  const auto lines = split_lines(response);
  std::map<TurnId, Block> blocks;
  std::map<TurnId, bool> in_batch;
  for (const auto& t : batch_turns) in_batch[t.turn_id] = true;

  ParsedResponse parsed;
  std::optional<TurnId> open;
  std::size_t open_line = 0;
  const auto close = [&](std::size_t at) {
    if (open) blocks[*open] = {open_line, at};
    open.reset();
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto id = header_turn(lines[i].text);
    if (!id) continue;
    // Repeating the header of the block in progress (e.g. an echoed
    // transcript line) does not start a new block.
    if (open && *open == *id) continue;
    close(i);
    if (!in_batch.count(*id)) {
      parsed.warnings.push_back("ignoring block for turn " + std::to_string(*id) + " outside the batch");
      continue;
    }
    if (blocks.count(*id)) {
      throw ValidationError("duplicate_block", "turn " + std::to_string(*id) + ": duplicate block in response");
    }
    open = *id;
    open_line = i;
  }
  close(lines.size());

  for (const auto& turn : batch_turns) {
    auto it = blocks.find(turn.turn_id);
    if (it == blocks.end()) {
      throw ValidationError("missing_block", "turn " + std::to_string(turn.turn_id) + ": no block in response");
    }
    const auto [first, last] = it->second;

    std::optional<std::vector<std::string>> labels;
    std::optional<std::string> justification;
    bool self_checked = false;
    for (std::size_t i = first + 1; i < last; ++i) {
      const auto line = lines[i].text;
      if (auto found = codes_line(line)) labels = std::move(found);
      if (!justification) {
        if (auto value = keyed_value(line, "justification")) justification = std::string(*value);
      }
      if (text::trim(strip_emphasis(line)) == kSelfCheckLine) self_checked = true;
    }

    TurnCoding coding;
    coding.turn_id = turn.turn_id;
    coding.justification = justification.value_or("");
    coding.raw_span.begin = lines[first].begin;
    coding.raw_span.end = last < lines.size() ? lines[last].begin : response.size();

    const auto where = "turn " + std::to_string(turn.turn_id);
    if (labels) {
      for (const auto& label : *labels) {
        const auto index = codebook.find(label);
        if (!index) {
          throw ValidationError("unknown_label", where + ": unknown code label '" + label + "'");
        }
        coding.predicted.insert(codebook.codes()[*index].id);
      }
    } else {
      parsed.warnings.push_back(where + ": no Codes line");
    }

    const std::string uc(kUncoded);
    if (coding.predicted.empty()) {
      if (labels) parsed.warnings.push_back(where + ": empty code list coded as UC");
      coding.predicted.insert(uc);
    } else if (!uc_exclusive(coding.predicted)) {
      coding.predicted.erase(uc);
      parsed.warnings.push_back(where + ": dropped UC listed alongside other codes");
    }
    if (options.expect_self_check && !self_checked) {
      parsed.warnings.push_back(where + ": missing self-check line");
    }
    parsed.codings.push_back(std::move(coding));
  }
  return parsed;
}

std::string render_agent_response(std::span<const TurnCoding> codings, std::span<const Turn> turns,
                                  bool self_check) {
  std::map<TurnId, const Turn*> by_id;
  for (const auto& t : turns) by_id[t.turn_id] = &t;

  std::ostringstream out;
  for (std::size_t i = 0; i < codings.size(); ++i) {
    const auto& coding = codings[i];
    if (i) out << "\n";
    out << "Turn " << coding.turn_id;
    if (auto it = by_id.find(coding.turn_id); it != by_id.end() && !it->second->speaker.empty()) {
      out << " – " << text::squash_whitespace(it->second->speaker);
    }
    out << "\n";
    out << "Codes: " << join_codes(coding.predicted) << "\n";
    out << "Justification: " << text::squash_whitespace(coding.justification) << "\n";
    if (self_check) out << kSelfCheckLine << "\n";
  }
  return out.str();
}

}  // namespace dialogcode
