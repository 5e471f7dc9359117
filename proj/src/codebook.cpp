#include "dialogcode/codebook.hpp"

#include <cctype>
#include <sstream>

#include "dialogcode/error.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace {

struct Issue {
  std::size_t index;  // offending code, or npos for whole-book problems
  std::string kind;
  std::string message;
  bool in_aliases = false;
};

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 4) return false;
  for (char c : id) {
    const auto u = static_cast<unsigned char>(c);
    if (!(std::isdigit(u) || std::isupper(u))) return false;
  }
  return true;
}

std::optional<Issue> check_codes(const std::vector<Code>& codes) {
  std::map<std::string, std::size_t> ids;
  std::map<std::string, std::size_t> labels;
  std::size_t uc_count = 0;

  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto& code = codes[i];
    if (!valid_id(code.id)) {
      return Issue{i, "invalid_id", "code id '" + code.id + "' must be 1-4 uppercase letters or digits"};
    }
    if (ids.count(code.id)) {
      return Issue{i, "duplicate_id", "duplicate code id '" + code.id + "'"};
    }
    if (code.id == kUncoded) ++uc_count;
    ids.emplace(code.id, i);
    labels.emplace(code.id, i);
  }

  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (const auto& alias : codes[i].aliases) {
      const auto key = text::to_upper(text::trim(alias));
      if (key.empty()) {
        return Issue{i, "alias_collision", "empty alias on code '" + codes[i].id + "'", true};
      }
      auto [it, inserted] = labels.emplace(key, i);
      if (!inserted && it->second != i) {
        return Issue{i, "alias_collision",
                     "alias '" + alias + "' of '" + codes[i].id + "' collides with code '" +
                         codes[it->second].id + "'",
                     true};
      }
    }
  }

  if (uc_count != 1) {
    return Issue{std::string::npos, "missing_uc", "codebook must contain exactly one UC code"};
  }
  return std::nullopt;
}

}  // namespace

Codebook::Codebook(std::string version, std::vector<Code> codes)
    : version_(std::move(version)), codes_(std::move(codes)) {
  if (auto issue = check_codes(codes_)) throw ValidationError(issue->kind, issue->message);

  for (std::size_t i = 0; i < codes_.size(); ++i) {
    id_index_.emplace(codes_[i].id, i);
    label_index_.emplace(codes_[i].id, i);
  }
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    for (const auto& alias : codes_[i].aliases) label_index_.emplace(text::to_upper(text::trim(alias)), i);
  }
}

std::optional<std::size_t> Codebook::find(std::string_view label) const {
  const auto key = text::to_upper(text::trim(label));
  if (auto it = id_index_.find(key); it != id_index_.end()) return it->second;
  if (auto it = label_index_.find(key); it != label_index_.end()) return it->second;
  return std::nullopt;
}

const Code& Codebook::resolve(std::string_view label) const {
  if (auto index = find(label)) return codes_[*index];
  throw UnknownLabelError(std::string(label));
}

std::size_t Codebook::index_of(std::string_view id) const {
  auto it = id_index_.find(std::string(id));
  if (it == id_index_.end()) throw UnknownLabelError(std::string(id));
  return it->second;
}

std::vector<CodeId> Codebook::ids() const {
  std::vector<CodeId> out;
  out.reserve(codes_.size());
  for (const auto& c : codes_) out.push_back(c.id);
  return out;
}

std::vector<CodeId> Codebook::substantive_ids() const {
  std::vector<CodeId> out;
  for (const auto& c : codes_) {
    if (c.id != kUncoded) out.push_back(c.id);
  }
  return out;
}

Codebook builtin_cdas() {
  std::vector<Code> codes = {
      {"ELI", "Elaboration Invitation", "Invites others to build on, evaluate, or clarify prior contributions.",
       {}, "unseen work or procedural follow-ups.", {}},
      {"EL", "Elaboration",
       "Builds on or adds new ideas/perspectives to earlier contributions. Includes brief but meaningful "
       "elaborations or related ideas.",
       {}, "", {}},
      {"IRE", "Reasoning Invitation",
       "Asks for explanation, justification, speculation, or prediction (e.g. \"Why?\", \"What if...?\").",
       {"why", "what if"}, "simple answer requests.", {"REI"}},
      {"RE", "Reasoning",
       "Provides reasons, explanations, or evidence for a view. Includes analogies, distinctions, and "
       "justified speculations.",
       {"because", "if...then", "so", "therefore", "not...unless", "would", "could", "might"}, "", {}},
      {"IC", "Co-ordination Invitation", "Invites comparison, synthesis, or resolution of two or more ideas.",
       {}, "", {"CI"}},
      {"SC", "Simple Co-ordination", "Summarises or compares ideas (own or others') without giving reasons.",
       {}, "", {}},
      {"RC", "Reasoned Co-ordination",
       "Compares or integrates ideas with justification or evidence. Includes counter-arguments and reasoned "
       "agreement.",
       {}, "", {}},
      {"A", "Agreement",
       "Explicit agreement or acceptance (e.g. \"Yes\", \"I agree\"). Includes paraphrasing or repetition to "
       "signal agreement.",
       {"yes", "i agree"}, "", {}},
      {"Q", "Querying",
       "Challenges or disagrees with a statement. Includes verbal disagreement, sarcasm, or questioning.", {},
       "", {}},
      {"RB", "Reference Back", "Refers to prior class knowledge, shared experiences, or earlier activities.", {},
       "", {}},
      {"RW", "Reference to Wider Context",
       "Links current learning to broader contexts (e.g. real-world examples, outside expertise).", {}, "", {}},
      {"OI", "Other Invitation",
       "All other verbal invitations (e.g. ideas, opinions, closed/open questions, calculations).", {},
       "non-verbal prompts.", {}},
      {"UC", "Uncoded", "When none of the above codes apply.", {}, "", {"Uncoded"}},
  };
  return Codebook("CDAS", std::move(codes));
}

Codebook parse_codebook(std::string_view source) {
  struct Section {
    Code code;
    std::size_t header_line = 0;
    std::size_t id_line = 0;
    std::size_t aliases_line = 0;
    std::set<std::string> seen_keys;
  };

  std::string version = "custom";
  std::vector<Section> sections;
  const auto all_lines = text::lines(source);

  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = text::trim(all_lines[i]);
    if (line.empty() || line.front() == '#') continue;

    if (line == "[code]") {
      sections.push_back(Section{});
      sections.back().header_line = line_no;
      continue;
    }
    if (line.front() == '[') throw ParseError("malformed_section", line_no, "unknown section header");

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("malformed_section", line_no, "expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));

    if (sections.empty()) {
      if (key != "version") throw ParseError("malformed_section", line_no, "key '" + key + "' outside a [code] section");
      version = value;
      continue;
    }

    auto& section = sections.back();
    if (!section.seen_keys.insert(key).second) {
      throw ParseError("malformed_section", line_no, "key '" + key + "' repeated in section");
    }
    const auto list = [&value] {
      std::vector<std::string> out;
      if (value.empty()) return out;
      for (auto part : text::split(value, ',')) {
        auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
      }
      return out;
    };

    if (key == "id") {
      section.code.id = value;
      section.id_line = line_no;
    } else if (key == "name") {
      section.code.name = value;
    } else if (key == "definition") {
      section.code.definition = value;
    } else if (key == "keywords") {
      section.code.keywords = list();
    } else if (key == "exclusions") {
      section.code.exclusions = value;
    } else if (key == "aliases") {
      section.code.aliases = list();
      section.aliases_line = line_no;
    } else {
      throw ParseError("unknown_key", line_no, "unknown key '" + key + "'");
    }
  }

  std::vector<Code> codes;
  codes.reserve(sections.size());
  for (const auto& s : sections) {
    if (s.id_line == 0) throw ParseError("malformed_section", s.header_line, "section has no id");
    codes.push_back(s.code);
  }

  if (auto issue = check_codes(codes)) {
    std::size_t line = all_lines.size();
    if (issue->index != std::string::npos) {
      const auto& s = sections[issue->index];
      line = issue->in_aliases ? s.aliases_line : s.id_line;
    }
    throw ParseError(issue->kind, line, issue->message);
  }
  return Codebook(std::move(version), std::move(codes));
}

std::string serialize_codebook(const Codebook& codebook) {
  std::ostringstream out;
  out << "version = " << codebook.version() << "\n";
  for (const auto& code : codebook.codes()) {
    out << "\n[code]\n";
    out << "id = " << code.id << "\n";
    out << "name = " << code.name << "\n";
    out << "definition = " << code.definition << "\n";
    out << "keywords = " << text::join(code.keywords, ", ") << "\n";
    out << "exclusions = " << code.exclusions << "\n";
    out << "aliases = " << text::join(code.aliases, ", ") << "\n";
  }
  return out.str();
}

CodeSet resolve_labels(const Codebook& codebook, std::span<const std::string> labels) {
  CodeSet out;
  for (const auto& label : labels) out.insert(codebook.resolve(label).id);
  return out;
}

std::string join_codes(const CodeSet& codes, std::string_view separator) {
  std::string out;
  for (const auto& id : codes) {
    if (!out.empty()) out += separator;
    out += id;
  }
  return out;
}

bool uc_exclusive(const CodeSet& codes) {
  return !codes.count(std::string(kUncoded)) || codes.size() == 1;
}

}  // namespace dialogcode
