#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dialogcode {

using CodeId = std::string;
// Set of canonical code ids. Ordered so that rendering is deterministic.
using CodeSet = std::set<CodeId>;

inline constexpr std::string_view kUncoded = "UC";

struct Code {
  CodeId id;
  std::string name;
  std::string definition;
  std::vector<std::string> keywords;
  std::string exclusions;
  std::vector<std::string> aliases;

  bool operator==(const Code&) const = default;
};

// An ordered, validated coding scheme. Immutable once constructed.
//
// Invariants enforced by the constructor: ids are 1-4 uppercase alphanumeric
// characters and unique; exactly one code has id UC; no alias (compared
// case-insensitively) collides with another code's id or alias.
class Codebook {
 public:
  Codebook(std::string version, std::vector<Code> codes);

  const std::string& version() const noexcept { return version_; }
  std::span<const Code> codes() const noexcept { return codes_; }
  std::size_t size() const noexcept { return codes_.size(); }

  // Case-insensitive lookup against ids, then aliases. Throws UnknownLabelError.
  const Code& resolve(std::string_view label) const;
  std::optional<std::size_t> find(std::string_view label) const;

  bool contains(std::string_view id) const { return id_index_.count(std::string(id)) != 0; }
  std::size_t index_of(std::string_view id) const;

  std::vector<CodeId> ids() const;
  // Every id except UC, in codebook order.
  std::vector<CodeId> substantive_ids() const;

  bool operator==(const Codebook& other) const {
    return version_ == other.version_ && codes_ == other.codes_;
  }

 private:
  std::string version_;
  std::vector<Code> codes_;
  std::map<std::string, std::size_t> id_index_;
  std::map<std::string, std::size_t> label_index_;  // uppercased ids and aliases
};

// The 13-code Cambridge Dialogue Analysis Scheme.
Codebook builtin_cdas();

// Reads the `[code]` / `key = value` section format. Errors carry line numbers.
Codebook parse_codebook(std::string_view source);
std::string serialize_codebook(const Codebook& codebook);

// Resolves each label and returns canonical ids. Throws UnknownLabelError.
CodeSet resolve_labels(const Codebook& codebook, std::span<const std::string> labels);

// Comma-joined ids in set order, e.g. "A, EL, OI".
std::string join_codes(const CodeSet& codes, std::string_view separator = ", ");

// True when UC is absent or is the only member.
bool uc_exclusive(const CodeSet& codes);

}  // namespace dialogcode
