#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/codebook.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

struct CharRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const CharRange&) const = default;
};

struct TurnCoding {
  TurnId turn_id = 0;
  CodeSet predicted;  // never empty; UC only on its own
  std::string justification;
  CharRange raw_span;  // block location inside the raw response

  bool operator==(const TurnCoding&) const = default;
};

struct ParsedResponse {
  std::vector<TurnCoding> codings;  // batch order
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kSelfCheckLine = "Coding confirmed using decision tree.";

struct ParseOptions {
  // Warn when a block lacks the self-check line.
  bool expect_self_check = false;
};

// Splits an agent reply into per-turn blocks headed `Turn <id>` and reads the
// last `Codes:` line and first `Justification:` line of each. Markdown
// emphasis (`*`, `_`) is ignored. Empty code lists normalize to {UC}; UC next
// to other codes is dropped with a warning.
//
// Throws ValidationError (kind missing_block, duplicate_block or
// unknown_label) naming the turn.
ParsedResponse parse_agent_response(std::string_view response, std::span<const Turn> batch_turns,
                                    const Codebook& codebook, const ParseOptions& options = {});

// Codes listed on the last `Codes:` line of free text, if any.
std::optional<CodeSet> find_codes_line(std::string_view text, const Codebook& codebook);

// Reference renderer in the same shape the parser reads:
//   Turn <id> – <speaker>
//   Codes: A, EL
//   Justification: ...
//   Coding confirmed using decision tree.
// Justifications are flattened to one line.
std::string render_agent_response(std::span<const TurnCoding> codings, std::span<const Turn> turns,
                                  bool self_check = true);

}  // namespace dialogcode
