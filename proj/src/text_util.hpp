#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dialogcode::text {

std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

std::vector<std::string_view> split(std::string_view s, char sep);
// Splits on LF. A trailing LF does not produce a final empty line.
std::vector<std::string_view> lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Backslash escaping used by the TSV formats: \\ \n \t.
std::string escape_field(std::string_view s);
// Returns false on a dangling or unknown escape.
bool unescape_field(std::string_view s, std::string& out);

// Unicode scalar count of a UTF-8 string (continuation bytes are skipped).
std::size_t utf8_length(std::string_view s);

// Collapses runs of whitespace (including newlines) to single spaces and trims.
std::string squash_whitespace(std::string_view s);

bool parse_positive_int(std::string_view s, long long& out);

}  // namespace dialogcode::text
