#include "dialogcode/tokens.hpp"

#include "text_util.hpp"

namespace dialogcode {

std::size_t estimate_tokens(std::string_view text) {
  const auto chars = text::utf8_length(text);
  return (chars + 3) / 4;
}

}  // namespace dialogcode
