#include "dialogcode/tokens.hpp"

#include <gtest/gtest.h>

#include <string>

namespace dialogcode {
namespace {

TEST(EstimateTokens, CeilingOfQuarterCharacters) {
  EXPECT_EQ(estimate_tokens(""), 0u);
  EXPECT_EQ(estimate_tokens(std::string(400, 'x')), 100u);
  EXPECT_EQ(estimate_tokens("a"), 1u);
  EXPECT_EQ(estimate_tokens("abcd"), 1u);
  EXPECT_EQ(estimate_tokens("abcde"), 2u);
}

TEST(EstimateTokens, CountsCodePointsNotBytes) {
  // Four two-byte characters and four three-byte characters.
  EXPECT_EQ(estimate_tokens("éééé"), 1u);
  EXPECT_EQ(estimate_tokens("––––"), 1u);
  EXPECT_EQ(estimate_tokens("ééééé"), 2u);
}

TEST(EstimateTokens, MatchesArithmeticForAllSmallLengths) {
  for (std::size_t n = 0; n < 200; ++n) EXPECT_EQ(estimate_tokens(std::string(n, 'a')), (n + 3) / 4) << n;
}

TEST(EstimateTokens, BudgetDefaults) {
  EXPECT_EQ(kDefaultTokenBudget, 8000u);
  EXPECT_DOUBLE_EQ(kBudgetWarningRatio, 0.8);
}

}  // namespace
}  // namespace dialogcode
