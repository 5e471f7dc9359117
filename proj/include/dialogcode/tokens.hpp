#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace dialogcode {

// Pluggable token-count approximation for instruction budgets.
using TokenEstimator = std::function<std::size_t(std::string_view)>;

// ceil(characters / 4), counting Unicode scalars rather than bytes.
std::size_t estimate_tokens(std::string_view text);

inline constexpr std::size_t kDefaultTokenBudget = 8000;
// Compilation warns once the estimate reaches this fraction of the budget.
inline constexpr double kBudgetWarningRatio = 0.8;

}  // namespace dialogcode
