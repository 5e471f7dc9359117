#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>

#include "dialogcode/codebook.hpp"
#include "dialogcode/instruction.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

// k focus turns per substantive code, no context.
struct PerCodeIsolated {
  std::size_t k = 1;

  bool operator==(const PerCodeIsolated&) const = default;
};

inline constexpr std::size_t kDefaultFlowWindow = 6;

// Contiguous windows totalling total_n turns, chosen greedily for code
// coverage. Every window turn becomes one example whose context is the
// preceding turns of the same window.
struct ContextualFlow {
  std::size_t total_n = 120;
  std::size_t window = kDefaultFlowWindow;

  bool operator==(const ContextualFlow&) const = default;
};

struct ExampleSelectionSpec {
  std::variant<PerCodeIsolated, ContextualFlow> mode;
  std::uint64_t seed = 0;

  bool operator==(const ExampleSelectionSpec&) const = default;
};

// Number of examples the selection asks for, given `substantive_codes`.
std::size_t requested_examples(const ExampleSelectionSpec& spec, std::size_t substantive_codes);

// Deterministic for a fixed seed. Every lesson needs a gold set with the same
// lesson_id; turns without a gold label are never chosen.
// Errors: ValidationError kinds insufficient_examples (names the code),
// corpus_too_small, missing_gold, invalid_selection.
ExampleSet select_examples(std::span<const Lesson> corpus, std::span<const GoldAnnotationSet> gold,
                           const Codebook& codebook, const ExampleSelectionSpec& spec);

}  // namespace dialogcode
