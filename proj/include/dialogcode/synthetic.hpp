#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "dialogcode/codebook.hpp"
#include "dialogcode/experiment.hpp"

namespace dialogcode {

// Template-built classroom lesson with gold labels, for tests, fixtures and
// offline experiments. Every turn is drawn from per-code sentence templates;
// a fraction of turns joins two templates and carries both codes.
struct SyntheticSpec {
  std::string lesson_id = "synthetic";
  std::string subject = "science";
  std::size_t turns = 200;
  std::uint64_t seed = 1;
  // Chance that a turn combines two codes, in 1/100 units.
  unsigned multi_code_percent = 20;
};

// Needs the CDAS code ids. Deterministic for a fixed spec.
LessonData synthetic_lesson(const SyntheticSpec& spec, const Codebook& codebook = builtin_cdas());

}  // namespace dialogcode
