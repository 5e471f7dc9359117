#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/codebook.hpp"

namespace dialogcode {

using TurnId = std::int64_t;

struct Turn {
  TurnId turn_id = 0;
  std::string speaker;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct Lesson {
  std::string lesson_id;
  std::string subject;
  std::vector<Turn> turns;  // strictly increasing turn_id

  const Turn* find_turn(TurnId id) const;
  bool operator==(const Lesson&) const = default;
};

struct GoldAnnotationSet {
  std::string lesson_id;
  std::map<TurnId, CodeSet> labels;

  bool operator==(const GoldAnnotationSet&) const = default;
};

enum class GoldMode {
  strict,   // every lesson turn must be annotated
  lenient,  // unannotated turns default to {UC}
};

struct Batch {
  std::string lesson_id;
  std::size_t ordinal = 0;  // 1-based
  std::vector<Turn> turns;
};

// Transcript format: optional `# lesson_id: X` / `# subject: Y` header lines,
// then `<turn_id>\t<speaker>\t<text>` per turn. Text escapes \\, \n and \t.
Lesson parse_transcript(std::string_view source);
std::string serialize_transcript(const Lesson& lesson);

// Gold format: `<turn_id>\t<CODE>[,<CODE>...]`, labels canonical or alias.
GoldAnnotationSet parse_gold(std::string_view source, const Lesson& lesson, const Codebook& codebook,
                             GoldMode mode = GoldMode::strict);
std::string serialize_gold(const GoldAnnotationSet& gold);

inline constexpr std::size_t kDefaultBatchSize = 20;

// Contiguous partition into ceil(n / max_size) batches.
std::vector<Batch> make_batches(const Lesson& lesson, std::size_t max_size = kDefaultBatchSize);

}  // namespace dialogcode
