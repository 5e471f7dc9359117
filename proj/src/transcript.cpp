#include "dialogcode/transcript.hpp"

#include <algorithm>
#include <sstream>

#include "dialogcode/error.hpp"
#include "text_util.hpp"

namespace dialogcode {

const Turn* Lesson::find_turn(TurnId id) const {
  auto it = std::lower_bound(turns.begin(), turns.end(), id,
                             [](const Turn& t, TurnId v) { return t.turn_id < v; });
  return it != turns.end() && it->turn_id == id ? &*it : nullptr;
}

Lesson parse_transcript(std::string_view source) {
  Lesson lesson;
  const auto all_lines = text::lines(source);

  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = all_lines[i];
    if (text::trim(line).empty()) continue;

    if (line.front() == '#') {
      // Header lines are only recognised before the first turn.
      if (!lesson.turns.empty()) continue;
      const auto body = text::trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string_view::npos) continue;
      const auto key = text::trim(body.substr(0, colon));
      const auto value = std::string(text::trim(body.substr(colon + 1)));
      if (key == "lesson_id") lesson.lesson_id = value;
      else if (key == "subject") lesson.subject = value;
      continue;
    }

    const auto fields = text::split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError("malformed_line", line_no,
                       "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    long long id = 0;
    if (!text::parse_positive_int(fields[0], id)) {
      throw ParseError("malformed_line", line_no, "turn id must be a positive integer");
    }
    if (!lesson.turns.empty() && id <= lesson.turns.back().turn_id) {
      throw ParseError("turn_order", line_no,
                       "turn id " + std::to_string(id) + " does not follow " +
                           std::to_string(lesson.turns.back().turn_id));
    }

    Turn turn;
    turn.turn_id = id;
    if (!text::unescape_field(fields[1], turn.speaker) || !text::unescape_field(fields[2], turn.text)) {
      throw ParseError("malformed_line", line_no, "invalid escape sequence");
    }
    if (text::trim(turn.text).empty()) throw ParseError("empty_utterance", line_no, "empty utterance");
    lesson.turns.push_back(std::move(turn));
  }
  return lesson;
}

std::string serialize_transcript(const Lesson& lesson) {
  std::ostringstream out;
  if (!lesson.lesson_id.empty()) out << "# lesson_id: " << lesson.lesson_id << "\n";
  if (!lesson.subject.empty()) out << "# subject: " << lesson.subject << "\n";
  for (const auto& turn : lesson.turns) {
    out << turn.turn_id << '\t' << text::escape_field(turn.speaker) << '\t' << text::escape_field(turn.text)
        << '\n';
  }
  return out.str();
}

GoldAnnotationSet parse_gold(std::string_view source, const Lesson& lesson, const Codebook& codebook,
                             GoldMode mode) {
  GoldAnnotationSet gold;
  gold.lesson_id = lesson.lesson_id;
  const auto all_lines = text::lines(source);

  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = text::trim(all_lines[i]);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = text::split(line, '\t');
    if (fields.size() != 2) throw ParseError("malformed_line", line_no, "expected '<turn_id>\\t<codes>'");
    long long id = 0;
    if (!text::parse_positive_int(fields[0], id)) {
      throw ParseError("malformed_line", line_no, "turn id must be a positive integer");
    }
    if (!lesson.find_turn(id)) {
      throw ParseError("unknown_turn", line_no, "turn " + std::to_string(id) + " is not in the lesson");
    }
    if (gold.labels.count(id)) {
      throw ParseError("duplicate_turn", line_no, "turn " + std::to_string(id) + " annotated twice");
    }

    CodeSet codes;
    for (auto part : text::split(fields[1], ',')) {
      const auto label = text::trim(part);
      if (label.empty()) continue;
      try {
        codes.insert(codebook.resolve(label).id);
      } catch (const UnknownLabelError& e) {
        throw ParseError("unknown_label", line_no, e.what());
      }
    }
    if (codes.empty()) throw ParseError("malformed_line", line_no, "no codes given");
    if (!uc_exclusive(codes)) {
      throw ParseError("uc_exclusivity", line_no, "UC cannot be combined with other codes");
    }
    gold.labels.emplace(id, std::move(codes));
  }

  for (const auto& turn : lesson.turns) {
    if (gold.labels.count(turn.turn_id)) continue;
    if (mode == GoldMode::strict) {
      throw ValidationError("missing_turn", "turn " + std::to_string(turn.turn_id) + " has no gold annotation");
    }
    gold.labels.emplace(turn.turn_id, CodeSet{std::string(kUncoded)});
  }
  return gold;
}

std::string serialize_gold(const GoldAnnotationSet& gold) {
  std::ostringstream out;
  for (const auto& [id, codes] : gold.labels) out << id << '\t' << join_codes(codes, ",") << '\n';
  return out.str();
}

std::vector<Batch> make_batches(const Lesson& lesson, std::size_t max_size) {
  if (max_size == 0) throw ValidationError("invalid_batch_size", "batch size must be at least 1");
  if (lesson.turns.empty()) throw ValidationError("empty_lesson", "lesson '" + lesson.lesson_id + "' has no turns");

  std::vector<Batch> batches;
  batches.reserve((lesson.turns.size() + max_size - 1) / max_size);
  for (std::size_t start = 0; start < lesson.turns.size(); start += max_size) {
    const auto end = std::min(start + max_size, lesson.turns.size());
    Batch batch;
    batch.lesson_id = lesson.lesson_id;
    batch.ordinal = batches.size() + 1;
    batch.turns.assign(lesson.turns.begin() + static_cast<std::ptrdiff_t>(start),
                       lesson.turns.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace dialogcode
