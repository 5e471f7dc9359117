#include "dialogcode/synthetic.hpp"

#include <map>
#include <random>
#include <vector>

#include "dialogcode/error.hpp"

namespace dialogcode {
namespace {

const std::map<std::string, std::vector<std::string>>& templates() {
  static const std::map<std::string, std::vector<std::string>> t = {
      {"ELI",
       {"Can you tell us more about the {t}?", "Could you add some detail on the {t}?",
        "Say a bit more about what you noticed with the {t}.", "Tell me more about the {t}."}},
      {"EL",
       {"The {t} was bigger at the start.", "I noticed the {t} changed colour.",
        "We saw the {t} move to the left side.", "The {t} has two parts that look alike."}},
      {"IRE",
       {"Why do you think the {t} changed?", "What if we doubled the {t}?",
        "Why does the {t} behave like that?", "What if the {t} was colder?"}},
      {"RE",
       {"It grew because the {t} had more light.", "If the {t} is heavier then it sinks faster.",
        "So the {t} must have lost water.", "The {t} would melt in the sun."}},
      {"IC",
       {"Can you build on her idea about the {t}?", "Who can compare those two ideas about the {t}?",
        "Let's try to combine what both groups said on the {t}.", "Can anyone connect that to the {t}?"}},
      {"SC",
       {"Our table put the {t} idea together with theirs.", "Both groups described the {t} the same way.",
        "We joined our notes on the {t}.", "That matches what we wrote about the {t}."}},
      {"RC",
       {"Their idea on the {t} fits ours, since both need heat.",
        "We changed our view of the {t} after hearing them, it makes more sense.",
        "Their result on the {t} supports ours, given the same test.",
        "Putting both ideas on the {t} together explains the result better."}},
      {"A",
       {"Yes, that is right about the {t}.", "I agree with the point on the {t}.", "Yes, exactly.",
        "I agree, the {t} looks the same."}},
      {"Q",
       {"I disagree, the {t} did not change.", "Are you sure about the {t}?",
        "I disagree with that result for the {t}.", "Are you sure the {t} was measured right?"}},
      {"RB",
       {"Last week we looked at the {t} as well.", "Remember when we first saw the {t}.",
        "Earlier today we said the {t} was small.", "Like in our last lesson on the {t}."}},
      {"RW",
       {"At home my {t} does the same.", "In the news they showed a {t} like this.",
        "My grandad has a {t} in the garden.", "In real life the {t} is much bigger."}},
      {"OI",
       {"Who wants to share first?", "Anyone else?", "Which group is ready?", "Who has not spoken yet?"}},
      {"UC",
       {"Please put your pencils down.", "Okay, let's get started.", "Turn to page four.",
        "Thank you, sit down please."}},
  };
  return t;
}

const std::vector<std::string> kTopics = {"plant", "ice cube", "magnet", "shadow", "seed", "circuit", "rock", "puddle"};

std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % n);
}

std::string fill(std::string s, const std::string& topic) {
  for (auto pos = s.find("{t}"); pos != std::string::npos; pos = s.find("{t}", pos + topic.size())) {
    s.replace(pos, 3, topic);
  }
  return s;
}

bool teacher_code(const std::string& code) {
  return code == "ELI" || code == "IRE" || code == "IC" || code == "OI" || code == "UC";
}

}  // namespace

LessonData synthetic_lesson(const SyntheticSpec& spec, const Codebook& codebook) {
  for (const auto& [code, list] : templates()) {
    if (!codebook.contains(code)) {
      throw ValidationError("missing_code", "synthetic lessons need code '" + code + "' in the codebook");
    }
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> codes;
  for (const auto& [code, list] : templates()) codes.push_back(code);
  static const std::vector<std::string> students = {"Student A", "Student B", "Student C", "Student D"};

  LessonData data;
  data.lesson.lesson_id = spec.lesson_id;
  data.lesson.subject = spec.subject;
  data.gold.lesson_id = spec.lesson_id;
  for (std::size_t i = 0; i < spec.turns; ++i) {
    const auto topic = kTopics[draw(rng, kTopics.size())];
    const auto& first = codes[draw(rng, codes.size())];
    CodeSet gold{first};
    std::string text = fill(templates().at(first)[draw(rng, 4)], topic);
    if (first != kUncoded && draw(rng, 100) < spec.multi_code_percent) {
      const auto& second = codes[draw(rng, codes.size())];
      if (second != kUncoded && second != first) {
        text += " " + fill(templates().at(second)[draw(rng, 4)], topic);
        gold.insert(second);
      }
    }
    const auto speaker = teacher_code(first) ? std::string("Teacher") : students[draw(rng, students.size())];
    const auto id = static_cast<TurnId>(i + 1);
    data.lesson.turns.push_back({id, speaker, text});
    data.gold.labels[id] = gold;
  }
  return data;
}

}  // namespace dialogcode
