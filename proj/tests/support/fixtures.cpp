#include "support/fixtures.hpp"

#include <algorithm>
#include <sstream>

#include "dialogcode/cli.hpp"

namespace dialogcode::testing {

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    auto candidate = std::filesystem::temp_directory_path() / ("dialogcode-test-" + std::to_string(rng() % 1000000000));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path fixture_path(const std::string& name) { return std::filesystem::path(DIALOGCODE_FIXTURES_DIR) / name; }

std::size_t Gen::below(std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng_();
  while (x >= limit) x = rng_();
  return static_cast<std::size_t>(x % n);
}

CodeSet Gen::code_set(const Codebook& codebook, std::size_t max_size) {
  const auto ids = codebook.ids();
  if (chance(10)) return {std::string(kUncoded)};
  const auto substantive = codebook.substantive_ids();
  CodeSet out;
  const auto n = between(1, std::min(max_size, substantive.size()));
  while (out.size() < n) out.insert(substantive[below(substantive.size())]);
  return out;
}

std::string Gen::text(std::size_t max_len) {
  static const std::vector<std::string> pieces = {"a", "b", "Z", " ", "\t", "\n", "\\", "?", ".", "é", "–", "ü", "7", ",", ":"};
  std::string out;
  const auto n = below(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) out += pieces[below(pieces.size())];
  return out;
}

std::string Gen::words(std::size_t max_words) {
  static const std::vector<std::string> vocab = {"the", "plant", "why", "because", "yes", "so", "magnet", "I",
                                                 "agree", "think", "if", "then", "water", "grew", "are", "you",
                                                 "sure", "what", "might", "colder", "disagree", "ok"};
  std::string out;
  const auto n = between(1, max_words);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += vocab[below(vocab.size())];
  }
  static const std::vector<std::string> ends = {"", ".", "?", "!"};
  return out + ends[below(ends.size())];
}

Lesson Gen::lesson(const std::string& id, std::size_t turns) {
  Lesson lesson;
  lesson.lesson_id = id;
  lesson.subject = "science";
  TurnId next_id = 1;
  for (std::size_t i = 0; i < turns; ++i) {
    next_id += static_cast<TurnId>(below(3));
    lesson.turns.push_back({next_id++, chance(40) ? "Teacher" : "Student " + std::to_string(below(5)), words(12)});
  }
  return lesson;
}

namespace {

ExampleItem example(ExampleKind kind, TurnId id, std::string text, CodeSet codes) {
  ExampleItem item;
  item.kind = kind;
  item.focus_turn = {id, "Student", std::move(text)};
  item.gold_codes = std::move(codes);
  return item;
}

}  // namespace

ExampleSet quota_examples(std::size_t core, std::size_t ambiguous, std::size_t multi, std::size_t edge) {
  const auto ids = builtin_cdas().substantive_ids();
  ExampleSet set;
  TurnId id = 1;
  for (std::size_t i = 0; i < core; ++i) {
    const auto& code = ids[i % ids.size()];
    set.items.push_back(example(ExampleKind::core, id++, "Core example for " + code + ".", {code}));
  }
  for (std::size_t i = 0; i < ambiguous; ++i) {
    auto item = example(ExampleKind::ambiguous, id++, "Yes, and it got bigger.", {"EL"});
    item.rationale = "Agreement words introduce new content, so the turn is elaboration.";
    set.items.push_back(std::move(item));
  }
  for (std::size_t i = 0; i < multi; ++i) {
    set.items.push_back(
        example(ExampleKind::multi_utterance, id++, "I agree. It sank because it is heavy. Who is next?", {"A", "OI", "RE"}));
  }
  for (std::size_t i = 0; i < edge; ++i) {
    set.items.push_back(example(ExampleKind::edge, id++, "Good afternoon.", {std::string(kUncoded)}));
  }
  return set;
}

InstructionConfig fixture_config() {
  auto config = default_cdas_config();
  config.examples = quota_examples(13, 7, 5, 5);
  return config;
}

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.status = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace dialogcode::testing
