#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dialogcode/codebook.hpp"
#include "dialogcode/instruction.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path fixture_path(const std::string& name);

// Seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t next() { return rng_(); }
  std::size_t below(std::size_t n);
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  bool chance(unsigned percent) { return below(100) < percent; }

  // Nonempty, UC-exclusive set over the codebook's ids.
  CodeSet code_set(const Codebook& codebook, std::size_t max_size = 3);
  // Printable ASCII plus tabs, newlines, backslashes and some multibyte text.
  std::string text(std::size_t max_len);
  // One-line text without leading/trailing whitespace; never empty.
  std::string words(std::size_t max_words);
  Lesson lesson(const std::string& id, std::size_t turns);

 private:
  std::mt19937_64 rng_;
};

// Curated example set: `core` core items (one per substantive code first),
// plus ambiguous, multi-utterance and edge items.
ExampleSet quota_examples(std::size_t core, std::size_t ambiguous, std::size_t multi, std::size_t edge);

// Default CDAS config with a quota-satisfying example set.
InstructionConfig fixture_config();

struct CliResult {
  int status = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args);

}  // namespace dialogcode::testing
