#include "dialogcode/keyword_coder.hpp"

#include <gtest/gtest.h>

#include "dialogcode/coder.hpp"
#include "dialogcode/error.hpp"
#include "dialogcode/response.hpp"
#include "support/fixtures.hpp"

namespace dialogcode {
namespace {

CodeSet code(std::string text) {
  static const auto rules = default_keyword_rules(builtin_cdas());
  return keyword_code_turn({1, "S", std::move(text)}, rules);
}

TEST(KeywordCoder, ReferenceTurns) {
  EXPECT_EQ(code("I think it is bigger because it has more sides."), CodeSet{"RE"});
  EXPECT_EQ(code("Why?"), CodeSet{"IRE"});
  EXPECT_EQ(code("Good afternoon."), CodeSet{"UC"});
}

TEST(KeywordCoder, Rules) {
  EXPECT_EQ(code("What if it rains"), CodeSet{"IRE"});
  EXPECT_EQ(code("Yes, I agree."), CodeSet{"A"});
  EXPECT_EQ(code("I disagree, are you sure?"), (CodeSet{"Q", "OI"}));
  EXPECT_EQ(code("If it is warm then it melts."), CodeSet{"RE"});
  EXPECT_EQ(code("Then if we wait."), CodeSet{"UC"});
  EXPECT_EQ(code("Who wants to go next?"), CodeSet{"OI"});
  EXPECT_EQ(code("Why would it float?"), (CodeSet{"IRE", "RE"}));
  EXPECT_EQ(code("Yes because it sank so it is heavy"), (CodeSet{"A", "RE"}));
}

TEST(KeywordCoder, WholeWordsOnly) {
  EXPECT_EQ(code("Somewhy the yesterday soup."), CodeSet{"UC"});
  EXPECT_EQ(code("WHY"), CodeSet{"IRE"});
  EXPECT_EQ(code("Because"), CodeSet{"RE"});
}

TEST(KeywordCoder, CuesDescribeTriggers) {
  const auto m = keyword_match("Why? Because.", default_keyword_rules(builtin_cdas()));
  ASSERT_EQ(m.cues.size(), 2u);
  EXPECT_EQ(m.cues[0], "IRE <- 'why'");
  EXPECT_EQ(m.cues[1], "RE <- 'because'");
}

TEST(KeywordCoder, NeedsCdasIds) {
  const Codebook tiny("t", {{"X", "x", "d", {}, "", {}}, {"UC", "u", "d", {}, "", {}}});
  EXPECT_THROW(default_keyword_rules(tiny), ValidationError);
  EXPECT_THROW(make_backend("mock-keyword", tiny), ValidationError);
  EXPECT_THROW(make_backend("nope", builtin_cdas()), ValidationError);
}

TEST(KeywordBackend, AnswersProbesAndBatches) {
  auto backend = make_backend("mock-keyword", builtin_cdas());
  EXPECT_EQ(backend->id(), "mock-keyword");
  EXPECT_TRUE(backend->deterministic());
  std::vector<Message> history = {{Role::system, "doc"}};
  EXPECT_FALSE(backend->send(history).empty());
  history.push_back({Role::user, std::string(kMultiUtteranceProbe)});
  EXPECT_NE(backend->send(history).find("union"), std::string::npos);
  history.push_back({Role::user, stability_probe_text({3, "S", "x"}, {"RE"})});
  EXPECT_EQ(find_codes_line(backend->send(history), builtin_cdas()), std::nullopt);
}

TEST(ParseBatchRequest, ReadsTurnLines) {
  const Batch batch{"L", 1, {{4, "Teacher", "Why\tnow?"}, {9, "Student (B)", "a\\b"}}};
  const auto turns = parse_batch_request(render_batch_request(batch, true));
  EXPECT_EQ(turns, batch.turns);
}

// Mock backend output parses back to exactly the keyword coder's sets.
TEST(KeywordBackend, RoundTripProperty) {
  const auto cb = builtin_cdas();
  const auto rules = default_keyword_rules(cb);
  KeywordBackend backend(rules);
  testing::Gen gen(99);
  for (int t = 0; t < 300; ++t) {
    const auto lesson = gen.lesson("L", gen.between(1, 30));
    const Batch batch{"L", 1, lesson.turns};
    const bool self_check = gen.chance(50);
    const std::vector<Message> history = {{Role::system, "doc"}, {Role::user, render_batch_request(batch, self_check)}};
    const auto reply = backend.send(history);
    ParseOptions opts;
    opts.expect_self_check = self_check;
    const auto parsed = parse_agent_response(reply, batch.turns, cb, opts);
    EXPECT_TRUE(parsed.warnings.empty());
    ASSERT_EQ(parsed.codings.size(), batch.turns.size());
    for (std::size_t i = 0; i < batch.turns.size(); ++i) {
      EXPECT_EQ(parsed.codings[i].predicted, keyword_code_turn(batch.turns[i], rules));
    }
  }
}

}  // namespace
}  // namespace dialogcode
