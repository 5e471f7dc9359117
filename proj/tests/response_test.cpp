#include "dialogcode/response.hpp"

#include <gtest/gtest.h>

#include "dialogcode/error.hpp"
#include "support/fixtures.hpp"

namespace dialogcode {
namespace {

std::string error_of(std::string_view response, const std::vector<Turn>& turns) {
  try {
    parse_agent_response(response, turns, builtin_cdas());
  } catch (const ValidationError& e) {
    return e.kind() + ": " + e.what();
  }
  return "none";
}

TEST(ParseResponse, MultiUtteranceBlockWithAnalysis) {
  const std::vector<Turn> turns = {{241, "Teacher", "Right. Now subtract. Who is next?"}};
  const std::string reply =
      "Turn 241 – Teacher\n"
      "\n"
      "Transcript:\n"
      "\"Right. Now subtract. Who is next?\"\n"
      "\n"
      "Analysis:\n"
      "1. **Agreement:** confirms the answer.\n"
      "2. **Elaboration:** adds the next step.\n"
      "\n"
      "Codes: A, EL, OI\n"
      "\n"
      "- **A** – agreement.\n"
      "- **OI** – invites another pupil.\n";
  const auto parsed = parse_agent_response(reply, turns, builtin_cdas());
  ASSERT_EQ(parsed.codings.size(), 1u);
  EXPECT_EQ(parsed.codings[0].turn_id, 241);
  EXPECT_EQ(parsed.codings[0].predicted, (CodeSet{"A", "EL", "OI"}));
  EXPECT_EQ(parsed.codings[0].raw_span.begin, 0u);
  EXPECT_EQ(parsed.codings[0].raw_span.end, reply.size());
}

TEST(ParseResponse, EmphasisStripped) {
  const std::vector<Turn> turns = {{5, "S", "It sank because it is heavy."}};
  const auto parsed = parse_agent_response("**Turn 5**\n**Codes: RE**\n_Justification:_ uses because\n", turns,
                                           builtin_cdas());
  EXPECT_EQ(parsed.codings[0].predicted, CodeSet{"RE"});
  EXPECT_EQ(parsed.codings[0].justification, "uses because");
}

TEST(ParseResponse, CaseInsensitiveAliasesAndLastCodesLine) {
  const std::vector<Turn> turns = {{1, "T", "a"}, {2, "S", "b"}};
  const auto parsed = parse_agent_response(
      "turn 1\ncodes: ire\nCODES: rei, ci\nTurn 2 (Student)\nCodes: [a]; q.\n", turns, builtin_cdas());
  EXPECT_EQ(parsed.codings[0].predicted, (CodeSet{"IC", "IRE"}));
  EXPECT_EQ(parsed.codings[1].predicted, (CodeSet{"A", "Q"}));
}

TEST(ParseResponse, BatchOrderNotResponseOrder) {
  const std::vector<Turn> turns = {{1, "T", "a"}, {2, "S", "b"}};
  const auto parsed = parse_agent_response("Turn 2\nCodes: A\nTurn 1\nCodes: RE\n", turns, builtin_cdas());
  EXPECT_EQ(parsed.codings[0].turn_id, 1);
  EXPECT_EQ(parsed.codings[1].turn_id, 2);
  EXPECT_EQ(parsed.codings[1].predicted, CodeSet{"A"});
}

TEST(ParseResponse, ErrorsNameTheTurn) {
  const std::vector<Turn> turns = {{7, "T", "a"}, {8, "S", "b"}};
  auto err = error_of("Turn 7\nCodes: XY\nTurn 8\nCodes: A\n", turns);
  EXPECT_EQ(err.substr(0, 13), "unknown_label");
  EXPECT_NE(err.find("turn 7"), std::string::npos);
  EXPECT_NE(err.find("XY"), std::string::npos);

  err = error_of("Turn 7\nCodes: A\n", turns);
  EXPECT_EQ(err.substr(0, 13), "missing_block");
  EXPECT_NE(err.find("turn 8"), std::string::npos);

  err = error_of("Turn 7\nCodes: A\nTurn 8\nCodes: A\nTurn 7\nCodes: RE\n", turns);
  EXPECT_EQ(err.substr(0, 15), "duplicate_block");
  EXPECT_NE(err.find("turn 7"), std::string::npos);
}

TEST(ParseResponse, NormalisesUncoded) {
  const std::vector<Turn> turns = {{1, "T", "a"}, {2, "S", "b"}, {3, "S", "c"}};
  const auto parsed =
      parse_agent_response("Turn 1\nCodes:\nTurn 2\nCodes: UC, RE\nTurn 3\nJustification: none\n", turns, builtin_cdas());
  EXPECT_EQ(parsed.codings[0].predicted, CodeSet{"UC"});
  EXPECT_EQ(parsed.codings[1].predicted, CodeSet{"RE"});
  EXPECT_EQ(parsed.codings[2].predicted, CodeSet{"UC"});
  EXPECT_EQ(parsed.warnings.size(), 3u);
}

TEST(ParseResponse, IgnoresForeignBlocksAndTurnWords) {
  const std::vector<Turn> turns = {{3, "T", "a"}};
  const auto parsed = parse_agent_response(
      "Turn 99\nCodes: A\nTurn 3\nTurn taking is fine here.\nTurn 3 (T): a\nCodes: Q\n", turns, builtin_cdas());
  EXPECT_EQ(parsed.codings[0].predicted, CodeSet{"Q"});
  ASSERT_EQ(parsed.warnings.size(), 1u);
  EXPECT_NE(parsed.warnings[0].find("99"), std::string::npos);
}

TEST(ParseResponse, SelfCheckWarning) {
  const std::vector<Turn> turns = {{1, "T", "a"}};
  ParseOptions opts;
  opts.expect_self_check = true;
  EXPECT_EQ(parse_agent_response("Turn 1\nCodes: A\n", turns, builtin_cdas(), opts).warnings.size(), 1u);
  EXPECT_TRUE(parse_agent_response("Turn 1\nCodes: A\nCoding confirmed using decision tree.\n", turns, builtin_cdas(), opts)
                  .warnings.empty());
}

TEST(FindCodesLine, LastLineWins) {
  EXPECT_EQ(find_codes_line("Yes it aligns.", builtin_cdas()), std::nullopt);
  EXPECT_EQ(find_codes_line("Codes: A\nOn reflection:\nCodes: EL", builtin_cdas()), CodeSet{"EL"});
}

TEST(RenderResponse, Shape) {
  const std::vector<Turn> turns = {{4, "Student  A", "x"}};
  const std::vector<TurnCoding> codings = {{4, {"EL", "A"}, "adds\nmore", {}}};
  EXPECT_EQ(render_agent_response(codings, turns),
            "Turn 4 – Student A\nCodes: A, EL\nJustification: adds more\nCoding confirmed using decision tree.\n");
}

// Rendering then parsing reproduces codes and justification for any input.
TEST(RenderResponse, RoundTripProperty) {
  const auto cb = builtin_cdas();
  testing::Gen gen(17);
  for (int t = 0; t < 500; ++t) {
    const auto lesson = gen.lesson("L", gen.between(1, 25));
    std::vector<TurnCoding> codings;
    for (const auto& turn : lesson.turns) {
      codings.push_back({turn.turn_id, gen.code_set(cb), gen.chance(20) ? "" : gen.words(15), {}});
    }
    const bool self_check = gen.chance(50);
    const auto text = render_agent_response(codings, lesson.turns, self_check);
    ParseOptions opts;
    opts.expect_self_check = self_check;
    const auto parsed = parse_agent_response(text, lesson.turns, cb, opts);
    ASSERT_EQ(parsed.codings.size(), codings.size());
    EXPECT_TRUE(parsed.warnings.empty());
    std::size_t end = 0;
    for (std::size_t i = 0; i < codings.size(); ++i) {
      EXPECT_EQ(parsed.codings[i].turn_id, codings[i].turn_id);
      EXPECT_EQ(parsed.codings[i].predicted, codings[i].predicted);
      EXPECT_EQ(parsed.codings[i].justification, codings[i].justification);
      EXPECT_EQ(parsed.codings[i].raw_span.begin, end);
      end = parsed.codings[i].raw_span.end;
    }
    EXPECT_EQ(end, text.size());
  }
}

}  // namespace
}  // namespace dialogcode
