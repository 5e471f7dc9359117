#include "dialogcode/coder.hpp"

#include <gtest/gtest.h>

#include <functional>

#include "dialogcode/error.hpp"
#include "dialogcode/keyword_coder.hpp"
#include "support/fixtures.hpp"

namespace dialogcode {
namespace {

// Wraps the keyword mock; records every history it receives and lets a test
// override individual replies.
class ScriptedBackend final : public Backend {
 public:
  using Hook = std::function<std::optional<std::string>(std::span<const Message>, std::size_t call)>;

  explicit ScriptedBackend(Hook hook = {}) : mock_(default_keyword_rules(builtin_cdas())), hook_(std::move(hook)) {}

  std::string id() const override { return "scripted"; }
  bool deterministic() const override { return true; }
  std::string send(std::span<const Message> messages) override {
    histories.emplace_back(messages.begin(), messages.end());
    const auto call = histories.size();
    if (hook_) {
      if (auto reply = hook_(messages, call)) return *reply;
    }
    return mock_.send(messages);
  }

  std::vector<std::vector<Message>> histories;

 private:
  KeywordBackend mock_;
  Hook hook_;
};

bool requests_batch(std::span<const Message> messages, std::size_t ordinal, std::size_t batch_size,
                    const Lesson& lesson) {
  const auto& last = messages.back().content;
  const auto first = lesson.turns[(ordinal - 1) * batch_size].turn_id;
  return last.rfind("Turn " + std::to_string(first) + " (", 0) == 0;
}

class RecordingListener final : public RunListener {
 public:
  void on_started(const CodingRun&) override { events.push_back("started"); }
  void on_batch_sent(std::size_t n, std::span<const LogEntry> e) override {
    events.push_back("sent " + std::to_string(n) + " x" + std::to_string(e.size()));
  }
  void on_batch_parsed(std::size_t n, std::span<const TurnCoding> c, std::span<const std::string>) override {
    events.push_back("parsed " + std::to_string(n) + " x" + std::to_string(c.size()));
  }
  void on_completed(const CodingRun&) override { events.push_back("completed"); }
  void on_failed(const CodingRun& run) override { events.push_back("failed " + std::to_string(*run.failed_batch)); }

  std::vector<std::string> events;
};

struct Fixture {
  Lesson lesson;
  InstructionConfig config = testing::fixture_config();
  InstructionDocument document = compile_instructions(config);
  Codebook codebook = builtin_cdas();
};

Fixture make(std::size_t turns, std::uint64_t seed = 1) {
  Fixture f;
  testing::Gen gen(seed);
  f.lesson = gen.lesson("L", turns);
  return f;
}

std::size_t count(const CodingRun& run, Purpose purpose, Role role) {
  std::size_t n = 0;
  for (const auto& e : run.event_log) n += e.purpose == purpose && e.message.role == role;
  return n;
}

TEST(CodeLesson, LargeLessonUsesOneSessionPerBatch) {
  auto f = make(1386);
  ScriptedBackend backend;
  SessionPolicy policy;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy, nullptr, "r");
  EXPECT_EQ(run.status, RunStatus::complete);
  EXPECT_EQ(run.batch_count, 70u);
  EXPECT_EQ(run.batches_done, 70u);
  EXPECT_EQ(run.codings.size(), 1386u);
  EXPECT_EQ(count(run, Purpose::instructions, Role::system), 70u);
  EXPECT_EQ(run.event_log.back().session, 70u);
  EXPECT_EQ(run.run_id, "r");
  EXPECT_EQ(run.config_hash, f.document.config_hash);
  for (std::size_t i = 0; i < run.codings.size(); ++i) EXPECT_EQ(run.codings[i].turn_id, f.lesson.turns[i].turn_id);
}

TEST(CodeLesson, SessionsAreIsolatedWhenResetting) {
  auto f = make(60);
  ScriptedBackend backend;
  SessionPolicy policy;
  policy.verify_rules_first = false;
  code_lesson(f.lesson, f.document, f.codebook, backend, policy);
  ASSERT_EQ(backend.histories.size(), 3u);
  for (const auto& h : backend.histories) {
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h[0].role, Role::system);
    EXPECT_EQ(h[0].content, f.document.text);
    EXPECT_EQ(h[1].role, Role::user);
  }
}

TEST(CodeLesson, SingleSessionWithoutReset) {
  auto f = make(60);
  ScriptedBackend backend;
  SessionPolicy policy;
  policy.verify_rules_first = false;
  policy.reset_between_batches = false;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy);
  ASSERT_EQ(backend.histories.size(), 3u);
  EXPECT_EQ(backend.histories[2].size(), 6u);
  EXPECT_EQ(count(run, Purpose::instructions, Role::system), 1u);
  EXPECT_EQ(run.event_log.back().session, 1u);
}

TEST(CodeLesson, FailureStopsAtBatch) {
  auto f = make(100);
  ScriptedBackend backend([&](std::span<const Message> m, std::size_t) -> std::optional<std::string> {
    if (requests_batch(m, 3, 20, f.lesson)) throw BackendError("connection reset");
    return std::nullopt;
  });
  SessionPolicy policy;
  RecordingListener listener;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy, &listener);
  EXPECT_EQ(run.status, RunStatus::failed);
  EXPECT_EQ(run.failed_batch, 3u);
  EXPECT_EQ(run.batches_done, 2u);
  EXPECT_EQ(run.codings.size(), 40u);
  EXPECT_NE(run.failure.find("connection reset"), std::string::npos);
  EXPECT_EQ(listener.events.back(), "failed 3");
  EXPECT_EQ(listener.events[listener.events.size() - 2].substr(0, 6), "sent 3");
}

TEST(CodeLesson, RetriesOnceOnTransportError) {
  auto f = make(40);
  std::size_t failures = 0;
  ScriptedBackend backend([&](std::span<const Message> m, std::size_t) -> std::optional<std::string> {
    if (requests_batch(m, 2, 20, f.lesson) && failures++ == 0) throw BackendError("timeout");
    return std::nullopt;
  });
  SessionPolicy policy;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy);
  EXPECT_EQ(run.status, RunStatus::complete);
  EXPECT_EQ(failures, 2u);
}

TEST(CodeLesson, UnparseableReplyFailsRun) {
  auto f = make(30);
  ScriptedBackend backend([&](std::span<const Message> m, std::size_t) -> std::optional<std::string> {
    if (requests_batch(m, 2, 20, f.lesson)) return "Turn 1\nCodes: XY\n";
    return std::nullopt;
  });
  SessionPolicy policy;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy);
  EXPECT_EQ(run.status, RunStatus::failed);
  EXPECT_EQ(run.failed_batch, 2u);
}

TEST(CodeLesson, ListenerSeesEveryBatch) {
  auto f = make(45);
  ScriptedBackend backend;
  SessionPolicy policy;
  policy.verify_rules_first = false;
  RecordingListener listener;
  code_lesson(f.lesson, f.document, f.codebook, backend, policy, &listener);
  EXPECT_EQ(listener.events, (std::vector<std::string>{"started", "sent 1 x3", "parsed 1 x20", "sent 2 x3",
                                                      "parsed 2 x20", "sent 3 x3", "parsed 3 x5", "completed"}));
}

TEST(CodeLesson, RuleProbesFirstSessionOnly) {
  auto f = make(50);
  ScriptedBackend backend;
  SessionPolicy policy;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy);
  ASSERT_GE(run.event_log.size(), 2u);
  EXPECT_EQ(run.event_log[0].purpose, Purpose::instructions);
  EXPECT_EQ(run.event_log[1].purpose, Purpose::rule_probe);
  EXPECT_EQ(run.event_log[1].message.content, kMultiUtteranceProbe);
  EXPECT_EQ(count(run, Purpose::rule_probe, Role::user), rule_probes().size());
  for (const auto& e : run.event_log) {
    if (e.purpose == Purpose::rule_probe) {
      EXPECT_EQ(e.session, 1u);
    }
  }
  // Answers recorded verbatim.
  KeywordBackend mock(default_keyword_rules(builtin_cdas()));
  std::vector<Message> probe = {{Role::system, f.document.text}, {Role::user, std::string(kMultiUtteranceProbe)}};
  EXPECT_EQ(run.event_log[2].message.content, mock.send(probe));

  policy.verify_rules_first = false;
  EXPECT_EQ(count(code_lesson(f.lesson, f.document, f.codebook, backend, policy), Purpose::rule_probe, Role::user), 0u);
}

TEST(VerifyRules, StandaloneRecordsAnswers) {
  auto f = make(1);
  ScriptedBackend backend([](std::span<const Message> m, std::size_t) -> std::optional<std::string> {
    return "echo: " + m.back().content;
  });
  const auto exchanges = verify_rules(f.document, backend);
  ASSERT_EQ(exchanges.size(), rule_probes().size());
  EXPECT_EQ(exchanges[0].question, kMultiUtteranceProbe);
  EXPECT_EQ(exchanges[0].answer, "echo: " + std::string(kMultiUtteranceProbe));
}

TEST(CodeLesson, ValidatesBeforeSending) {
  auto f = make(10);
  ScriptedBackend backend;
  SessionPolicy policy;
  policy.batch_size = 0;
  EXPECT_THROW(code_lesson(f.lesson, f.document, f.codebook, backend, policy), ValidationError);
  policy.batch_size = 20;
  auto doc = f.document;
  doc.token_budget = doc.token_estimate - 1;
  EXPECT_THROW(code_lesson(f.lesson, doc, f.codebook, backend, policy), BudgetError);
  EXPECT_TRUE(backend.histories.empty());
}

TEST(StabilityProbe, TextNamesPrecedent) {
  const auto text = stability_probe_text({5, "S", "So it floats."}, {"RE"});
  EXPECT_NE(text.find("A similar response was coded as [RE]. Does this classification align?"), std::string::npos);
}

TEST(StabilityProbe, RevisesOnlyWithCodesLine) {
  std::vector<LogEntry> log;
  ScriptedBackend agree([](std::span<const Message>, std::size_t) -> std::optional<std::string> { return "It aligns."; });
  Session s1(agree, 1, log);
  TurnCoding coding{5, {"RE"}, "", {}};
  auto r = stability_probe(s1, {5, "S", "x"}, {"RE"}, coding, builtin_cdas(), 1);
  EXPECT_FALSE(r.revised);
  EXPECT_EQ(coding.predicted, CodeSet{"RE"});

  ScriptedBackend revise(
      [](std::span<const Message>, std::size_t) -> std::optional<std::string> { return "On reflection\nCodes: RE, A"; });
  Session s2(revise, 1, log);
  r = stability_probe(s2, {5, "S", "x"}, {"RE"}, coding, builtin_cdas(), 1);
  EXPECT_TRUE(r.revised);
  EXPECT_EQ(coding.predicted, (CodeSet{"A", "RE"}));
}

TEST(CodeLesson, StabilityProbeOnlyWhenEnabled) {
  auto f = make(40);
  ScriptedBackend backend;
  SessionPolicy policy;
  EXPECT_EQ(count(code_lesson(f.lesson, f.document, f.codebook, backend, policy), Purpose::stability_probe, Role::user),
            0u);
  policy.stability_probe = true;
  const auto run = code_lesson(f.lesson, f.document, f.codebook, backend, policy);
  EXPECT_GT(count(run, Purpose::stability_probe, Role::user), 0u);
  EXPECT_EQ(run.status, RunStatus::complete);
  // The mock agrees without a Codes line, so codings are unchanged.
  policy.stability_probe = false;
  EXPECT_EQ(code_lesson(f.lesson, f.document, f.codebook, backend, policy).codings, run.codings);
}

TEST(InjectFeedback, AddsAdjudicatedExample) {
  auto f = make(20);
  const std::vector<FeedbackItem> items = {{f.lesson.turns[11].turn_id, {"A"}, {"EL"}, "adds content"}};
  const auto out = inject_feedback(f.config, items, f.lesson);
  ASSERT_EQ(out.examples.items.size(), f.config.examples.items.size() + 1);
  const auto& added = out.examples.items.back();
  EXPECT_EQ(added.kind, ExampleKind::ambiguous);
  EXPECT_TRUE(added.adjudicated);
  EXPECT_EQ(added.focus_turn, f.lesson.turns[11]);
  EXPECT_EQ(added.gold_codes, CodeSet{"EL"});
  EXPECT_EQ(added.rationale, "adds content");
  EXPECT_NE(config_hash(out), config_hash(f.config));
  EXPECT_EQ(f.config, testing::fixture_config());
}

TEST(InjectFeedback, EmptyIsIdentity) {
  auto f = make(5);
  const auto out = inject_feedback(f.config, {}, f.lesson);
  EXPECT_EQ(out, f.config);
  EXPECT_EQ(config_hash(out), config_hash(f.config));
}

TEST(InjectFeedback, Errors) {
  auto f = make(600);
  std::vector<FeedbackItem> many;
  for (std::size_t i = 0; i < 500; ++i) many.push_back({f.lesson.turns[i].turn_id, {"A"}, {"EL"}, "note"});
  EXPECT_THROW(inject_feedback(f.config, many, f.lesson), BudgetError);

  const std::vector<FeedbackItem> unknown = {{999999, {"A"}, {"EL"}, ""}};
  try {
    inject_feedback(f.config, unknown, f.lesson);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.kind(), "unknown_turn");
  }
  const std::vector<FeedbackItem> bad = {{f.lesson.turns[0].turn_id, {"A"}, {"UC", "EL"}, ""}};
  EXPECT_THROW(inject_feedback(f.config, bad, f.lesson), ValidationError);
}

}  // namespace
}  // namespace dialogcode
