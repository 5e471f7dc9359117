#include "dialogcode/coder.hpp"

#include <array>
#include <sstream>

#include "dialogcode/error.hpp"
#include "text_util.hpp"

namespace dialogcode {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::optional<Role> role_from_string(std::string_view s) {
  for (auto r : {Role::system, Role::user, Role::assistant}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::pending: return "pending";
    case RunStatus::running: return "running";
    case RunStatus::complete: return "complete";
    case RunStatus::failed: return "failed";
  }
  return "pending";
}

std::optional<RunStatus> run_status_from_string(std::string_view s) {
  for (auto r : {RunStatus::pending, RunStatus::running, RunStatus::complete, RunStatus::failed}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::string_view to_string(Purpose purpose) {
  switch (purpose) {
    case Purpose::instructions: return "instructions";
    case Purpose::rule_probe: return "rule_probe";
    case Purpose::batch_request: return "batch_request";
    case Purpose::stability_probe: return "stability_probe";
  }
  return "batch_request";
}

std::optional<Purpose> purpose_from_string(std::string_view s) {
  for (auto p : {Purpose::instructions, Purpose::rule_probe, Purpose::batch_request, Purpose::stability_probe}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

Session::Session(Backend& backend, std::size_t index, std::vector<LogEntry>& log)
    : backend_(backend), index_(index), log_(log) {}

void Session::open(std::string_view instructions, std::size_t batch) {
  Message msg{Role::system, std::string(instructions)};
  log_.push_back({index_, batch, Purpose::instructions, msg});
  history_.push_back(std::move(msg));
}

std::string Session::ask(std::string content, Purpose purpose, std::size_t batch) {
  Message msg{Role::user, std::move(content)};
  log_.push_back({index_, batch, purpose, msg});
  history_.push_back(std::move(msg));

  std::string reply;
  try {
    reply = backend_.send(history_);
  } catch (const BackendError&) {
    reply = backend_.send(history_);
  }
  Message answer{Role::assistant, reply};
  log_.push_back({index_, batch, purpose, answer});
  history_.push_back(std::move(answer));
  return reply;
}

std::span<const std::string_view> rule_probes() {
  static constexpr std::array<std::string_view, 3> kProbes = {
      kMultiUtteranceProbe,
      "Explain how you decide that a turn should be coded UC.",
      "Explain how you use the decision tree before assigning codes.",
  };
  return kProbes;
}

std::vector<VerificationExchange> verify_rules(Session& session, std::size_t batch) {
  std::vector<VerificationExchange> out;
  for (auto probe : rule_probes()) {
    auto answer = session.ask(std::string(probe), Purpose::rule_probe, batch);
    out.push_back({std::string(probe), std::move(answer)});
  }
  return out;
}

std::vector<VerificationExchange> verify_rules(const InstructionDocument& document, Backend& backend) {
  std::vector<LogEntry> log;
  Session session(backend, 1, log);
  session.open(document.text, 0);
  return verify_rules(session, 0);
}

std::string render_batch_request(const Batch& batch, bool self_check_suffix) {
  std::ostringstream out;
  for (const auto& turn : batch.turns) {
    out << "Turn " << turn.turn_id << " (" << text::escape_field(turn.speaker)
        << "): " << text::escape_field(turn.text) << "\n";
  }
  out << "\nCode each turn. Output for each: `Turn <id>` then `Codes: ...` then `Justification: ...`.";
  if (self_check_suffix) out << "\nEnd each turn block with the line: " << kSelfCheckLine;
  return out.str();
}

std::string stability_probe_text(const Turn& turn, const CodeSet& precedent) {
  std::ostringstream out;
  out << "Turn " << turn.turn_id << " (" << text::escape_field(turn.speaker) << "): " << text::escape_field(turn.text)
      << "\n";
  out << "A similar response was coded as [" << join_codes(precedent) << "]. Does this classification align?";
  return out.str();
}

ProbeResult stability_probe(Session& session, const Turn& turn, const CodeSet& precedent, TurnCoding& coding,
                            const Codebook& codebook, std::size_t batch) {
  ProbeResult result;
  result.question = stability_probe_text(turn, precedent);
  result.answer = session.ask(result.question, Purpose::stability_probe, batch);
  if (auto codes = find_codes_line(result.answer, codebook)) {
    const std::string uc(kUncoded);
    if (codes->empty()) codes->insert(uc);
    if (!uc_exclusive(*codes)) codes->erase(uc);
    coding.predicted = std::move(*codes);
    result.revised = true;
  }
  return result;
}

CodingRun code_lesson(const Lesson& lesson, const InstructionDocument& document, const Codebook& codebook,
                      Backend& backend, const SessionPolicy& policy, RunListener* listener, std::string run_id) {
  if (policy.batch_size == 0) throw ValidationError("invalid_batch_size", "batch size must be at least 1");
  if (document.token_budget != 0 && document.token_estimate > document.token_budget) {
    throw BudgetError(document.token_estimate, document.token_budget);
  }
  const auto batches = make_batches(lesson, policy.batch_size);

  CodingRun run;
  run.run_id = std::move(run_id);
  run.lesson_id = lesson.lesson_id;
  run.config_hash = document.config_hash;
  run.backend_id = backend.id();
  run.policy = policy;
  run.batch_count = batches.size();
  run.status = RunStatus::running;
  if (listener) listener->on_started(run);

  std::optional<Session> session;
  std::size_t sessions_opened = 0;

  for (const auto& batch : batches) {
    const auto mark = run.event_log.size();
    const auto entries_since_mark = [&run, mark] {
      return std::span<const LogEntry>(run.event_log).subspan(mark);
    };
    try {
      if (!session || policy.reset_between_batches) {
        session.emplace(backend, ++sessions_opened, run.event_log);
        session->open(document.text, batch.ordinal);
      }
      if (batch.ordinal == 1 && policy.verify_rules_first) verify_rules(*session, batch.ordinal);

      const auto reply =
          session->ask(render_batch_request(batch, policy.self_check_suffix), Purpose::batch_request, batch.ordinal);
      auto parsed = parse_agent_response(reply, batch.turns, codebook, {policy.self_check_suffix});

      if (policy.stability_probe) {
        for (std::size_t i = 0; i < parsed.codings.size(); ++i) {
          auto& coding = parsed.codings[i];
          // Previous codings: earlier turns of this batch, then the run so far.
          std::optional<CodeSet> precedent;
          std::size_t seen = 0;
          for (std::size_t j = i; j-- > 0 && seen < kPrecedentWindow; ++seen) {
            if (parsed.codings[j].predicted == coding.predicted) {
              precedent = parsed.codings[j].predicted;
              break;
            }
          }
          for (std::size_t j = run.codings.size(); !precedent && j-- > 0 && seen < kPrecedentWindow; ++seen) {
            if (run.codings[j].predicted == coding.predicted) precedent = run.codings[j].predicted;
          }
          if (precedent) stability_probe(*session, batch.turns[i], *precedent, coding, codebook, batch.ordinal);
        }
      }

      if (listener) listener->on_batch_sent(batch.ordinal, entries_since_mark());
      for (auto& w : parsed.warnings) run.warnings.push_back("batch " + std::to_string(batch.ordinal) + ": " + w);
      run.codings.insert(run.codings.end(), parsed.codings.begin(), parsed.codings.end());
      ++run.batches_done;
      if (listener) listener->on_batch_parsed(batch.ordinal, parsed.codings, parsed.warnings);
    } catch (const Error& e) {
      if (listener) listener->on_batch_sent(batch.ordinal, entries_since_mark());
      run.status = RunStatus::failed;
      run.failed_batch = batch.ordinal;
      run.failure = e.what();
      if (listener) listener->on_failed(run);
      return run;
    }
  }

  run.status = RunStatus::complete;
  if (listener) listener->on_completed(run);
  return run;
}

InstructionConfig inject_feedback(const InstructionConfig& config, std::span<const FeedbackItem> feedback,
                                  const Lesson& lesson, const TokenEstimator& estimator) {
  InstructionConfig out = config;
  if (feedback.empty()) return out;

  for (const auto& item : feedback) {
    const auto* turn = lesson.find_turn(item.turn_id);
    if (!turn) {
      throw ValidationError("unknown_turn", "turn " + std::to_string(item.turn_id) + " is not in lesson '" +
                                                lesson.lesson_id + "'");
    }
    if (item.adjudicated_codes.empty() || !uc_exclusive(item.adjudicated_codes)) {
      throw ValidationError("invalid_adjudication",
                            "turn " + std::to_string(item.turn_id) + ": adjudicated codes must be nonempty and "
                                                                      "UC-exclusive");
    }
    for (const auto& code : item.adjudicated_codes) {
      if (!config.codebook.contains(code)) {
        throw ValidationError("unknown_code", "turn " + std::to_string(item.turn_id) + ": unknown code '" + code + "'");
      }
    }
    ExampleItem example;
    example.kind = ExampleKind::ambiguous;
    example.focus_turn = *turn;
    example.gold_codes = item.adjudicated_codes;
    if (!item.note.empty()) example.rationale = item.note;
    example.adjudicated = true;
    out.examples.items.push_back(std::move(example));
  }
  compile_instructions(out, estimator);
  return out;
}

}  // namespace dialogcode
