#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/backend.hpp"
#include "dialogcode/codebook.hpp"
#include "dialogcode/instruction.hpp"
#include "dialogcode/response.hpp"
#include "dialogcode/transcript.hpp"

namespace dialogcode {

struct SessionPolicy {
  std::size_t batch_size = kDefaultBatchSize;
  bool reset_between_batches = true;
  bool verify_rules_first = true;
  bool stability_probe = false;
  bool self_check_suffix = true;

  bool operator==(const SessionPolicy&) const = default;
};

enum class RunStatus { pending, running, complete, failed };

std::string_view to_string(RunStatus status);
std::optional<RunStatus> run_status_from_string(std::string_view s);

// Why a message was exchanged.
enum class Purpose { instructions, rule_probe, batch_request, stability_probe };

std::string_view to_string(Purpose purpose);
std::optional<Purpose> purpose_from_string(std::string_view s);

// One message of a session transcript. System and user messages are sent,
// assistant messages are received.
struct LogEntry {
  std::size_t session = 0;  // 1-based
  std::size_t batch = 0;    // ordinal of the batch being coded, 1-based
  Purpose purpose = Purpose::batch_request;
  Message message;

  bool operator==(const LogEntry&) const = default;
};

struct CodingRun {
  std::string run_id;
  std::string lesson_id;
  std::string config_hash;
  std::string backend_id;
  SessionPolicy policy;
  std::vector<TurnCoding> codings;
  RunStatus status = RunStatus::pending;
  std::vector<LogEntry> event_log;
  std::size_t batch_count = 0;
  std::size_t batches_done = 0;
  std::optional<std::size_t> failed_batch;
  std::string failure;
  std::vector<std::string> warnings;

  bool operator==(const CodingRun&) const = default;
};

// Callbacks fired while a run progresses; the persistence layer turns them
// into events.
class RunListener {
 public:
  virtual ~RunListener() = default;
  virtual void on_started(const CodingRun& run) = 0;
  // Every message exchanged for the batch, including probes.
  virtual void on_batch_sent(std::size_t ordinal, std::span<const LogEntry> entries) = 0;
  virtual void on_batch_parsed(std::size_t ordinal, std::span<const TurnCoding> codings,
                               std::span<const std::string> warnings) = 0;
  virtual void on_completed(const CodingRun& run) = 0;
  virtual void on_failed(const CodingRun& run) = 0;
};

// Ordered single-consumer conversation with a backend.
class Session {
 public:
  Session(Backend& backend, std::size_t index, std::vector<LogEntry>& log);

  std::size_t index() const noexcept { return index_; }
  std::span<const Message> history() const noexcept { return history_; }

  // Sends the instruction document in system position. No reply is requested.
  void open(std::string_view instructions, std::size_t batch);
  // Appends `content` as a user message and returns the reply. One retry on
  // transport failure; a second failure propagates as BackendError.
  std::string ask(std::string content, Purpose purpose, std::size_t batch);

 private:
  Backend& backend_;
  std::size_t index_;
  std::vector<LogEntry>& log_;
  std::vector<Message> history_;
};

inline constexpr std::string_view kMultiUtteranceProbe =
    "Before coding, explain your understanding of coding multi-utterance dialogue.";

// The fixed probe set sent by verify_rules, in order.
std::span<const std::string_view> rule_probes();

struct VerificationExchange {
  std::string question;
  std::string answer;
};

// Opens a session with the document and records the agent's answers to the
// rule probes for human review.
std::vector<VerificationExchange> verify_rules(const InstructionDocument& document, Backend& backend);
// Same, inside an already opened session.
std::vector<VerificationExchange> verify_rules(Session& session, std::size_t batch);

// User message listing a batch: `Turn <id> (<speaker>): <text>` lines and the
// fixed output instruction.
std::string render_batch_request(const Batch& batch, bool self_check_suffix);

std::string stability_probe_text(const Turn& turn, const CodeSet& precedent);

struct ProbeResult {
  std::string question;
  std::string answer;
  bool revised = false;
};

// Asks whether `coding` agrees with a similar precedent; replaces the coding's
// predicted set only when the answer carries a `Codes:` line.
ProbeResult stability_probe(Session& session, const Turn& turn, const CodeSet& precedent, TurnCoding& coding,
                            const Codebook& codebook, std::size_t batch);

// Window of previous codings searched for a stability precedent.
inline constexpr std::size_t kPrecedentWindow = 5;

// Codes `lesson` batch by batch. Never throws for backend or parse failures:
// those mark the run failed with the batch ordinal. Over-budget documents and
// invalid policies throw ValidationError before anything is sent.
CodingRun code_lesson(const Lesson& lesson, const InstructionDocument& document, const Codebook& codebook,
                      Backend& backend, const SessionPolicy& policy, RunListener* listener = nullptr,
                      std::string run_id = {});

struct FeedbackItem {
  TurnId turn_id = 0;
  CodeSet agent_codes;
  CodeSet adjudicated_codes;
  std::string note;

  bool operator==(const FeedbackItem&) const = default;
};

// Adds one adjudicated ambiguous example per feedback item and checks that the
// result still compiles within budget. The input config is not modified.
InstructionConfig inject_feedback(const InstructionConfig& config, std::span<const FeedbackItem> feedback,
                                  const Lesson& lesson, const TokenEstimator& estimator = estimate_tokens);

}  // namespace dialogcode
