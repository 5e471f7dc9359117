#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/coder.hpp"
#include "dialogcode/experiment.hpp"
#include "dialogcode/json_io.hpp"

namespace dialogcode {

// Whole-file helpers. Failures throw StoreError("io_error").
std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

namespace event_kind {
inline constexpr std::string_view config_saved = "config_saved";
inline constexpr std::string_view run_started = "run_started";
inline constexpr std::string_view batch_sent = "batch_sent";
inline constexpr std::string_view batch_parsed = "batch_parsed";
inline constexpr std::string_view run_completed = "run_completed";
inline constexpr std::string_view run_failed = "run_failed";
inline constexpr std::string_view adjudication = "adjudication";
inline constexpr std::string_view feedback_compiled = "feedback_compiled";
}  // namespace event_kind

struct RunEvent {
  std::string timestamp;  // ISO-8601 UTC with microseconds
  std::string kind;
  Json payload;

  bool operator==(const RunEvent&) const = default;
};

Json event_to_json(const RunEvent& event);

struct LoadedEvents {
  std::vector<RunEvent> events;
  std::vector<std::string> warnings;
};

// Reads an NDJSON event log. A truncated final line is dropped with a
// warning; any other malformed line, an unknown kind or a timestamp that
// does not increase throws StoreError("corrupt_store") naming file and line.
LoadedEvents read_events(const std::filesystem::path& file);

// Appends one event as a single write to an O_APPEND descriptor and returns
// the byte offset at which the line starts.
std::size_t append_event(const std::filesystem::path& file, const RunEvent& event);

struct Adjudication {
  TurnId turn_id = 0;
  CodeSet codes;
  std::string note;
  std::string timestamp;

  bool operator==(const Adjudication&) const = default;
};

// Everything an event log says about a run.
struct RunState {
  CodingRun run;
  std::vector<Adjudication> adjudications;  // in log order
  std::vector<LineageEntry> lineage;
  // Index into `adjudications` of the first one not yet compiled.
  std::size_t compiled_upto = 0;

  // Latest adjudication per turn.
  std::map<TurnId, Adjudication> latest_adjudications() const;
  // Latest adjudication per turn among those recorded after the last
  // feedback compilation.
  std::vector<Adjudication> pending_adjudications() const;
};

// Folds events into state. Throws StoreError("corrupt_store") on an event
// sequence that cannot occur (e.g. batch events before run_started).
RunState replay_events(std::span<const RunEvent> events);

struct LessonSummary {
  std::string lesson_id;
  std::string subject;
  std::size_t turn_count = 0;
};

// File-backed store rooted at a data directory:
//   configs/<hash>.json, lessons/<id>.tsv (+ .gold.tsv),
//   runs/<run_id>/events.ndjson + report.json (+ metrics.json),
//   experiments/<id>.json (+ experiments/<id>/<condition>/...).
// Construction takes the directory lock (`.lock`, holding the owner pid);
// a lock left by a dead process is taken over.
class Store {
 public:
  explicit Store(std::filesystem::path root);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::filesystem::path& root() const noexcept { return root_; }

  // Re-reads every config and event log. Throws StoreError("corrupt_store")
  // naming the first bad file. Returns recovery warnings.
  std::vector<std::string> verify() const;

  // Idempotent; returns the config hash.
  std::string save_config(const InstructionConfig& config);
  // NotFoundError unknown_config; StoreError corrupt_store on hash mismatch.
  InstructionConfig load_config(const std::string& hash) const;
  std::vector<std::string> config_hashes() const;

  // Copies a lesson (and optionally its gold) into the store. An existing
  // file with different content is never overwritten (ValidationError
  // lesson_conflict / gold_conflict).
  void put_lesson(const Lesson& lesson);
  void put_gold(const GoldAnnotationSet& gold);
  std::vector<LessonSummary> lessons() const;
  // NotFoundError unknown_lesson.
  Lesson load_lesson(const std::string& lesson_id) const;
  std::optional<GoldAnnotationSet> load_gold(const std::string& lesson_id, const Codebook& codebook) const;

  std::string new_run_id();
  std::vector<std::string> run_ids() const;
  bool has_run(const std::string& run_id) const;
  std::filesystem::path run_dir(const std::string& run_id) const;
  // NotFoundError unknown_run.
  RunState load_run(const std::string& run_id) const;
  std::optional<std::string> load_report(const std::string& run_id) const;

  // Appends under the run's write lock with a strictly increasing timestamp.
  std::size_t record(const std::string& run_id, std::string_view kind, Json payload);
  void write_report(const CodingRun& run);
  void write_metrics(const std::string& run_id, const MetricsReport& report);

  // Cycle number for a refinement starting from `config_hash`: one more than
  // the cycle that produced it, or 1.
  std::size_t next_cycle(const std::string& config_hash) const;

  void save_experiment(const ExperimentResult& result);

 private:
  std::mutex& run_mutex(const std::string& run_id);
  std::string next_timestamp();

  std::filesystem::path root_;
  int lock_fd_ = -1;
  std::mutex mutex_;  // guards run_mutexes_ and last_time_
  std::map<std::string, std::unique_ptr<std::mutex>> run_mutexes_;
  long long last_time_ = 0;
};

// Persists a coding run as it happens: one event per callback, report.json
// on completion or failure.
class RunRecorder final : public RunListener {
 public:
  RunRecorder(Store& store, std::string run_id) : store_(store), run_id_(std::move(run_id)) {}

  void on_started(const CodingRun& run) override;
  void on_batch_sent(std::size_t ordinal, std::span<const LogEntry> entries) override;
  void on_batch_parsed(std::size_t ordinal, std::span<const TurnCoding> codings,
                       std::span<const std::string> warnings) override;
  void on_completed(const CodingRun& run) override;
  void on_failed(const CodingRun& run) override;

 private:
  Store& store_;
  std::string run_id_;
};

}  // namespace dialogcode
