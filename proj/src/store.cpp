#include "dialogcode/store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "dialogcode/error.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace fs = std::filesystem;
namespace {

[[noreturn]] void io_error(const fs::path& path, const std::string& what) {
  throw StoreError("io_error", path.string() + ": " + what);
}

[[noreturn]] void corrupt(const fs::path& path, const std::string& what) {
  throw StoreError("corrupt_store", path.string() + ": " + what);
}

bool known_kind(std::string_view kind) {
  for (auto k : {event_kind::config_saved, event_kind::run_started, event_kind::batch_sent, event_kind::batch_parsed,
                 event_kind::run_completed, event_kind::run_failed, event_kind::adjudication,
                 event_kind::feedback_compiled}) {
    if (k == kind) return true;
  }
  return false;
}

std::string format_timestamp(long long micros) {
  const std::time_t secs = static_cast<std::time_t>(micros / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, micros % 1000000);
  return buf;
}

bool process_alive(pid_t pid) { return pid > 0 && (::kill(pid, 0) == 0 || errno == EPERM); }

std::vector<std::string> sorted_stems(const fs::path& dir, std::string_view extension) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > extension.size() && name.ends_with(extension)) {
      out.push_back(name.substr(0, name.size() - extension.size()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool safe_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  }
  return true;
}

void require_safe(std::string_view id, const char* what) {
  if (!safe_id(id)) throw ValidationError("invalid_id", std::string(what) + " '" + std::string(id) + "' is not a valid identifier");
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error(path, "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_error(tmp, "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) io_error(tmp, "write failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) io_error(path, ec.message());
}

Json event_to_json(const RunEvent& event) {
  return {{"timestamp", event.timestamp}, {"kind", event.kind}, {"payload", event.payload}};
}

LoadedEvents read_events(const fs::path& file) {
  const auto content = read_file(file);
  LoadedEvents out;
  const auto lines = text::lines(content);
  const bool ends_clean = content.empty() || content.back() == '\n';
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const bool last = i + 1 == lines.size();
    const auto where = "line " + std::to_string(i + 1);
    auto j = Json::parse(lines[i], nullptr, false);
    const bool shaped = !j.is_discarded() && j.is_object() && j.contains("timestamp") && j.contains("kind") &&
                        j.contains("payload") && j.at("timestamp").is_string() && j.at("kind").is_string();
    if (!shaped || (last && !ends_clean)) {
      if (last && !ends_clean) {
        out.warnings.push_back(file.string() + ": dropped truncated final " + where);
        break;
      }
      corrupt(file, where + " is not a valid event");
    }
    RunEvent event{j.at("timestamp").get<std::string>(), j.at("kind").get<std::string>(), j.at("payload")};
    if (!known_kind(event.kind)) corrupt(file, where + " has unknown kind '" + event.kind + "'");
    if (!out.events.empty() && event.timestamp <= out.events.back().timestamp) {
      corrupt(file, where + " timestamp does not increase");
    }
    out.events.push_back(std::move(event));
  }
  return out;
}

std::size_t append_event(const fs::path& file, const RunEvent& event) {
  const auto line = canonical_dump(event_to_json(event)) + "\n";
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) io_error(file, std::strerror(errno));
  struct stat st {};
  ::fstat(fd, &st);
  const auto offset = static_cast<std::size_t>(st.st_size);
  const auto written = ::write(fd, line.data(), line.size());
  const int err = errno;
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size())) io_error(file, written < 0 ? std::strerror(err) : "short write");
  return offset;
}

std::map<TurnId, Adjudication> RunState::latest_adjudications() const {
  std::map<TurnId, Adjudication> out;
  for (const auto& a : adjudications) out[a.turn_id] = a;
  return out;
}

std::vector<Adjudication> RunState::pending_adjudications() const {
  std::map<TurnId, Adjudication> latest;
  for (std::size_t i = compiled_upto; i < adjudications.size(); ++i) latest[adjudications[i].turn_id] = adjudications[i];
  std::vector<Adjudication> out;
  for (auto& [id, a] : latest) out.push_back(std::move(a));
  return out;
}

RunState replay_events(std::span<const RunEvent> events) {
  RunState state;
  auto& run = state.run;
  bool started = false;
  const auto fail = [](const std::string& what) -> void { throw StoreError("corrupt_store", what); };
  for (const auto& e : events) {
    try {
      const auto& p = e.payload;
      if (e.kind == event_kind::run_started) {
        if (started) fail("second run_started event");
        started = true;
        run.run_id = p.at("run_id").get<std::string>();
        run.lesson_id = p.at("lesson_id").get<std::string>();
        run.config_hash = p.at("config_hash").get<std::string>();
        run.backend_id = p.at("backend_id").get<std::string>();
        run.policy = policy_from_json(p.at("policy"));
        run.batch_count = p.at("batch_count").get<std::size_t>();
        run.status = RunStatus::running;
        continue;
      }
      if (e.kind == event_kind::config_saved) continue;
      if (!started) fail("event '" + e.kind + "' before run_started");
      if (e.kind == event_kind::batch_sent) {
        for (const auto& entry : p.at("entries")) run.event_log.push_back(log_entry_from_json(entry));
      } else if (e.kind == event_kind::batch_parsed) {
        const auto ordinal = p.at("ordinal").get<std::size_t>();
        for (const auto& c : p.at("codings")) run.codings.push_back(coding_from_json(c));
        for (const auto& w : p.at("warnings")) {
          run.warnings.push_back("batch " + std::to_string(ordinal) + ": " + w.get<std::string>());
        }
        ++run.batches_done;
      } else if (e.kind == event_kind::run_completed) {
        run.status = RunStatus::complete;
      } else if (e.kind == event_kind::run_failed) {
        run.status = RunStatus::failed;
        run.failed_batch = p.at("ordinal").get<std::size_t>();
        run.failure = p.at("message").get<std::string>();
      } else if (e.kind == event_kind::adjudication) {
        state.adjudications.push_back({p.at("turn_id").get<TurnId>(), codes_from_json(p.at("codes")),
                                       p.value("note", ""), e.timestamp});
      } else if (e.kind == event_kind::feedback_compiled) {
        state.lineage.push_back(lineage_entry_from_json(p));
        state.compiled_upto = state.adjudications.size();
      }
    } catch (const nlohmann::json::exception& ex) {
      throw StoreError("corrupt_store", "event '" + e.kind + "' at " + e.timestamp + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw StoreError("corrupt_store", "event '" + e.kind + "' at " + e.timestamp + ": " + ex.what());
    }
  }
  return state;
}

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (const char* sub : {"configs", "lessons", "runs", "experiments"}) {
    fs::create_directories(root_ / sub, ec);
    if (ec) io_error(root_ / sub, ec.message());
  }
  const auto lock = root_ / ".lock";
  for (int attempt = 0; attempt < 2; ++attempt) {
    lock_fd_ = ::open(lock.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (lock_fd_ >= 0) break;
    if (errno != EEXIST) io_error(lock, std::strerror(errno));
    long long owner = 0;
    text::parse_positive_int(text::trim(read_file(lock)), owner);
    if (process_alive(static_cast<pid_t>(owner))) {
      throw StoreError("store_locked", root_.string() + " is in use by process " + std::to_string(owner));
    }
    fs::remove(lock, ec);
  }
  if (lock_fd_ < 0) throw StoreError("store_locked", "could not take " + lock.string());
  const auto pid = std::to_string(::getpid()) + "\n";
  if (::write(lock_fd_, pid.data(), pid.size()) < 0) io_error(lock, std::strerror(errno));
}

Store::~Store() {
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    std::error_code ec;
    fs::remove(root_ / ".lock", ec);
  }
}

std::vector<std::string> Store::verify() const {
  std::vector<std::string> warnings;
  for (const auto& hash : config_hashes()) load_config(hash);
  for (const auto& id : run_ids()) {
    const auto file = run_dir(id) / "events.ndjson";
    auto loaded = read_events(file);
    try {
      replay_events(loaded.events);
    } catch (const StoreError& e) {
      corrupt(file, e.what());
    }
    warnings.insert(warnings.end(), loaded.warnings.begin(), loaded.warnings.end());
  }
  return warnings;
}

std::string Store::save_config(const InstructionConfig& config) {
  const auto hash = config_hash(config);
  const auto path = root_ / "configs" / (hash + ".json");
  if (!fs::exists(path)) write_file_atomic(path, canonical_dump(config_to_json(config)) + "\n");
  return hash;
}

InstructionConfig Store::load_config(const std::string& hash) const {
  const auto path = root_ / "configs" / (hash + ".json");
  if (!safe_id(hash) || !fs::exists(path)) throw NotFoundError("unknown_config", "no config with hash " + hash);
  const auto j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) corrupt(path, "not valid JSON");
  InstructionConfig config;
  try {
    config = config_from_json(j);
  } catch (const ValidationError& e) {
    corrupt(path, e.what());
  }
  if (config_hash(config) != hash) corrupt(path, "content does not match its hash");
  return config;
}

std::vector<std::string> Store::config_hashes() const { return sorted_stems(root_ / "configs", ".json"); }

void Store::put_lesson(const Lesson& lesson) {
  require_safe(lesson.lesson_id, "lesson id");
  const auto path = root_ / "lessons" / (lesson.lesson_id + ".tsv");
  const auto content = serialize_transcript(lesson);
  if (fs::exists(path)) {
    if (read_file(path) != content) {
      throw ValidationError("lesson_conflict", "a different lesson '" + lesson.lesson_id + "' is already stored");
    }
    return;
  }
  write_file_atomic(path, content);
}

void Store::put_gold(const GoldAnnotationSet& gold) {
  require_safe(gold.lesson_id, "lesson id");
  const auto path = root_ / "lessons" / (gold.lesson_id + ".gold.tsv");
  const auto content = serialize_gold(gold);
  if (fs::exists(path)) {
    if (read_file(path) != content) {
      throw ValidationError("gold_conflict", "different gold labels for '" + gold.lesson_id + "' are already stored");
    }
    return;
  }
  write_file_atomic(path, content);
}

std::vector<LessonSummary> Store::lessons() const {
  std::vector<LessonSummary> out;
  for (const auto& stem : sorted_stems(root_ / "lessons", ".tsv")) {
    if (stem.ends_with(".gold")) continue;
    const auto lesson = load_lesson(stem);
    out.push_back({lesson.lesson_id, lesson.subject, lesson.turns.size()});
  }
  return out;
}

Lesson Store::load_lesson(const std::string& lesson_id) const {
  const auto path = root_ / "lessons" / (lesson_id + ".tsv");
  if (!safe_id(lesson_id) || !fs::exists(path)) throw NotFoundError("unknown_lesson", "no lesson '" + lesson_id + "'");
  try {
    auto lesson = parse_transcript(read_file(path));
    if (lesson.lesson_id.empty()) lesson.lesson_id = lesson_id;
    return lesson;
  } catch (const ValidationError& e) {
    corrupt(path, e.what());
  }
}

std::optional<GoldAnnotationSet> Store::load_gold(const std::string& lesson_id, const Codebook& codebook) const {
  const auto lesson = load_lesson(lesson_id);
  const auto path = root_ / "lessons" / (lesson_id + ".gold.tsv");
  if (!fs::exists(path)) return std::nullopt;
  try {
    auto gold = parse_gold(read_file(path), lesson, codebook, GoldMode::lenient);
    gold.lesson_id = lesson_id;
    return gold;
  } catch (const ValidationError& e) {
    corrupt(path, e.what());
  }
}

std::string Store::new_run_id() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    char suffix[8];
    std::snprintf(suffix, sizeof suffix, "%06llx", static_cast<unsigned long long>(rng() & 0xffffff));
    const auto id = std::string(stamp) + "-" + suffix;
    std::error_code ec;
    if (fs::create_directory(root_ / "runs" / id, ec)) return id;
    if (ec) io_error(root_ / "runs" / id, ec.message());
  }
}

std::vector<std::string> Store::run_ids() const {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
    if (entry.is_directory() && fs::exists(entry.path() / "events.ndjson")) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Store::has_run(const std::string& run_id) const {
  return safe_id(run_id) && fs::exists(run_dir(run_id) / "events.ndjson");
}

fs::path Store::run_dir(const std::string& run_id) const { return root_ / "runs" / run_id; }

RunState Store::load_run(const std::string& run_id) const {
  if (!has_run(run_id)) throw NotFoundError("unknown_run", "no run '" + run_id + "'");
  const auto file = run_dir(run_id) / "events.ndjson";
  const auto loaded = read_events(file);
  try {
    return replay_events(loaded.events);
  } catch (const StoreError& e) {
    corrupt(file, e.what());
  }
}

std::optional<std::string> Store::load_report(const std::string& run_id) const {
  const auto path = run_dir(run_id) / "report.json";
  if (!safe_id(run_id) || !fs::exists(path)) return std::nullopt;
  return read_file(path);
}

std::mutex& Store::run_mutex(const std::string& run_id) {
  std::lock_guard lock(mutex_);
  auto& slot = run_mutexes_[run_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::string Store::next_timestamp() {
  std::lock_guard lock(mutex_);
  const auto now = std::chrono::duration_cast<std::chrono::microseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  last_time_ = std::max<long long>(now, last_time_ + 1);
  return format_timestamp(last_time_);
}

std::size_t Store::record(const std::string& run_id, std::string_view kind, Json payload) {
  require_safe(run_id, "run id");
  std::lock_guard lock(run_mutex(run_id));
  std::error_code ec;
  fs::create_directories(run_dir(run_id), ec);
  return append_event(run_dir(run_id) / "events.ndjson", {next_timestamp(), std::string(kind), std::move(payload)});
}

void Store::write_report(const CodingRun& run) {
  write_file_atomic(run_dir(run.run_id) / "report.json", canonical_dump(run_report_json(run)) + "\n");
}

void Store::write_metrics(const std::string& run_id, const MetricsReport& report) {
  write_file_atomic(run_dir(run_id) / "metrics.json", canonical_dump(metrics_to_json(report)) + "\n");
}

std::size_t Store::next_cycle(const std::string& config_hash) const {
  for (const auto& id : run_ids()) {
    for (const auto& entry : load_run(id).lineage) {
      if (entry.new_hash == config_hash && entry.old_hash != entry.new_hash) return entry.cycle + 1;
    }
  }
  return 1;
}

void Store::save_experiment(const ExperimentResult& result) {
  require_safe(result.experiment_id, "experiment id");
  const auto dir = root_ / "experiments" / result.experiment_id;
  for (const auto& c : result.conditions) {
    require_safe(c.condition_id, "condition id");
    const auto cdir = dir / c.condition_id;
    save_config(c.config);
    write_file_atomic(cdir / "config.json", canonical_dump(config_to_json(c.config)) + "\n");
    write_file_atomic(cdir / "instructions.txt", c.document.text);
    write_file_atomic(cdir / "instructions.json", canonical_dump(document_sidecar(c.document)) + "\n");
    write_file_atomic(cdir / "report.json", canonical_dump(run_report_json(c.run)) + "\n");
    write_file_atomic(cdir / "metrics.json", canonical_dump(metrics_to_json(c.report)) + "\n");
  }
  write_file_atomic(dir / "comparison.txt", render_comparison(result.table));
  write_file_atomic(root_ / "experiments" / (result.experiment_id + ".json"),
                    canonical_dump(experiment_result_json(result)) + "\n");
}

void RunRecorder::on_started(const CodingRun& run) {
  store_.record(run_id_, event_kind::run_started,
                {{"run_id", run.run_id},
                 {"lesson_id", run.lesson_id},
                 {"config_hash", run.config_hash},
                 {"backend_id", run.backend_id},
                 {"policy", policy_to_json(run.policy)},
                 {"batch_count", run.batch_count}});
}

void RunRecorder::on_batch_sent(std::size_t ordinal, std::span<const LogEntry> entries) {
  Json list = Json::array();
  for (const auto& e : entries) list.push_back(log_entry_to_json(e));
  store_.record(run_id_, event_kind::batch_sent, {{"ordinal", ordinal}, {"entries", list}});
}

void RunRecorder::on_batch_parsed(std::size_t ordinal, std::span<const TurnCoding> codings,
                                  std::span<const std::string> warnings) {
  Json list = Json::array();
  for (const auto& c : codings) list.push_back(coding_to_json(c));
  store_.record(run_id_, event_kind::batch_parsed,
                {{"ordinal", ordinal}, {"codings", list}, {"warnings", std::vector<std::string>(warnings.begin(), warnings.end())}});
}

void RunRecorder::on_completed(const CodingRun& run) {
  store_.record(run_id_, event_kind::run_completed, Json::object());
  store_.write_report(run);
}

void RunRecorder::on_failed(const CodingRun& run) {
  store_.record(run_id_, event_kind::run_failed, {{"ordinal", run.failed_batch.value_or(0)}, {"message", run.failure}});
  store_.write_report(run);
}

}  // namespace dialogcode
