#include "dialogcode/service.hpp"

#include <httplib.h>

#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "dialogcode/error.hpp"
#include "dialogcode/store.hpp"
#include "dialogcode/workflow.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace {

class HttpError : public Error {
 public:
  HttpError(int status, std::string kind, const std::string& message) : Error(std::move(kind), message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

int status_for(const Error& e) {
  if (const auto* h = dynamic_cast<const HttpError*>(&e)) return h->status();
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (e.kind() == "run_incomplete") return 409;
  if (dynamic_cast<const ValidationError*>(&e)) return 422;
  if (dynamic_cast<const BackendError*>(&e)) return 502;
  return 500;
}

Json parse_body(const httplib::Request& req) {
  auto j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("invalid_json", "request body must be a JSON object");
  return j;
}

template <typename T>
T body_field(const Json& body, const char* key) {
  if (!body.contains(key)) throw ValidationError("missing_field", std::string("missing field '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("invalid_field", std::string("field '") + key + "' has the wrong type");
  }
}

std::optional<TurnId> query_turn(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  long long value = 0;
  if (!text::parse_positive_int(req.get_param_value(key), value)) {
    throw ValidationError("invalid_query", std::string("query parameter '") + key + "' must be a positive integer");
  }
  return value;
}

Json run_summary(const CodingRun& run) {
  return {{"run_id", run.run_id},
          {"lesson_id", run.lesson_id},
          {"config_hash", run.config_hash},
          {"backend_id", run.backend_id},
          {"status", std::string(to_string(run.status))},
          {"batches_done", run.batches_done},
          {"batch_count", run.batch_count}};
}

}  // namespace

struct Service::Impl {
  Impl(std::filesystem::path dir, std::optional<LiveBackendConfig> live_config)
      : store(std::move(dir)), live(std::move(live_config)) {
    warnings = store.verify();
  }

  Store store;
  std::optional<LiveBackendConfig> live;
  std::vector<std::string> warnings;
  httplib::Server server;

  std::mutex runs_mutex;
  std::set<std::string> launching;
  std::map<std::string, std::string> launch_failures;
  std::vector<std::thread> threads;

  using Handler = std::function<Json(const httplib::Request&, httplib::Response&)>;

  httplib::Server::Handler guard(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      Json body;
      try {
        res.status = 200;
        body = fn(req, res);
      } catch (const BudgetError& e) {
        res.status = 422;
        body = {{"error", e.kind()}, {"message", e.what()}, {"token_estimate", e.estimate()}, {"token_budget", e.budget()}};
      } catch (const Error& e) {
        res.status = status_for(e);
        body = {{"error", e.kind()}, {"message", e.what()}};
      } catch (const std::exception& e) {
        res.status = 500;
        body = {{"error", "internal_error"}, {"message", e.what()}};
      }
      res.set_content(body.dump(), "application/json");
    };
  }

  void install() {
    auto get = [this](const std::string& pattern, Handler fn) { server.Get(pattern, guard(std::move(fn))); };
    auto post = [this](const std::string& pattern, Handler fn) { server.Post(pattern, guard(std::move(fn))); };

    get("/api/lessons", [this](const auto&, auto&) {
      Json out = Json::array();
      for (const auto& l : store.lessons()) {
        out.push_back({{"lesson_id", l.lesson_id}, {"subject", l.subject}, {"turn_count", l.turn_count}});
      }
      return out;
    });

    get(R"(/api/lessons/([^/]+)/turns)", [this](const httplib::Request& req, auto&) {
      const auto lesson = store.load_lesson(req.matches[1]);
      const auto from = query_turn(req, "from");
      const auto to = query_turn(req, "to");
      Json out = Json::array();
      for (const auto& t : lesson.turns) {
        if ((from && t.turn_id < *from) || (to && t.turn_id > *to)) continue;
        out.push_back(turn_to_json(t));
      }
      return out;
    });

    get(R"(/api/configs/([^/]+)/codebook)", [this](const httplib::Request& req, auto&) {
      return codebook_to_json(store.load_config(req.matches[1]).codebook);
    });

    get("/api/runs", [this](const auto&, auto&) {
      Json out = Json::array();
      for (const auto& id : store.run_ids()) out.push_back(run_summary(store.load_run(id).run));
      return out;
    });

    post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) { return start_run(req, res); });

    get(R"(/api/runs/([^/]+))", [this](const httplib::Request& req, auto&) { return run_status(req.matches[1]); });

    get(R"(/api/runs/([^/]+)/results)", [this](const httplib::Request& req, auto&) { return results(req.matches[1]); });

    post(R"(/api/runs/([^/]+)/adjudications)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string run_id = req.matches[1];
      const auto body = parse_body(req);
      const auto turn_id = body_field<TurnId>(body, "turn_id");
      std::vector<std::string> labels;
      if (body.contains("codes") && body.at("codes").is_string()) {
        for (auto part : text::split(body.at("codes").get<std::string>(), ',')) {
          if (!text::trim(part).empty()) labels.emplace_back(text::trim(part));
        }
      } else {
        labels = body_field<std::vector<std::string>>(body, "codes");
      }
      const auto note = body.value("note", std::string());
      const auto allow = body.value("allow_agreement", false);
      const auto adj = record_adjudication(store, run_id, turn_id, labels, note, allow);
      res.status = 201;
      return Json{{"turn_id", adj.turn_id}, {"codes", codes_to_json(adj.codes)}, {"note", adj.note}};
    });

    post(R"(/api/runs/([^/]+)/feedback/compile)", [this](const httplib::Request& req, auto&) {
      const auto outcome = compile_feedback(store, req.matches[1]);
      return Json{{"new_config_hash", outcome.new_config_hash},
                  {"old_config_hash", outcome.old_config_hash},
                  {"cycle", outcome.cycle},
                  {"added_examples", outcome.added_examples}};
    });

    get(R"(/api/runs/([^/]+)/metrics)", [this](const httplib::Request& req, auto&) {
      const auto mode_text = req.has_param("mode") ? req.get_param_value("mode") : std::string("exact");
      const auto mode = match_mode_from_string(mode_text);
      if (!mode) throw ValidationError("invalid_mode", "mode must be exact or overlap");
      const std::string run_id = req.matches[1];
      const auto report = evaluate_stored_run(store, run_id, *mode);
      auto out = metrics_to_json(report);
      const auto state = store.load_run(run_id);
      const auto config = store.load_config(state.run.config_hash);
      Json pairs = Json::array();
      for (const auto& p : confusion_pairs(*store.load_gold(state.run.lesson_id, config.codebook), state.run)) {
        pairs.push_back({{"gold", p.gold_code}, {"predicted", p.predicted_code}, {"count", p.count}});
      }
      out["confusion_pairs"] = pairs;
      return out;
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const Json body = {{"error", res.status == 404 ? "not_found" : "http_error"},
                         {"message", "no such endpoint"}};
      res.set_content(body.dump(), "application/json");
    });
  }

  Json start_run(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto lesson_id = body_field<std::string>(body, "lesson_id");
    const auto hash = body_field<std::string>(body, "config_hash");
    const auto backend_id = body.value("backend", std::string(kMockKeywordBackend));
    SessionPolicy policy;
    policy.verify_rules_first = body.value("verify_rules", false);
    policy.reset_between_batches = body.value("reset", true);
    if (body.contains("batch_size")) {
      const auto& b = body.at("batch_size");
      if (!b.is_number_integer() || b.get<long long>() < 1) {
        throw ValidationError("invalid_batch_size", "batch_size must be a positive integer");
      }
      policy.batch_size = b.get<std::size_t>();
    }

    const auto lesson = store.load_lesson(lesson_id);
    const auto config = store.load_config(hash);
    compile_instructions(config);
    std::shared_ptr<Backend> backend = make_backend(backend_id, config.codebook, live);

    const auto run_id = store.new_run_id();
    std::lock_guard lock(runs_mutex);
    launching.insert(run_id);
    threads.emplace_back([this, run_id, lesson, config, backend, policy] {
      try {
        execute_run(store, run_id, lesson, config, *backend, policy);
      } catch (const std::exception& e) {
        std::lock_guard inner(runs_mutex);
        launch_failures[run_id] = e.what();
      }
      std::lock_guard inner(runs_mutex);
      launching.erase(run_id);
    });
    res.status = 201;
    return Json{{"run_id", run_id}};
  }

  Json run_status(const std::string& run_id) {
    if (!store.has_run(run_id)) {
      std::lock_guard lock(runs_mutex);
      if (launching.count(run_id)) return Json{{"run_id", run_id}, {"status", "pending"}, {"batches_done", 0}, {"batch_count", 0}};
      if (auto it = launch_failures.find(run_id); it != launch_failures.end()) {
        return Json{{"run_id", run_id}, {"status", "failed"}, {"failure", it->second}};
      }
      throw NotFoundError("unknown_run", "no run '" + run_id + "'");
    }
    const auto state = store.load_run(run_id);
    auto out = run_summary(state.run);
    out["run_id"] = run_id;
    out["failed_batch"] = state.run.failed_batch ? Json(*state.run.failed_batch) : Json(nullptr);
    out["failure"] = state.run.failure;
    out["warnings"] = state.run.warnings;
    Json lineage = Json::array();
    for (const auto& entry : state.lineage) lineage.push_back(lineage_entry_to_json(entry));
    out["lineage"] = lineage;
    out["adjudication_count"] = state.latest_adjudications().size();
    out["pending_adjudications"] = state.pending_adjudications().size();
    return out;
  }

  Json results(const std::string& run_id) {
    const auto state = store.load_run(run_id);
    if (state.run.status != RunStatus::complete) {
      throw ValidationError("run_incomplete", "run '" + run_id + "' is " + std::string(to_string(state.run.status)));
    }
    const auto config = store.load_config(state.run.config_hash);
    const auto lesson = store.load_lesson(state.run.lesson_id);
    const auto gold = store.load_gold(state.run.lesson_id, config.codebook);
    const auto adjudicated = state.latest_adjudications();
    Json out = Json::array();
    for (const auto& c : state.run.codings) {
      const auto* turn = lesson.find_turn(c.turn_id);
      Json row = {{"turn_id", c.turn_id},
                  {"speaker", turn ? turn->speaker : std::string()},
                  {"text", turn ? turn->text : std::string()},
                  {"gold_codes", Json::array()},
                  {"predicted_codes", codes_to_json(c.predicted)},
                  {"justification", c.justification}};
      if (gold) {
        if (auto it = gold->labels.find(c.turn_id); it != gold->labels.end()) row["gold_codes"] = codes_to_json(it->second);
      }
      if (auto it = adjudicated.find(c.turn_id); it != adjudicated.end()) {
        row["adjudicated_codes"] = codes_to_json(it->second.codes);
        row["adjudication_note"] = it->second.note;
      }
      out.push_back(std::move(row));
    }
    return out;
  }
};

Service::Service(std::filesystem::path data_dir, std::optional<LiveBackendConfig> live)
    : impl_(std::make_unique<Impl>(std::move(data_dir), std::move(live))) {
  impl_->install();
}

Service::~Service() {
  stop();
  wait_for_runs();
}

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("port_bind", "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_for_runs() {
  for (;;) {
    std::vector<std::thread> batch;
    {
      std::lock_guard lock(impl_->runs_mutex);
      batch.swap(impl_->threads);
    }
    if (batch.empty()) return;
    for (auto& t : batch) t.join();
  }
}

const std::vector<std::string>& Service::warnings() const noexcept { return impl_->warnings; }

Store& Service::store() noexcept { return impl_->store; }

}  // namespace dialogcode
