#include "dialogcode/service.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <thread>

#include "dialogcode/error.hpp"
#include "dialogcode/store.hpp"
#include "dialogcode/synthetic.hpp"
#include "support/fixtures.hpp"

namespace dialogcode {
namespace {

struct Server {
  testing::TempDir dir;
  std::unique_ptr<Service> service;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;

  Server() { start(); }
  ~Server() { shutdown(); }

  void start() {
    service = std::make_unique<Service>(dir.path());
    const int port = service->bind("127.0.0.1", 0);
    thread = std::thread([this] { service->serve(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    for (int i = 0; i < 200 && !client->Get("/api/lessons"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }

  void shutdown() {
    if (!service) return;
    service->stop();
    thread.join();
    service.reset();
  }

  std::pair<int, Json> get(const std::string& path) {
    auto res = client->Get(path);
    if (!res) return {0, {}};
    return {res->status, Json::parse(res->body)};
  }

  std::pair<int, Json> post(const std::string& path, const Json& body) {
    auto res = client->Post(path, body.dump(), "application/json");
    if (!res) return {0, {}};
    return {res->status, Json::parse(res->body)};
  }

  // Seeds a synthetic lesson with gold and the fixture config.
  std::pair<LessonData, std::string> seed(std::size_t turns = 60) {
    SyntheticSpec spec;
    spec.lesson_id = "lesson-a";
    spec.turns = turns;
    auto data = synthetic_lesson(spec);
    service->store().put_lesson(data.lesson);
    service->store().put_gold(data.gold);
    const auto hash = service->store().save_config(testing::fixture_config());
    return {data, hash};
  }

  std::string start_run(const std::string& hash, std::size_t batch = 20) {
    auto [status, body] = post("/api/runs", {{"lesson_id", "lesson-a"}, {"config_hash", hash}, {"backend", "mock-keyword"},
                                             {"batch_size", batch}});
    EXPECT_EQ(status, 201) << body.dump();
    service->wait_for_runs();
    return body.value("run_id", "");
  }
};

TEST(Service, EmptyStore) {
  Server s;
  EXPECT_EQ(s.get("/api/runs"), std::make_pair(200, Json::array()));
  EXPECT_EQ(s.get("/api/lessons"), std::make_pair(200, Json::array()));
  auto [status, body] = s.get("/api/no/such/thing");
  EXPECT_EQ(status, 404);
  EXPECT_EQ(body["error"], "not_found");
}

TEST(Service, Lessons) {
  Server s;
  const auto [data, hash] = s.seed(30);
  auto [status, body] = s.get("/api/lessons");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body, Json::parse(R"([{"lesson_id":"lesson-a","subject":"science","turn_count":30}])"));

  const auto& turns = data.lesson.turns;
  auto [s2, slice] = s.get("/api/lessons/lesson-a/turns?from=" + std::to_string(turns[3].turn_id) +
                           "&to=" + std::to_string(turns[6].turn_id));
  EXPECT_EQ(s2, 200);
  ASSERT_EQ(slice.size(), 4u);
  EXPECT_EQ(slice[0]["turn_id"], turns[3].turn_id);
  EXPECT_EQ(slice[0]["speaker"], turns[3].speaker);
  EXPECT_EQ(slice[0]["text"], turns[3].text);
  EXPECT_EQ(s.get("/api/lessons/lesson-a/turns").second.size(), 30u);
  EXPECT_EQ(s.get("/api/lessons/lesson-a/turns?from=x").first, 422);
  auto [s3, missing] = s.get("/api/lessons/nope/turns");
  EXPECT_EQ(s3, 404);
  EXPECT_EQ(missing["error"], "unknown_lesson");
}

TEST(Service, Codebook) {
  Server s;
  const auto [data, hash] = s.seed(10);
  auto [status, body] = s.get("/api/configs/" + hash + "/codebook");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body, codebook_to_json(builtin_cdas()));
  EXPECT_EQ(s.get("/api/configs/feed/codebook").first, 404);
}

TEST(Service, StartRunErrors) {
  Server s;
  const auto [data, hash] = s.seed(10);
  auto [status, body] = s.post("/api/runs", {{"lesson_id", "nope"}, {"config_hash", hash}});
  EXPECT_EQ(status, 404);
  EXPECT_EQ(body["error"], "unknown_lesson");
  EXPECT_EQ(s.post("/api/runs", {{"lesson_id", "lesson-a"}, {"config_hash", "feed"}}).second["error"], "unknown_config");
  EXPECT_EQ(s.post("/api/runs", {{"lesson_id", "lesson-a"}}).second["error"], "missing_field");
  auto zero = s.post("/api/runs", {{"lesson_id", "lesson-a"}, {"config_hash", hash}, {"batch_size", 0}});
  EXPECT_EQ(zero.first, 422);
  EXPECT_EQ(zero.second["error"], "invalid_batch_size");
  EXPECT_EQ(s.post("/api/runs", {{"lesson_id", "lesson-a"}, {"config_hash", hash}, {"backend", "oracle"}}).first, 422);
  auto raw = s.client->Post("/api/runs", "not json", "application/json");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 422);
  EXPECT_EQ(s.get("/api/runs").second, Json::array());
  EXPECT_EQ(s.get("/api/runs/20990101T000000Z-000000").first, 404);
}

TEST(Service, RunLifecycle) {
  Server s;
  const auto [data, hash] = s.seed(45);
  const auto run_id = s.start_run(hash);
  ASSERT_FALSE(run_id.empty());

  auto [status, run] = s.get("/api/runs/" + run_id);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(run["run_id"], run_id);
  EXPECT_EQ(run["status"], "complete");
  EXPECT_EQ(run["batch_count"], 3);
  EXPECT_EQ(run["batches_done"], 3);
  EXPECT_EQ(run["config_hash"], hash);
  EXPECT_EQ(run["lineage"], Json::array());

  auto runs = s.get("/api/runs").second;
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0]["run_id"], run_id);

  auto [s2, results] = s.get("/api/runs/" + run_id + "/results");
  EXPECT_EQ(s2, 200);
  ASSERT_EQ(results.size(), 45u);
  const auto& first = data.lesson.turns[0];
  EXPECT_EQ(results[0]["turn_id"], first.turn_id);
  EXPECT_EQ(results[0]["speaker"], first.speaker);
  EXPECT_EQ(results[0]["text"], first.text);
  EXPECT_EQ(results[0]["gold_codes"], codes_to_json(data.gold.labels.at(first.turn_id)));
  EXPECT_FALSE(results[0]["predicted_codes"].empty());
  EXPECT_FALSE(results[0].contains("adjudicated_codes"));
}

TEST(Service, AdjudicationReadYourWrites) {
  Server s;
  const auto [data, hash] = s.seed(60);
  const auto run_id = s.start_run(hash);
  const auto results = s.get("/api/runs/" + run_id + "/results").second;
  Json target;
  for (const auto& row : results) {
    if (row["gold_codes"] != row["predicted_codes"]) {
      target = row;
      break;
    }
  }
  ASSERT_FALSE(target.is_null());
  const TurnId turn = target["turn_id"];

  auto [status, body] = s.post("/api/runs/" + run_id + "/adjudications",
                               {{"turn_id", turn}, {"codes", {"EL", "a"}}, {"note", "both"}});
  EXPECT_EQ(status, 201) << body.dump();
  EXPECT_EQ(body["codes"], Json::parse(R"(["A","EL"])"));

  const auto after = s.get("/api/runs/" + run_id + "/results").second;
  for (const auto& row : after) {
    if (row["turn_id"] == turn) {
      EXPECT_EQ(row["adjudicated_codes"], Json::parse(R"(["A","EL"])"));
      EXPECT_EQ(row["adjudication_note"], "both");
    } else {
      EXPECT_FALSE(row.contains("adjudicated_codes"));
    }
  }
  // Comma-separated codes are accepted too, and the latest adjudication wins.
  EXPECT_EQ(s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", turn}, {"codes", "RE, Q"}}).first, 201);
  auto run = s.get("/api/runs/" + run_id).second;
  EXPECT_EQ(run["adjudication_count"], 1);
  EXPECT_EQ(run["pending_adjudications"], 1);

  auto bad = s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", turn}, {"codes", {"XY"}}});
  EXPECT_EQ(bad.first, 422);
  EXPECT_EQ(bad.second["error"], "unknown_label");
  EXPECT_EQ(s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", turn}, {"codes", {"UC", "A"}}}).second["error"],
            "uc_exclusivity");
  EXPECT_EQ(s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", 999999}, {"codes", {"A"}}}).second["error"],
            "unknown_turn");
  EXPECT_EQ(s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", "x"}, {"codes", {"A"}}}).first, 422);
  EXPECT_EQ(s.post("/api/runs/20990101T000000Z-000000/adjudications", {{"turn_id", turn}, {"codes", {"A"}}}).first,
            404);

  // Adjudications survive a service restart.
  s.shutdown();
  s.start();
  bool found = false;
  for (const auto& row : s.get("/api/runs/" + run_id + "/results").second) {
    if (row["turn_id"] == turn) found = row["adjudicated_codes"] == Json::parse(R"(["Q","RE"])");
  }
  EXPECT_TRUE(found);
}

TEST(Service, IncompleteRunConflicts) {
  Server s;
  const auto [data, hash] = s.seed(10);
  // A failed run recorded straight through the store.
  class Broken final : public Backend {
   public:
    std::string id() const override { return "broken"; }
    bool deterministic() const override { return true; }
    std::string send(std::span<const Message>) override { throw BackendError("refused"); }
  } broken;
  auto& store = s.service->store();
  const auto run_id = store.new_run_id();
  RunRecorder recorder(store, run_id);
  const auto config = testing::fixture_config();
  code_lesson(data.lesson, compile_instructions(config), config.codebook, broken, {}, &recorder, run_id);

  EXPECT_EQ(s.get("/api/runs/" + run_id).second["status"], "failed");
  for (const auto& [status, body] :
       {s.get("/api/runs/" + run_id + "/results"), s.get("/api/runs/" + run_id + "/metrics"),
        s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", data.lesson.turns[0].turn_id}, {"codes", {"A"}}}),
        s.post("/api/runs/" + run_id + "/feedback/compile", Json::object())}) {
    EXPECT_EQ(status, 409);
    EXPECT_EQ(body["error"], "run_incomplete");
  }
}

TEST(Service, FeedbackCompileAndLineage) {
  Server s;
  const auto [data, hash] = s.seed(60);
  const auto run_id = s.start_run(hash);
  EXPECT_EQ(s.post("/api/runs/" + run_id + "/feedback/compile", Json::object()).second["error"],
            "no_pending_adjudications");

  const auto results = s.get("/api/runs/" + run_id + "/results").second;
  std::size_t added = 0;
  for (const auto& row : results) {
    if (row["gold_codes"] == row["predicted_codes"] || added == 2) continue;
    ASSERT_EQ(s.post("/api/runs/" + run_id + "/adjudications", {{"turn_id", row["turn_id"]}, {"codes", row["gold_codes"]}})
                  .first,
              201);
    ++added;
  }
  ASSERT_EQ(added, 2u);

  auto [status, body] = s.post("/api/runs/" + run_id + "/feedback/compile", Json::object());
  EXPECT_EQ(status, 200) << body.dump();
  EXPECT_EQ(body["old_config_hash"], hash);
  EXPECT_EQ(body["cycle"], 1);
  EXPECT_EQ(body["added_examples"], 2);
  const std::string fresh = body["new_config_hash"];
  EXPECT_NE(fresh, hash);

  auto run = s.get("/api/runs/" + run_id).second;
  ASSERT_EQ(run["lineage"].size(), 1u);
  EXPECT_EQ(run["lineage"][0]["old_hash"], hash);
  EXPECT_EQ(run["lineage"][0]["new_hash"], fresh);
  EXPECT_EQ(run["pending_adjudications"], 0);
  EXPECT_EQ(s.get("/api/configs/" + fresh + "/codebook").first, 200);

  // The refined config can drive a new run.
  const auto second = s.start_run(fresh);
  EXPECT_EQ(s.get("/api/runs/" + second).second["status"], "complete");
}

TEST(Service, Metrics) {
  Server s;
  const auto [data, hash] = s.seed(60);
  const auto run_id = s.start_run(hash);
  auto [status, body] = s.get("/api/runs/" + run_id + "/metrics");
  EXPECT_EQ(status, 200);
  const auto state = s.service->store().load_run(run_id);
  auto expected = metrics_to_json(evaluate_run(data.gold, state.run, builtin_cdas()));
  Json pairs = Json::array();
  for (const auto& p : confusion_pairs(data.gold, state.run)) {
    pairs.push_back({{"gold", p.gold_code}, {"predicted", p.predicted_code}, {"count", p.count}});
  }
  expected["confusion_pairs"] = pairs;
  EXPECT_EQ(body, expected);

  auto overlap = s.get("/api/runs/" + run_id + "/metrics?mode=overlap").second;
  EXPECT_EQ(overlap["turn_precision"],
            evaluate_run(data.gold, state.run, builtin_cdas(), MatchMode::overlap).turn_precision);
  EXPECT_EQ(s.get("/api/runs/" + run_id + "/metrics?mode=fuzzy").first, 422);
}

TEST(Service, MissingGoldIsValidationError) {
  Server s;
  SyntheticSpec spec;
  spec.lesson_id = "lesson-a";
  spec.turns = 10;
  s.service->store().put_lesson(synthetic_lesson(spec).lesson);
  const auto hash = s.service->store().save_config(testing::fixture_config());
  const auto run_id = s.start_run(hash);
  auto [status, body] = s.get("/api/runs/" + run_id + "/metrics");
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body["error"], "missing_gold");
  EXPECT_EQ(s.get("/api/runs/" + run_id + "/results").second[0]["gold_codes"], Json::array());
}

TEST(Service, RefusesCorruptStore) {
  testing::TempDir dir;
  std::string run_dir;
  {
    Store store(dir.path());
    store.record("r1", event_kind::config_saved, {{"config_hash", "h"}});
    run_dir = store.run_dir("r1").string();
  }
  std::ofstream(run_dir + "/events.ndjson", std::ios::app) << "{broken\n";
  try {
    Service service(dir.path());
    FAIL();
  } catch (const StoreError& e) {
    EXPECT_EQ(e.kind(), "corrupt_store");
    EXPECT_NE(std::string(e.what()).find("events.ndjson"), std::string::npos);
  }
}

TEST(Service, TruncatedLogRecoveredWithWarning) {
  testing::TempDir dir;
  std::string run_dir;
  {
    Store store(dir.path());
    store.record("r1", event_kind::config_saved, {{"config_hash", "h"}});
    run_dir = store.run_dir("r1").string();
  }
  std::ofstream(run_dir + "/events.ndjson", std::ios::app) << "{\"kind\":";
  Service service(dir.path());
  ASSERT_EQ(service.warnings().size(), 1u);
  EXPECT_NE(service.warnings()[0].find("truncated"), std::string::npos);
}

TEST(Service, SecondServiceOnSameStoreIsLocked) {
  Server s;
  try {
    Service other(s.dir.path());
    FAIL();
  } catch (const StoreError& e) {
    EXPECT_EQ(e.kind(), "store_locked");
  }
}

}  // namespace
}  // namespace dialogcode
