#include "dialogcode/cli.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <filesystem>
#include <iostream>

#include "dialogcode/error.hpp"
#include "dialogcode/experiment.hpp"
#include "dialogcode/service.hpp"
#include "dialogcode/store.hpp"
#include "dialogcode/synthetic.hpp"
#include "dialogcode/workflow.hpp"
#include "text_util.hpp"

namespace dialogcode {
namespace fs = std::filesystem;
namespace {

InstructionConfig load_config_file(const fs::path& file) {
  const auto j = Json::parse(read_file(file), nullptr, false);
  if (j.is_discarded()) throw ValidationError("invalid_json", file.string() + " is not valid JSON");
  return config_from_json(j);
}

std::optional<LiveBackendConfig> load_backend_config(const std::string& file) {
  if (file.empty()) return std::nullopt;
  const auto j = Json::parse(read_file(file), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("invalid_json", file + " is not a JSON object");
  LiveBackendConfig live;
  try {
    live.endpoint = j.at("endpoint").get<std::string>();
    live.model = j.value("model", "");
    live.key_env = j.value("key_env", live.key_env);
    live.timeout_seconds = j.value("timeout_seconds", live.timeout_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid_json", file + ": " + e.what());
  }
  return live;
}

std::vector<std::string> split_labels(const std::string& list) {
  std::vector<std::string> out;
  for (auto part : text::split(list, ',')) {
    if (!text::trim(part).empty()) out.emplace_back(text::trim(part));
  }
  return out;
}

Service* g_serving = nullptr;

extern "C" void stop_serving(int) {
  if (g_serving) g_serving->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deductive coding workbench for classroom dialogue", "dialogcode"};
  app.require_subcommand(1);
  std::string data_dir = ".dialogcode";
  app.add_option("--data", data_dir, "Data directory of the store")->capture_default_str();

  std::string config_file, out_file;
  auto* compile = app.add_subcommand("compile", "Compile an instruction config into a document");
  compile->add_option("--config", config_file, "Instruction config JSON")->required();
  compile->add_option("--out", out_file, "Write the document here (sidecar: <out>.json)");

  std::string lesson_file, backend_id, backend_config;
  std::size_t batch_size = kDefaultBatchSize;
  bool no_reset = false, verify = false, stability = false;
  auto* code = app.add_subcommand("code", "Code a lesson with a backend");
  code->add_option("--lesson", lesson_file, "Transcript TSV")->required();
  code->add_option("--config", config_file, "Instruction config JSON")->required();
  code->add_option("--backend", backend_id, "mock-keyword or live")->required();
  code->add_option("--batch-size", batch_size, "Turns per batch")->capture_default_str();
  code->add_flag("--no-reset", no_reset, "Keep one session across batches");
  code->add_flag("--verify-rules", verify, "Ask the rule probes before the first batch");
  code->add_flag("--stability-probe", stability, "Check each coding against a recent precedent");
  code->add_option("--backend-config", backend_config, "JSON with endpoint, model, key_env");

  std::string run_id, gold_file, mode = "exact", format = "table";
  auto* eval = app.add_subcommand("eval", "Evaluate a run against gold labels");
  eval->add_option("--run", run_id, "Run id")->required();
  eval->add_option("--gold", gold_file, "Gold TSV")->required();
  eval->add_option("--mode", mode, "Turn matching")->check(CLI::IsMember({"exact", "overlap"}))->capture_default_str();
  eval->add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->capture_default_str();

  std::string def_file;
  auto* experiment = app.add_subcommand("experiment", "Run an experiment definition");
  experiment->add_option("--def", def_file, "Experiment definition JSON")->required();

  long long turn = 0;
  std::string codes, note;
  bool allow_agreement = false;
  auto* adjudicate = app.add_subcommand("adjudicate", "Record a human code decision for a turn");
  adjudicate->add_option("--run", run_id, "Run id")->required();
  adjudicate->add_option("--turn", turn, "Turn id")->required();
  adjudicate->add_option("--codes", codes, "Comma-separated codes")->required();
  adjudicate->add_option("--note", note, "Rationale shown with the example");
  adjudicate->add_flag("--allow-agreement", allow_agreement, "Accept turns where gold and prediction agree");

  auto* feedback = app.add_subcommand("feedback", "Compile pending adjudications into a new config");
  feedback->add_option("--run", run_id, "Run id")->required();

  int port = 8080;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Serve the review API");
  serve->add_option("--port", port, "TCP port")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--data", data_dir, "Data directory of the store");
  serve->add_option("--backend-config", backend_config, "JSON with endpoint, model, key_env");

  std::string synth_dir;
  std::size_t synth_lessons = 3, synth_turns = 200;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write synthetic lessons with gold labels");
  synth->add_option("--out", synth_dir, "Output directory")->required();
  synth->add_option("--lessons", synth_lessons, "Number of lessons")->capture_default_str();
  synth->add_option("--turns", synth_turns, "Turns per lesson")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Base seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (compile->parsed()) {
      const auto doc = compile_instructions(load_config_file(config_file));
      for (const auto& w : doc.warnings) err << "warning: " << w << "\n";
      if (out_file.empty()) {
        out << doc.text;
      } else {
        write_file_atomic(out_file, doc.text);
        write_file_atomic(out_file + ".json", document_sidecar(doc).dump(2) + "\n");
        out << "wrote " << out_file << " (" << doc.token_estimate << " of " << doc.token_budget
            << " tokens, config " << doc.config_hash << ")\n";
      }
      return kExitOk;
    }

    if (synth->parsed()) {
      fs::create_directories(synth_dir);
      for (std::size_t i = 0; i < synth_lessons; ++i) {
        SyntheticSpec spec;
        spec.lesson_id = "lesson-" + std::to_string(i + 1);
        spec.turns = synth_turns;
        spec.seed = synth_seed + i;
        const auto data = synthetic_lesson(spec);
        write_file_atomic(fs::path(synth_dir) / (spec.lesson_id + ".tsv"), serialize_transcript(data.lesson));
        write_file_atomic(fs::path(synth_dir) / (spec.lesson_id + ".gold.tsv"), serialize_gold(data.gold));
        out << "wrote " << spec.lesson_id << " (" << spec.turns << " turns)\n";
      }
      return kExitOk;
    }

    if (serve->parsed()) {
      Service service(data_dir, load_backend_config(backend_config));
      for (const auto& w : service.warnings()) err << "warning: " << w << "\n";
      const int bound = service.bind(host, port);
      out << "serving " << data_dir << " on http://" << host << ":" << bound << "\n" << std::flush;
      g_serving = &service;
      std::signal(SIGINT, stop_serving);
      std::signal(SIGTERM, stop_serving);
      service.serve();
      g_serving = nullptr;
      return kExitOk;
    }

    if (code->parsed()) {
      if (batch_size == 0) throw ValidationError("invalid_batch_size", "--batch-size must be at least 1");
      const auto config = load_config_file(config_file);
      auto lesson = parse_transcript(read_file(lesson_file));
      if (lesson.lesson_id.empty()) lesson.lesson_id = fs::path(lesson_file).stem().string();
      auto backend = make_backend(backend_id, config.codebook, load_backend_config(backend_config));
      SessionPolicy policy;
      policy.batch_size = batch_size;
      policy.reset_between_batches = !no_reset;
      policy.verify_rules_first = verify;
      policy.stability_probe = stability;
      compile_instructions(config);

      Store store(data_dir);
      const auto id = store.new_run_id();
      const auto run = execute_run(store, id, lesson, config, *backend, policy);
      for (const auto& w : run.warnings) err << "warning: " << w << "\n";
      if (run.status != RunStatus::complete) {
        err << "error: run " << id << " failed at batch " << run.failed_batch.value_or(0) << ": " << run.failure
            << "\n";
        return kExitRuntime;
      }
      out << id << "\n";
      err << "coded " << run.codings.size() << " turns in " << run.batch_count << " batches; report at "
          << (store.run_dir(id) / "report.json").string() << "\n";
      return kExitOk;
    }

    if (eval->parsed()) {
      Store store(data_dir);
      const auto state = store.load_run(run_id);
      const auto config = store.load_config(state.run.config_hash);
      const auto lesson = store.load_lesson(state.run.lesson_id);
      auto gold = parse_gold(read_file(gold_file), lesson, config.codebook);
      gold.lesson_id = lesson.lesson_id;
      store.put_gold(gold);
      const auto report = evaluate_stored_run(store, run_id, *match_mode_from_string(mode), gold);
      store.write_metrics(run_id, report);
      if (format == "json") out << render_json(report);
      else if (format == "csv") out << render_csv(report);
      else out << render_table(report);
      return kExitOk;
    }

    if (experiment->parsed()) {
      const auto def = load_experiment(def_file);
      Store store(data_dir);
      const auto result = run_experiment(def, [&] { return make_backend(def.backend, def.base_config.codebook, def.live); },
                                         [&](const ConditionResult& c) {
                                           err << c.condition_id << ": " << c.config.examples.items.size()
                                               << " examples, " << c.document.token_estimate << " tokens, turn precision "
                                               << c.report.turn_precision << "\n";
                                         });
      store.save_experiment(result);
      out << render_comparison(result.table);
      return kExitOk;
    }

    if (adjudicate->parsed()) {
      Store store(data_dir);
      const auto adj = record_adjudication(store, run_id, turn, split_labels(codes), note, allow_agreement);
      out << "turn " << adj.turn_id << " adjudicated as " << join_codes(adj.codes) << "\n";
      return kExitOk;
    }

    if (feedback->parsed()) {
      Store store(data_dir);
      const auto outcome = compile_feedback(store, run_id);
      out << outcome.new_config_hash << "\n";
      err << "cycle " << outcome.cycle << ": " << outcome.added_examples << " adjudicated examples added to config "
          << outcome.old_config_hash << "\n";
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const NotFoundError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace dialogcode
