// tba: command-line driver for scenes, episodes, training, evaluation and
// strategy comparisons.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "tba/selftest.hpp"
#include "tba/tba.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string strategy;
  std::string mode = "training";
  std::string logs;
  std::string model;
  int scene_id = 0;
};

tba::Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tba::ParameterError("cannot open " + path);
  try {
    return tba::Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw tba::ParameterError(path + ": " + e.what());
  }
}

tba::ExperimentConfig load_config(const Options& o) {
  tba::ExperimentConfig c;
  if (!o.config.empty()) c = tba::config_from_json(read_json_file(o.config));
  if (o.seed) c.seed = *o.seed;
  if (!o.strategy.empty()) c.strategy = tba::strategy_from_string(o.strategy);
  if (const char* env = std::getenv("TBA_OUT"); env != nullptr && *env != '\0') c.output_dir = env;
  if (!o.out.empty()) c.output_dir = o.out;
  c.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  std::cout << "wrote " << path.string() << "\n";
}

const tba::Scene& pick_scene(const std::vector<tba::Scene>& scenes, int scene_id) {
  if (scene_id < 0 || scene_id >= static_cast<int>(scenes.size())) {
    throw tba::ParameterError("--scene: no scene " + std::to_string(scene_id));
  }
  return scenes[static_cast<std::size_t>(scene_id)];
}

std::vector<tba::EpisodeRecord> read_logs(const std::string& path) {
  if (path.empty()) throw tba::ParameterError("--logs is required");
  std::ifstream in(path);
  if (!in) throw tba::ParameterError("cannot open " + path);
  return tba::read_jsonl(in);
}

int cmd_simulate(const Options& o) {
  const auto c = load_config(o);
  const auto scenes = tba::generate_scenes(c);
  const fs::path out = c.output_dir;
  if (out.extension() == ".json") {
    write_file(out, tba::scene_to_json(pick_scene(scenes, o.scene_id)).dump(2) + "\n");
    return 0;
  }
  for (const auto& s : scenes) {
    write_file(out / ("scene_" + std::to_string(s.scene_id) + ".json"), tba::scene_to_json(s).dump(2) + "\n");
  }
  return 0;
}

int cmd_run(const Options& o) {
  const auto c = load_config(o);
  const auto scenes = tba::generate_scenes(c);
  std::optional<tba::ConfidenceModel> model;
  if (!o.model.empty()) model = tba::model_from_json(read_json_file(o.model));
  const auto logs = tba::run_episode(c, pick_scene(scenes, o.scene_id), tba::episode_mode_from_string(o.mode), model);
  std::ostringstream ss;
  tba::write_jsonl(ss, logs);
  write_file(fs::path(c.output_dir) / "episode.jsonl", ss.str());
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = load_config(o);
  std::vector<tba::EpisodeRecord> logs;
  if (!o.logs.empty()) {
    logs = read_logs(o.logs);
  } else {
    const auto scenes = tba::generate_scenes(c);
    logs = tba::training_logs(c, tba::split_scenes(scenes).train, c.strategy);
  }
  const auto result = tba::train_from_logs(c, logs);
  tba::Json j = tba::model_to_json(result.model);
  j["loss_curve"] = result.loss_curve;
  write_file(fs::path(c.output_dir) / "model.json", j.dump(2) + "\n");
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto c = load_config(o);
  const auto m = tba::evaluate_logs(c, read_logs(o.logs));
  write_file(fs::path(c.output_dir) / "metrics.json", tba::metrics_to_json(m).dump(2) + "\n");
  write_file(fs::path(c.output_dir) / "metrics.csv",
             std::string(tba::kMetricsCsvHeader) + "\n" + tba::metrics_csv_row(m) + "\n");
  return 0;
}

int cmd_compare(const Options& o) {
  const auto c = load_config(o);
  const auto rep = tba::run_comparison(c);
  const fs::path out = c.output_dir;
  write_file(out / "comparison.json", tba::report(rep, "json"));
  write_file(out / "comparison.csv", tba::report(rep, "csv"));
  write_file(out / "comparison.md", tba::report(rep, "markdown"));
  return 0;
}

int cmd_selftest(const Options& o) {
  bool ok = true;
  for (const auto& r : tba::run_selftest(o.seed.value_or(0))) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tba: tracking-by-attention supervision simulator"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Experiment config (JSON)");
  app.add_option("--seed", o.seed, "Base seed, overrides the config");
  app.add_option("--out", o.out, "Output directory (simulate: a .json path writes one scene)");
  app.add_option("--strategy", o.strategy, "Baseline, SCA, Dropout, SCA_Dropout or Detection");
  app.add_option("--mode", o.mode, "training or inference")->check(CLI::IsMember({"training", "inference"}));
  app.add_option("--logs", o.logs, "Episode log (JSON lines) for train and evaluate");
  app.add_option("--model", o.model, "Confidence model JSON for run");
  app.add_option("--scene", o.scene_id, "Scene index for simulate and run");

  int (*handler)(const Options&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    app.add_subcommand(name, help)->fallthrough()->callback([&handler, fn] { handler = fn; });
  };
  sub("simulate", "Write scene JSON", cmd_simulate);
  sub("run", "Run one episode and write its log", cmd_run);
  sub("train", "Fit the confidence model", cmd_train);
  sub("evaluate", "Compute metrics from an episode log", cmd_evaluate);
  sub("compare", "Run the strategy comparison and write reports", cmd_compare);
  sub("selftest", "Check the library against brute-force references", cmd_selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return handler(o);
  } catch (const tba::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
