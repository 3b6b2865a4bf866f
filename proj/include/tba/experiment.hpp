#pragma once

// Experiment configuration, strategy comparison and report rendering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "tba/assignment.hpp"
#include "tba/confidence_model.hpp"
#include "tba/episode.hpp"
#include "tba/episode_log.hpp"
#include "tba/errors.hpp"
#include "tba/lifecycle.hpp"
#include "tba/metrics.hpp"
#include "tba/oracle.hpp"
#include "tba/rng.hpp"
#include "tba/world.hpp"

namespace tba {

struct ExperimentConfig {
  ScenarioParams scenario;
  LifecycleConfig lifecycle;
  CostParams cost;
  OracleParams oracle;
  Strategy strategy = Strategy::SCA_Dropout;  // single-episode commands
  std::vector<Strategy> strategies{Strategy::Baseline, Strategy::SCA, Strategy::SCA_Dropout};
  int num_scenes = 10;
  std::uint64_t seed = 0;
  TrainingParams training;
  MetricsOptions metrics;
  std::string output_dir = "out";

  void validate() const {
    scenario.validate();
    lifecycle.validate();
    cost.validate();
    oracle.validate();
    training.validate();
    if (num_scenes < 1) throw ParameterError("num_scenes: must be >= 1");
    if (strategies.empty()) throw ParameterError("strategies: must not be empty");
    if (metrics.amota.num_thresholds < 2) throw ParameterError("metrics.num_thresholds: must be >= 2");
    if (!(metrics.amota.dist_threshold > 0.0)) throw ParameterError("metrics.dist_threshold: must be > 0");
  }
};

inline Json metrics_options_to_json(const MetricsOptions& m) {
  return Json{{"num_thresholds", m.amota.num_thresholds},
              {"dist_threshold", m.amota.dist_threshold},
              {"per_class", m.per_class}};
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json scenario;
  to_json(scenario, c.scenario);
  Json strategies = Json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  return Json{{"scenario", std::move(scenario)},
              {"lifecycle", lifecycle_to_json(c.lifecycle)},
              {"cost", cost_params_to_json(c.cost)},
              {"oracle", oracle_params_to_json(c.oracle)},
              {"strategy", to_string(c.strategy)},
              {"strategies", std::move(strategies)},
              {"num_scenes", c.num_scenes},
              {"seed", c.seed},
              {"training", training_params_to_json(c.training)},
              {"metrics", metrics_options_to_json(c.metrics)},
              {"output_dir", c.output_dir}};
}

// Missing sections and fields keep their defaults; unknown ones are errors.
template <class J>
ExperimentConfig config_from_json(const J& j) {
  ExperimentConfig c;
  detail::FieldReader r(j, "config");
  if (const auto* v = r.raw("scenario")) c.scenario = scenario_params_from_json(*v);
  if (const auto* v = r.raw("lifecycle")) c.lifecycle = lifecycle_from_json(*v);
  if (const auto* v = r.raw("cost")) c.cost = cost_params_from_json(*v);
  if (const auto* v = r.raw("oracle")) c.oracle = oracle_params_from_json(*v);
  std::string strategy = to_string(c.strategy);
  r.get("strategy", strategy);
  c.strategy = strategy_from_string(strategy);
  if (const auto* v = r.raw("strategies")) {
    if (!v->is_array()) throw ParameterError("config.strategies: expected an array");
    c.strategies.clear();
    for (const auto& s : *v) {
      if (!s.is_string()) throw ParameterError("config.strategies: expected strategy names");
      c.strategies.push_back(strategy_from_string(s.template get<std::string>()));
    }
  }
  r.get("num_scenes", c.num_scenes);
  r.get("seed", c.seed);
  if (const auto* v = r.raw("training")) c.training = training_params_from_json(*v);
  if (const auto* v = r.raw("metrics")) {
    detail::FieldReader m(*v, "metrics");
    m.get("num_thresholds", c.metrics.amota.num_thresholds);
    m.get("dist_threshold", c.metrics.amota.dist_threshold);
    m.get("per_class", c.metrics.per_class);
    m.finish();
  }
  r.get("output_dir", c.output_dir);
  r.finish();
  c.validate();
  return c;
}

// FNV-1a 64 of the config serialized with sorted keys, output_dir excluded,
// as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json sorted = nlohmann::json::parse(config_to_json(c).dump());
  sorted.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(sorted.dump())));
  return buf;
}

inline std::vector<Scene> generate_scenes(const ExperimentConfig& c) {
  std::vector<Scene> scenes;
  for (int i = 0; i < c.num_scenes; ++i) scenes.push_back(generate_scenario(c.scenario, c.seed, i));
  return scenes;
}

// First 70% of the scenes train, the rest evaluate. A single scene serves both.
inline int num_training_scenes(int num_scenes) {
  if (num_scenes <= 1) return 1;
  return std::clamp(static_cast<int>(std::floor(0.7 * num_scenes)), 1, num_scenes - 1);
}

struct SceneSplit {
  std::vector<const Scene*> train;
  std::vector<const Scene*> eval;
};

inline SceneSplit split_scenes(const std::vector<Scene>& scenes) {
  SceneSplit s;
  const int n_train = num_training_scenes(static_cast<int>(scenes.size()));
  for (int i = 0; i < static_cast<int>(scenes.size()); ++i) {
    (i < n_train ? s.train : s.eval).push_back(&scenes[static_cast<std::size_t>(i)]);
  }
  if (s.eval.empty()) s.eval = s.train;
  return s;
}

inline void check_scene_matches(const ExperimentConfig& c, const Scene& scene) {
  if (scene.params.arena_half_extent != c.scenario.arena_half_extent) {
    throw ParameterError("scene " + std::to_string(scene.scene_id) + ": arena_half_extent differs from the config");
  }
  if (scene.params.num_classes != c.scenario.num_classes) {
    throw ParameterError("scene " + std::to_string(scene.scene_id) + ": num_classes differs from the config");
  }
}

inline EpisodeSettings episode_settings(const ExperimentConfig& c, Strategy strategy, EpisodeMode mode) {
  EpisodeSettings s;
  s.strategy = strategy;
  s.mode = mode;
  s.lifecycle = c.lifecycle;
  s.cost = c.cost;
  s.oracle = c.oracle;
  s.seed = c.seed;
  return s;
}

// Whole-scene episode with the config's strategy and lifecycle as given.
inline std::vector<EpisodeRecord> run_episode(const ExperimentConfig& c, const Scene& scene, EpisodeMode mode,
                                              const std::optional<ConfidenceModel>& model = std::nullopt) {
  c.validate();
  check_scene_matches(c, scene);
  auto s = episode_settings(c, c.strategy, mode);
  s.model = model;
  s.seed = Rng(c.seed).derive("episode").derive(static_cast<std::uint64_t>(scene.scene_id)).next_u64();
  s.episode_id = scene.scene_id;
  return run_episode(scene, s);
}

// The comparison runs Baseline, SCA and Detection without auxiliary groups
// and the dropout strategies with at least one.
inline LifecycleConfig lifecycle_for(const LifecycleConfig& base, Strategy s) {
  LifecycleConfig l = base;
  l.num_aux_groups = uses_dropout(s) ? std::max(1, base.num_aux_groups) : 0;
  return l;
}

// Training episodes: clips of the training scenes, drawn class-balanced.
// Sample i is schedule step i of the run.
inline std::vector<EpisodeRecord> training_logs(const ExperimentConfig& c, const std::vector<const Scene*>& scenes,
                                                Strategy strategy) {
  std::vector<Clip> clips;
  for (const auto* sc : scenes) {
    check_scene_matches(c, *sc);
    auto more = split_clips(*sc, c.lifecycle.max_clip_len);
    clips.insert(clips.end(), more.begin(), more.end());
  }
  const auto samples = class_balanced_clip_sampler(clips, static_cast<int>(clips.size()),
                                                   Rng(c.seed).derive("sampler").next_u64());
  auto base = episode_settings(c, strategy, EpisodeMode::Training);
  base.lifecycle = lifecycle_for(c.lifecycle, strategy);
  std::vector<EpisodeRecord> logs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& clip = samples[i];
    const auto it = std::find_if(scenes.begin(), scenes.end(), [&](const Scene* s) { return s->scene_id == clip.scene_id; });
    auto s = base;
    s.schedule = {static_cast<std::int64_t>(i), static_cast<std::int64_t>(samples.size())};
    s.seed = Rng(c.seed).derive("train-episode").derive(i).next_u64();
    s.episode_id = static_cast<std::int64_t>(i);
    s.start_frame = clip.start;
    s.end_frame = clip.end;
    auto recs = run_episode(**it, s);
    logs.insert(logs.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return logs;
}

inline TrainingResult train_from_logs(const ExperimentConfig& c, const std::vector<EpisodeRecord>& logs) {
  return train_confidence_model(examples_from_records(logs), c.training, Rng(c.seed).derive("train").next_u64());
}

inline std::vector<EpisodeRecord> inference_logs(const ExperimentConfig& c, const std::vector<const Scene*>& scenes,
                                                 Strategy strategy, const ConfidenceModel& model) {
  std::vector<EpisodeRecord> logs;
  for (const auto* sc : scenes) {
    check_scene_matches(c, *sc);
    auto s = episode_settings(c, strategy, EpisodeMode::Inference);
    s.model = model;
    s.seed = Rng(c.seed).derive("episode").derive(static_cast<std::uint64_t>(sc->scene_id)).next_u64();
    s.episode_id = sc->scene_id;
    auto recs = run_episode(*sc, s);
    logs.insert(logs.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return logs;
}

inline MetricsReport evaluate_logs(const ExperimentConfig& c, const std::vector<EpisodeRecord>& logs) {
  MetricsReport m = evaluate_records(logs, c.metrics);
  m.seed = c.seed;
  m.config_hash = config_hash(c);
  return m;
}

// Stage-2 cost of the baseline and second-chance rules on the same query sets.
struct PairedStageCost {
  double baseline = 0.0;
  double second_chance = 0.0;

  friend bool operator==(const PairedStageCost&, const PairedStageCost&) = default;
};

inline PairedStageCost paired_stage_costs(const std::vector<EpisodeRecord>& logs, const CostParams& cost) {
  PairedStageCost out;
  for (const auto& r : logs) {
    std::vector<QueryState> tracks;
    std::vector<QueryState> proposals;
    for (const auto& q : r.queries) (q.kind == QueryKind::Track ? tracks : proposals).push_back(q);
    const Frame f = gt_frame(r);
    out.baseline += baseline_assign(tracks, proposals, f, cost).total_second_stage_cost;
    out.second_chance += second_chance_assign(tracks, proposals, f, cost).total_second_stage_cost;
  }
  return out;
}

struct StrategyResult {
  Strategy strategy = Strategy::Baseline;
  MetricsReport metrics;
  LabelRates training_labels;
  PairedStageCost training_stage_cost;
  ConfidenceModel model;

  friend bool operator==(const StrategyResult&, const StrategyResult&) = default;
};

// Differences against the first strategy of the comparison.
struct StrategyDelta {
  Strategy strategy = Strategy::Baseline;
  double amota = 0.0;
  double amotp = 0.0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t ids = 0;
  std::optional<double> tq_recall;
  std::optional<double> nb_conf_mean;
  std::optional<double> trk_conf_mean;
  std::optional<double> proposal_positive_rate;

  friend bool operator==(const StrategyDelta&, const StrategyDelta&) = default;
};

struct ComparisonReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  int num_scenes = 0;
  std::vector<StrategyResult> results;
  std::vector<StrategyDelta> deltas;

  friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

namespace detail {

inline std::optional<double> opt_diff(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

}  // namespace detail

inline StrategyDelta strategy_delta(const StrategyResult& r, const StrategyResult& ref) {
  StrategyDelta d;
  d.strategy = r.strategy;
  d.amota = r.metrics.amota - ref.metrics.amota;
  d.amotp = r.metrics.amotp - ref.metrics.amotp;
  d.fp = r.metrics.fp - ref.metrics.fp;
  d.fn = r.metrics.fn - ref.metrics.fn;
  d.ids = r.metrics.ids - ref.metrics.ids;
  d.tq_recall = detail::opt_diff(r.metrics.tq_recall, ref.metrics.tq_recall);
  d.nb_conf_mean = detail::opt_diff(r.metrics.nb_conf_mean, ref.metrics.nb_conf_mean);
  d.trk_conf_mean = detail::opt_diff(r.metrics.trk_conf_mean, ref.metrics.trk_conf_mean);
  d.proposal_positive_rate =
      detail::opt_diff(r.training_labels.proposal_rate(), ref.training_labels.proposal_rate());
  return d;
}

inline StrategyResult run_strategy(const ExperimentConfig& c, const SceneSplit& split, Strategy strategy) {
  StrategyResult r;
  r.strategy = strategy;
  const auto train = training_logs(c, split.train, strategy);
  r.training_labels = label_rates(train);
  r.training_stage_cost = paired_stage_costs(train, c.cost);
  r.model = train_from_logs(c, train).model;
  r.metrics = evaluate_logs(c, inference_logs(c, split.eval, strategy, r.model));
  return r;
}

// Every strategy sees the same scenes, clip samples and episode seeds.
inline ComparisonReport run_comparison(const ExperimentConfig& c) {
  c.validate();
  const auto scenes = generate_scenes(c);
  const auto split = split_scenes(scenes);
  ComparisonReport rep;
  rep.config_hash = config_hash(c);
  rep.seed = c.seed;
  rep.num_scenes = c.num_scenes;
  for (auto s : c.strategies) rep.results.push_back(run_strategy(c, split, s));
  for (std::size_t i = 1; i < rep.results.size(); ++i) rep.deltas.push_back(strategy_delta(rep.results[i], rep.results[0]));
  return rep;
}

inline ComparisonReport run_comparison(const ExperimentConfig& base, const std::vector<Strategy>& strategies,
                                       int num_scenes, std::uint64_t seed) {
  ExperimentConfig c = base;
  c.strategies = strategies;
  c.num_scenes = num_scenes;
  c.seed = seed;
  return run_comparison(c);
}

// ---- reports ---------------------------------------------------------------

inline void check_hashes(const ComparisonReport& rep) {
  for (const auto& r : rep.results) {
    if (r.metrics.config_hash != rep.config_hash) {
      throw DataError(std::string("comparison: config hash of ") + to_string(r.strategy) + " is " +
                      r.metrics.config_hash + ", expected " + rep.config_hash);
    }
  }
}

inline Json label_rates_to_json(const LabelRates& l) {
  return Json{{"proposal_total", l.proposal_total},
              {"proposal_positive", l.proposal_positive},
              {"proposal_rate", detail::optional_json(l.proposal_rate())},
              {"track_total", l.track_total},
              {"track_positive", l.track_positive},
              {"track_rate", detail::optional_json(l.track_rate())}};
}

inline Json comparison_to_json(const ComparisonReport& rep) {
  Json results = Json::array();
  for (const auto& r : rep.results) {
    results.push_back(Json{{"strategy", to_string(r.strategy)},
                           {"metrics", metrics_to_json(r.metrics)},
                           {"training_labels", label_rates_to_json(r.training_labels)},
                           {"training_stage2_cost",
                            Json{{"baseline", r.training_stage_cost.baseline},
                                 {"second_chance", r.training_stage_cost.second_chance}}},
                           {"model", model_to_json(r.model)}});
  }
  Json deltas = Json::array();
  for (const auto& d : rep.deltas) {
    deltas.push_back(Json{{"strategy", to_string(d.strategy)},
                          {"amota", d.amota},
                          {"amotp", d.amotp},
                          {"fp", d.fp},
                          {"fn", d.fn},
                          {"ids", d.ids},
                          {"tq_recall", detail::optional_json(d.tq_recall)},
                          {"nb_conf_mean", detail::optional_json(d.nb_conf_mean)},
                          {"trk_conf_mean", detail::optional_json(d.trk_conf_mean)},
                          {"proposal_positive_rate", detail::optional_json(d.proposal_positive_rate)}});
  }
  return Json{{"config_hash", rep.config_hash},
              {"seed", rep.seed},
              {"num_scenes", rep.num_scenes},
              {"results", std::move(results)},
              {"deltas", std::move(deltas)}};
}

template <class J>
ComparisonReport comparison_from_json(const J& j) {
  ComparisonReport rep;
  try {
    rep.config_hash = j.at("config_hash").template get<std::string>();
    rep.seed = j.at("seed").template get<std::uint64_t>();
    rep.num_scenes = j.at("num_scenes").template get<int>();
    for (const auto& jr : j.at("results")) {
      StrategyResult r;
      r.strategy = strategy_from_string(jr.at("strategy").template get<std::string>());
      r.metrics = metrics_from_json(jr.at("metrics"));
      const auto& l = jr.at("training_labels");
      r.training_labels.proposal_total = l.at("proposal_total").template get<std::int64_t>();
      r.training_labels.proposal_positive = l.at("proposal_positive").template get<std::int64_t>();
      r.training_labels.track_total = l.at("track_total").template get<std::int64_t>();
      r.training_labels.track_positive = l.at("track_positive").template get<std::int64_t>();
      r.training_stage_cost.baseline = jr.at("training_stage2_cost").at("baseline").template get<double>();
      r.training_stage_cost.second_chance = jr.at("training_stage2_cost").at("second_chance").template get<double>();
      r.model = model_from_json(jr.at("model"));
      rep.results.push_back(std::move(r));
    }
    for (const auto& jd : j.at("deltas")) {
      StrategyDelta d;
      d.strategy = strategy_from_string(jd.at("strategy").template get<std::string>());
      d.amota = jd.at("amota").template get<double>();
      d.amotp = jd.at("amotp").template get<double>();
      d.fp = jd.at("fp").template get<std::int64_t>();
      d.fn = jd.at("fn").template get<std::int64_t>();
      d.ids = jd.at("ids").template get<std::int64_t>();
      d.tq_recall = detail::optional_from_json(jd.at("tq_recall"));
      d.nb_conf_mean = detail::optional_from_json(jd.at("nb_conf_mean"));
      d.trk_conf_mean = detail::optional_from_json(jd.at("trk_conf_mean"));
      d.proposal_positive_rate = detail::optional_from_json(jd.at("proposal_positive_rate"));
      rep.deltas.push_back(d);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("comparison JSON: ") + e.what());
  }
  return rep;
}

inline constexpr const char* kComparisonCsvHeader = "strategy,amota,amotp,fp,fn,ids,tq_recall,nb_conf,trk_conf";

inline std::string comparison_csv(const ComparisonReport& rep) {
  std::string out = std::string(kComparisonCsvHeader) + "\n";
  for (const auto& r : rep.results) {
    const auto& m = r.metrics;
    out += std::string(to_string(r.strategy)) + "," + format_number(m.amota) + "," + format_number(m.amotp) + "," +
           std::to_string(m.fp) + "," + std::to_string(m.fn) + "," + std::to_string(m.ids) + "," +
           format_number(m.tq_recall) + "," + format_number(m.nb_conf_mean) + "," +
           format_number(m.trk_conf_mean) + "\n";
  }
  return out;
}

namespace detail {

inline std::string fixed3(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

}  // namespace detail

// Ablation grid: one row per strategy with check columns for the two
// training-time mechanisms.
inline std::string comparison_markdown(const ComparisonReport& rep) {
  std::string out = "# Strategy comparison\n\nconfig_hash `" + rep.config_hash + "`, seed " +
                    std::to_string(rep.seed) + ", " + std::to_string(rep.num_scenes) + " scenes\n\n";
  out += "| Strategy | S.C. Assignment | TQ Dropout | AMOTA | AMOTP | FP | FN | IDS | TQ Recall | NB Conf | TQ Conf "
         "| PQ pos. rate | TQ pos. rate |\n";
  out += "|---|:-:|:-:|--:|--:|--:|--:|--:|--:|--:|--:|--:|--:|\n";
  for (const auto& r : rep.results) {
    const auto& m = r.metrics;
    out += "| " + std::string(to_string(r.strategy)) + " | " + (uses_second_chance(r.strategy) ? "✓" : "") +
           " | " + (uses_dropout(r.strategy) ? "✓" : "") + " | " + detail::fixed3(m.amota) + " | " +
           detail::fixed3(m.amotp) + " | " + std::to_string(m.fp) + " | " + std::to_string(m.fn) + " | " +
           std::to_string(m.ids) + " | " + detail::fixed3(m.tq_recall) + " | " + detail::fixed3(m.nb_conf_mean) +
           " | " + detail::fixed3(m.trk_conf_mean) + " | " + detail::fixed3(r.training_labels.proposal_rate()) +
           " | " + detail::fixed3(r.training_labels.track_rate()) + " |\n";
  }
  return out;
}

inline std::string report(const ComparisonReport& rep, const std::string& format) {
  if (format != "json" && format != "csv" && format != "markdown") {
    throw ParameterError("report: unknown format " + format);
  }
  check_hashes(rep);
  if (format == "json") return comparison_to_json(rep).dump(2) + "\n";
  if (format == "csv") return comparison_csv(rep);
  return comparison_markdown(rep);
}

}  // namespace tba
