#pragma once

// nuScenes-style tracking evaluation: greedy center-distance matching,
// CLEAR-MOT accumulation per recall operating point, MOTAR, AMOTA/AMOTP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tba/episode_log.hpp"
#include "tba/errors.hpp"
#include "tba/geometry.hpp"
#include "tba/world.hpp"

namespace tba {

struct TrackedOutput {
  int frame = 0;
  std::int64_t pred_track_id = 0;
  BoxBEV box;
  int class_id = 0;
  double confidence = 0.0;
};

struct FrameMatch {
  std::int64_t pred_track_id = 0;
  TrackId gt_track_id = 0;
  double distance = 0.0;
  double confidence = 0.0;
};

struct FrameMatchResult {
  std::vector<FrameMatch> matches;
  std::vector<std::int64_t> fp;  // unmatched pred_track_ids
  std::vector<TrackId> fn;       // unmatched gt_track_ids
};

// Predictions in descending confidence (ties: ascending pred_track_id) each
// take the nearest unmatched GT within dist_threshold (ties: ascending
// gt_track_id).
inline FrameMatchResult match_frame(std::span<const TrackedOutput> preds, std::span<const GtObject> gts,
                                    double dist_threshold = 2.0) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].confidence != preds[b].confidence) return preds[a].confidence > preds[b].confidence;
    return preds[a].pred_track_id < preds[b].pred_track_id;
  });
  std::vector<char> gt_used(gts.size(), 0);
  FrameMatchResult out;
  for (std::size_t i : order) {
    const auto& p = preds[i];
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g]) continue;
      const double d = center_distance(p.box, gts[g].box);
      if (d > dist_threshold) continue;
      if (!best || d < best_d || (d == best_d && gts[g].track_id < gts[*best].track_id)) {
        best = g;
        best_d = d;
      }
    }
    if (best) {
      gt_used[*best] = 1;
      out.matches.push_back({p.pred_track_id, gts[*best].track_id, best_d, p.confidence});
    } else {
      out.fp.push_back(p.pred_track_id);
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_used[g]) out.fn.push_back(gts[g].track_id);
  }
  return out;
}

struct MotAccumulator {
  double recall_threshold = 0.0;
  double distance_sum = 0.0;
  std::int64_t match_count = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t ids = 0;
  std::int64_t gt_count = 0;

  MotAccumulator& operator+=(const MotAccumulator& o) {
    distance_sum += o.distance_sum;
    match_count += o.match_count;
    fp += o.fp;
    fn += o.fn;
    ids += o.ids;
    gt_count += o.gt_count;
    return *this;
  }
};

// One evaluated sequence: outputs plus ground-truth frames. Output identities
// are only compared within a sequence.
struct EvalSequence {
  std::vector<TrackedOutput> outputs;
  std::vector<Frame> frames;
};

namespace detail {

inline std::map<int, std::vector<TrackedOutput>> outputs_by_frame(std::span<const TrackedOutput> outputs) {
  std::map<int, std::vector<TrackedOutput>> by_frame;
  for (const auto& o : outputs) by_frame[o.frame].push_back(o);
  return by_frame;
}

}  // namespace detail

// IDS: a GT matched to a different prediction id than in its most recent
// matched frame. Unmatched frames in between do not reset the memory.
inline MotAccumulator accumulate_clearmot(std::span<const TrackedOutput> outputs, std::span<const Frame> frames,
                                          double recall_threshold, double dist_threshold = 2.0) {
  MotAccumulator acc;
  acc.recall_threshold = recall_threshold;
  const auto by_frame = detail::outputs_by_frame(outputs);
  std::unordered_map<TrackId, std::int64_t> last_match;
  static const std::vector<TrackedOutput> kNone;
  for (const auto& f : frames) {
    auto it = by_frame.find(f.index);
    const auto& preds = it == by_frame.end() ? kNone : it->second;
    const auto res = match_frame(preds, f.objects, dist_threshold);
    acc.gt_count += static_cast<std::int64_t>(f.objects.size());
    acc.fp += static_cast<std::int64_t>(res.fp.size());
    acc.fn += static_cast<std::int64_t>(res.fn.size());
    for (const auto& m : res.matches) {
      acc.distance_sum += m.distance;
      ++acc.match_count;
      auto [pos, inserted] = last_match.try_emplace(m.gt_track_id, m.pred_track_id);
      if (!inserted) {
        if (pos->second != m.pred_track_id) ++acc.ids;
        pos->second = m.pred_track_id;
      }
    }
  }
  return acc;
}

// Recall-normalized MOTA at operating point r, clamped to [0, 1]. Empty when
// the accumulator has no ground truth or r <= 0.
inline std::optional<double> motar(const MotAccumulator& acc) {
  const double r = acc.recall_threshold;
  const auto p = static_cast<double>(acc.gt_count);
  if (acc.gt_count <= 0 || !(r > 0.0)) return std::nullopt;
  const double errors = static_cast<double>(acc.ids + acc.fp + acc.fn);
  const double value = 1.0 - (errors - (1.0 - r) * p) / (r * p);
  return std::clamp(value, 0.0, 1.0);
}

struct CurvePoint {
  double recall = 0.0;
  double motar = 0.0;
  double motp = 0.0;
  bool achieved = false;
  double score_threshold = 0.0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t ids = 0;
};

struct AmotaResult {
  double amota = 0.0;
  double amotp = 0.0;
  std::vector<CurvePoint> curve;
  // Counts at the operating point with the highest MOTAR (highest recall on
  // ties); over all outputs when no recall level is reachable.
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t ids = 0;
};

struct AmotaOptions {
  int num_thresholds = 40;
  double dist_threshold = 2.0;
};

// Recall levels k / N for k = 1..N. For each level the strictest score
// threshold whose recall reaches it is used; unreachable levels score MOTAR 0
// and MOTP = dist_threshold.
inline AmotaResult amota_amotp(std::span<const EvalSequence> sequences, const AmotaOptions& opt = {}) {
  if (opt.num_thresholds < 2) throw ParameterError("num_thresholds: must be >= 2");
  std::int64_t total_gt = 0;
  for (const auto& s : sequences) {
    for (const auto& f : s.frames) total_gt += static_cast<std::int64_t>(f.objects.size());
  }
  if (total_gt == 0) throw DataError("amota_amotp: no ground truth");

  // Greedy matching is confidence-ordered, so the matches made with a score
  // cut are exactly the matches of the full run above that cut.
  std::vector<std::pair<double, bool>> scored;
  for (const auto& s : sequences) {
    const auto by_frame = detail::outputs_by_frame(s.outputs);
    for (const auto& f : s.frames) {
      auto it = by_frame.find(f.index);
      if (it == by_frame.end()) continue;
      const auto res = match_frame(it->second, f.objects, opt.dist_threshold);
      std::set<std::int64_t> tp;
      for (const auto& m : res.matches) tp.insert(m.pred_track_id);
      for (const auto& o : it->second) scored.emplace_back(o.confidence, tp.count(o.pred_track_id) > 0);
    }
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  // (score level, cumulative TP at that level)
  std::vector<std::pair<double, std::int64_t>> levels;
  std::int64_t cum = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    cum += scored[i].second ? 1 : 0;
    if (i + 1 == scored.size() || scored[i + 1].first != scored[i].first) levels.emplace_back(scored[i].first, cum);
  }

  AmotaResult out;
  const std::int64_t n = opt.num_thresholds;
  std::optional<std::size_t> best;
  for (std::int64_t k = 1; k <= n; ++k) {
    CurvePoint cp;
    cp.recall = static_cast<double>(k) / static_cast<double>(n);
    cp.motp = opt.dist_threshold;
    std::optional<double> tau;
    for (const auto& [score, tp] : levels) {
      if (tp * n >= k * total_gt) {  // recall >= k / n, in integers
        tau = score;
        break;
      }
    }
    if (tau) {
      MotAccumulator acc;
      acc.recall_threshold = cp.recall;
      for (const auto& s : sequences) {
        std::vector<TrackedOutput> kept;
        for (const auto& o : s.outputs) {
          if (o.confidence >= *tau) kept.push_back(o);
        }
        acc += accumulate_clearmot(kept, s.frames, cp.recall, opt.dist_threshold);
      }
      cp.achieved = true;
      cp.score_threshold = *tau;
      cp.motar = motar(acc).value_or(0.0);
      cp.motp = acc.match_count > 0 ? acc.distance_sum / static_cast<double>(acc.match_count) : opt.dist_threshold;
      cp.fp = acc.fp;
      cp.fn = acc.fn;
      cp.ids = acc.ids;
      if (!best || cp.motar >= out.curve[*best].motar) best = out.curve.size();
    }
    out.amota += cp.motar;
    out.amotp += cp.motp;
    out.curve.push_back(cp);
  }
  out.amota /= static_cast<double>(n);
  out.amotp /= static_cast<double>(n);
  if (best) {
    out.fp = out.curve[*best].fp;
    out.fn = out.curve[*best].fn;
    out.ids = out.curve[*best].ids;
  } else {
    MotAccumulator acc;
    for (const auto& s : sequences) acc += accumulate_clearmot(s.outputs, s.frames, 1.0, opt.dist_threshold);
    out.fp = acc.fp;
    out.fn = acc.fn;
    out.ids = acc.ids;
  }
  return out;
}

inline AmotaResult amota_amotp(const EvalSequence& sequence, const AmotaOptions& opt = {}) {
  return amota_amotp(std::span<const EvalSequence>(&sequence, 1), opt);
}

// Evaluates each class with ground truth separately; AMOTA/AMOTP are the
// unweighted class means and the counts are summed.
inline AmotaResult amota_amotp_per_class(std::span<const EvalSequence> sequences, const AmotaOptions& opt = {}) {
  std::set<int> classes;
  for (const auto& s : sequences) {
    for (const auto& f : s.frames) {
      for (const auto& o : f.objects) classes.insert(o.class_id);
    }
  }
  if (classes.empty()) throw DataError("amota_amotp: no ground truth");
  AmotaResult out;
  for (int c : classes) {
    std::vector<EvalSequence> filtered;
    for (const auto& s : sequences) {
      EvalSequence e;
      for (const auto& o : s.outputs) {
        if (o.class_id == c) e.outputs.push_back(o);
      }
      for (const auto& f : s.frames) {
        Frame g{f.index, f.timestamp_s, {}};
        for (const auto& o : f.objects) {
          if (o.class_id == c) g.objects.push_back(o);
        }
        e.frames.push_back(std::move(g));
      }
      filtered.push_back(std::move(e));
    }
    const auto r = amota_amotp(filtered, opt);
    out.amota += r.amota;
    out.amotp += r.amotp;
    out.fp += r.fp;
    out.fn += r.fn;
    out.ids += r.ids;
  }
  out.amota /= static_cast<double>(classes.size());
  out.amotp /= static_cast<double>(classes.size());
  return out;
}

struct MetricsReport {
  double amota = 0.0;
  double amotp = 0.0;
  std::vector<std::pair<double, double>> mota_r_curve;  // (recall, MOTAR)
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t ids = 0;
  std::optional<double> tq_recall;
  std::optional<double> nb_conf_mean;
  std::optional<double> trk_conf_mean;
  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

namespace detail {

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

template <class J>
std::optional<double> optional_from_json(const J& j) {
  if (j.is_null()) return std::nullopt;
  return j.template get<double>();
}

}  // namespace detail

inline Json metrics_to_json(const MetricsReport& m) {
  Json curve = Json::array();
  for (const auto& [r, v] : m.mota_r_curve) curve.push_back(Json::array({r, v}));
  return Json{{"amota", m.amota},
              {"amotp", m.amotp},
              {"mota_r_curve", std::move(curve)},
              {"fp", m.fp},
              {"fn", m.fn},
              {"ids", m.ids},
              {"tq_recall", detail::optional_json(m.tq_recall)},
              {"nb_conf_mean", detail::optional_json(m.nb_conf_mean)},
              {"trk_conf_mean", detail::optional_json(m.trk_conf_mean)},
              {"seed", m.seed},
              {"config_hash", m.config_hash}};
}

template <class J>
MetricsReport metrics_from_json(const J& j) {
  MetricsReport m;
  m.amota = j.at("amota").template get<double>();
  m.amotp = j.at("amotp").template get<double>();
  for (const auto& p : j.at("mota_r_curve")) {
    m.mota_r_curve.emplace_back(p.at(0).template get<double>(), p.at(1).template get<double>());
  }
  m.fp = j.at("fp").template get<std::int64_t>();
  m.fn = j.at("fn").template get<std::int64_t>();
  m.ids = j.at("ids").template get<std::int64_t>();
  m.tq_recall = detail::optional_from_json(j.at("tq_recall"));
  m.nb_conf_mean = detail::optional_from_json(j.at("nb_conf_mean"));
  m.trk_conf_mean = detail::optional_from_json(j.at("trk_conf_mean"));
  m.seed = j.at("seed").template get<std::uint64_t>();
  m.config_hash = j.at("config_hash").template get<std::string>();
  return m;
}

// Fixed-format number for CSV and markdown: "%.9g", "NA" when undefined.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

inline constexpr const char* kMetricsCsvHeader = "amota,amotp,fp,fn,ids,tq_recall,nb_conf,trk_conf,seed,config_hash";

inline std::string metrics_csv_row(const MetricsReport& m) {
  return format_number(m.amota) + "," + format_number(m.amotp) + "," + std::to_string(m.fp) + "," +
         std::to_string(m.fn) + "," + std::to_string(m.ids) + "," + format_number(m.tq_recall) + "," +
         format_number(m.nb_conf_mean) + "," + format_number(m.trk_conf_mean) + "," + std::to_string(m.seed) +
         "," + m.config_hash;
}

// ---- statistics over episode logs (main group only) -----------------------

// Main-group forwarded queries as tracker output, one sequence per episode in
// order of first appearance. Identity is the query id; class is the argmax.
inline std::vector<EvalSequence> sequences_from_records(const std::vector<EpisodeRecord>& records) {
  std::vector<EvalSequence> out;
  std::map<std::int64_t, std::size_t> index;
  for (const auto& r : records) {
    if (!r.is_main) continue;
    auto [it, inserted] = index.try_emplace(r.episode_id, out.size());
    if (inserted) out.emplace_back();
    auto& seq = out[it->second];
    for (const auto& q : r.queries) {
      const auto& s = q.prediction.class_scores;
      const auto cls = s.empty() ? 0 : static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
      seq.outputs.push_back({r.frame, q.query_id, q.prediction.box, cls, q.prediction.confidence});
    }
    seq.frames.push_back(gt_frame(r));
  }
  return out;
}

// Share of assignments to tracked objects made to track queries. Undefined
// when no tracked object was assigned.
inline std::optional<double> tq_recall(const std::vector<EpisodeRecord>& records) {
  std::int64_t total = 0;
  std::int64_t by_track = 0;
  for (const auto& r : records) {
    if (!r.is_main) continue;
    for (const auto& p : r.assignment.pairs) {
      const auto g = std::find_if(r.gt.begin(), r.gt.end(), [&](const GtRecord& x) { return x.track_id == p.gt_track_id; });
      if (g == r.gt.end() || g->status != GtStatus::Tracked) continue;
      ++total;
      const auto q = std::find_if(r.queries.begin(), r.queries.end(),
                                  [&](const QueryState& x) { return x.query_id == p.query_id; });
      const bool track_stage = p.stage == AssignmentStage::Continuation || p.stage == AssignmentStage::SecondChance;
      if (track_stage && q != r.queries.end() && q->kind == QueryKind::Track) ++by_track;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(by_track) / static_cast<double>(total);
}

struct ConfidenceStats {
  std::optional<double> nb_conf_mean;
  std::optional<double> trk_conf_mean;
};

// Mean confidence of true-positive predictions (match_frame on the main
// group) split by the matched object's status; clip frame 0 is excluded.
inline ConfidenceStats confidence_stats(const std::vector<EpisodeRecord>& records, double dist_threshold = 2.0) {
  double nb_sum = 0.0;
  double trk_sum = 0.0;
  std::int64_t nb_n = 0;
  std::int64_t trk_n = 0;
  for (const auto& r : records) {
    if (!r.is_main) continue;
    std::vector<TrackedOutput> preds;
    for (const auto& q : r.queries) preds.push_back({r.frame, q.query_id, q.prediction.box, 0, q.prediction.confidence});
    const Frame f = gt_frame(r);
    for (const auto& m : match_frame(preds, f.objects, dist_threshold).matches) {
      const auto g = std::find_if(r.gt.begin(), r.gt.end(), [&](const GtRecord& x) { return x.track_id == m.gt_track_id; });
      if (g->status == GtStatus::Newborn) {
        nb_sum += m.confidence;
        ++nb_n;
      } else if (g->status == GtStatus::Tracked) {
        trk_sum += m.confidence;
        ++trk_n;
      }
    }
  }
  ConfidenceStats out;
  if (nb_n > 0) out.nb_conf_mean = nb_sum / static_cast<double>(nb_n);
  if (trk_n > 0) out.trk_conf_mean = trk_sum / static_cast<double>(trk_n);
  return out;
}

struct MetricsOptions {
  AmotaOptions amota;
  bool per_class = false;
};

inline MetricsReport evaluate_records(const std::vector<EpisodeRecord>& records, const MetricsOptions& opt = {}) {
  const auto seqs = sequences_from_records(records);
  const auto a = opt.per_class ? amota_amotp_per_class(seqs, opt.amota) : amota_amotp(seqs, opt.amota);
  MetricsReport m;
  m.amota = a.amota;
  m.amotp = a.amotp;
  for (const auto& c : a.curve) m.mota_r_curve.emplace_back(c.recall, c.motar);
  m.fp = a.fp;
  m.fn = a.fn;
  m.ids = a.ids;
  m.tq_recall = tq_recall(records);
  const auto cs = confidence_stats(records, opt.amota.dist_threshold);
  m.nb_conf_mean = cs.nb_conf_mean;
  m.trk_conf_mean = cs.trk_conf_mean;
  return m;
}

}  // namespace tba
