#pragma once

// Ground-truth assignment for tracking-by-attention supervision.
//
// Stage 1 (continuation) binds every track query to the ground-truth object
// it already owns, if that object is still present. Stage 2 matches the
// remaining ground truth against a candidate pool with the Hungarian
// matcher:
//   baseline       - proposal queries only
//   second chance  - proposal queries, then track queries Stage 1 left free
//   detection      - no Stage 1; proposals and all track queries
// Pairs whose cost reaches big_m are dropped after matching.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tba/errors.hpp"
#include "tba/hungarian.hpp"
#include "tba/query.hpp"
#include "tba/world.hpp"

namespace tba {

struct CostParams {
  double w_class = 1.0;
  double w_center = 0.25;  // per meter
  double gate_radius = 4.0;
  double big_m = 1e6;

  void validate() const {
    if (!(w_class >= 0.0)) throw ParameterError("cost.w_class: must be >= 0");
    if (!(w_center >= 0.0)) throw ParameterError("cost.w_center: must be >= 0");
    if (!(gate_radius > 0.0)) throw ParameterError("cost.gate_radius: must be > 0");
    if (!(big_m > 0.0) || !std::isfinite(big_m)) throw ParameterError("cost.big_m: must be finite and > 0");
  }

  friend bool operator==(const CostParams&, const CostParams&) = default;
};

enum class AssignmentStage { Continuation, FirstStage, SecondChance };

inline const char* to_string(AssignmentStage s) noexcept {
  switch (s) {
    case AssignmentStage::Continuation: return "continuation";
    case AssignmentStage::FirstStage: return "first_stage";
    case AssignmentStage::SecondChance: return "second_chance";
  }
  return "?";
}

inline AssignmentStage stage_from_string(const std::string& s) {
  if (s == "continuation") return AssignmentStage::Continuation;
  if (s == "first_stage") return AssignmentStage::FirstStage;
  if (s == "second_chance") return AssignmentStage::SecondChance;
  throw DataError("unknown assignment stage: " + s);
}

struct AssignedPair {
  QueryId query_id = 0;
  TrackId gt_track_id = 0;
  AssignmentStage stage = AssignmentStage::FirstStage;

  friend bool operator==(const AssignedPair&, const AssignedPair&) = default;
};

struct AssignmentResult {
  std::vector<AssignedPair> pairs;  // Stage 1 in track order, then Stage 2 in GT order
  std::vector<QueryId> unassigned_queries;
  std::vector<TrackId> unassigned_gt;
  // Stage-2 objective: every GT entering Stage 2 contributes its pair cost,
  // or big_m if it ends up unassigned.
  double total_second_stage_cost = 0.0;

  [[nodiscard]] std::optional<AssignedPair> pair_for_query(QueryId id) const {
    for (const auto& p : pairs) {
      if (p.query_id == id) return p;
    }
    return std::nullopt;
  }

  friend bool operator==(const AssignmentResult&, const AssignmentResult&) = default;
};

inline double match_cost(const Prediction& pred, const GtObject& gt, const CostParams& cp) {
  const double d = center_distance(pred.box, gt.box);
  if (d > cp.gate_radius) return cp.big_m;
  if (gt.class_id < 0 || static_cast<std::size_t>(gt.class_id) >= pred.class_scores.size()) {
    throw DataError("match_cost: class_id " + std::to_string(gt.class_id) + " outside class_scores");
  }
  return cp.w_class * (1.0 - pred.class_scores[static_cast<std::size_t>(gt.class_id)]) + cp.w_center * d;
}

namespace detail {

struct AssignOptions {
  bool continuation = true;
  bool second_chance = false;
};

inline AssignmentResult assign(std::span<const QueryState> tracks, std::span<const QueryState> proposals,
                               const Frame& frame, const CostParams& cp, AssignOptions opt) {
  {
    std::unordered_set<QueryId> ids;
    for (auto span : {tracks, proposals}) {
      for (const auto& q : span) {
        if (!ids.insert(q.query_id).second) {
          throw DataError("assignment: duplicate query_id " + std::to_string(q.query_id));
        }
      }
    }
  }

  AssignmentResult out;
  std::unordered_set<QueryId> assigned_queries;
  std::unordered_set<TrackId> taken_gt;
  std::vector<const QueryState*> free_tracks;

  if (opt.continuation) {
    std::unordered_set<TrackId> claimed;
    for (const auto& t : tracks) {
      if (!t.prior_gt) continue;
      if (!claimed.insert(*t.prior_gt).second) {
        throw DataError("assignment: two track queries claim gt_track_id " + std::to_string(*t.prior_gt));
      }
    }
    for (const auto& t : tracks) {
      if (t.prior_gt && frame.find(*t.prior_gt) != nullptr) {
        out.pairs.push_back({t.query_id, *t.prior_gt, AssignmentStage::Continuation});
        assigned_queries.insert(t.query_id);
        taken_gt.insert(*t.prior_gt);
      } else {
        free_tracks.push_back(&t);
      }
    }
  } else {
    for (const auto& t : tracks) free_tracks.push_back(&t);
  }

  std::vector<const GtObject*> gts;
  for (const auto& o : frame.objects) {
    if (!taken_gt.count(o.track_id)) gts.push_back(&o);
  }
  std::vector<const QueryState*> candidates;
  for (const auto& p : proposals) candidates.push_back(&p);
  if (opt.second_chance) {
    candidates.insert(candidates.end(), free_tracks.begin(), free_tracks.end());
  }

  std::vector<std::optional<double>> kept(gts.size());
  if (!gts.empty() && !candidates.empty()) {
    CostMatrix cost(gts.size(), candidates.size());
    for (std::size_t r = 0; r < gts.size(); ++r) {
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        cost(r, c) = match_cost(candidates[c]->prediction, *gts[r], cp);
      }
    }
    for (const auto& m : hungarian(cost)) {
      const double c = cost(m.row, m.col);
      if (c >= cp.big_m) continue;
      const QueryState& q = *candidates[m.col];
      out.pairs.push_back({q.query_id, gts[m.row]->track_id,
                           q.kind == QueryKind::Track ? AssignmentStage::SecondChance
                                                      : AssignmentStage::FirstStage});
      assigned_queries.insert(q.query_id);
      kept[m.row] = c;
    }
  }
  out.total_second_stage_cost = 0.0;
  for (std::size_t r = 0; r < gts.size(); ++r) {
    if (kept[r]) {
      out.total_second_stage_cost += *kept[r];
    } else {
      out.total_second_stage_cost += cp.big_m;
      out.unassigned_gt.push_back(gts[r]->track_id);
    }
  }
  for (auto span : {tracks, proposals}) {
    for (const auto& q : span) {
      if (!assigned_queries.count(q.query_id)) out.unassigned_queries.push_back(q.query_id);
    }
  }
  return out;
}

}  // namespace detail

inline AssignmentResult baseline_assign(std::span<const QueryState> track_queries,
                                        std::span<const QueryState> proposal_queries, const Frame& gt_frame,
                                        const CostParams& cp) {
  return detail::assign(track_queries, proposal_queries, gt_frame, cp, {true, false});
}

inline AssignmentResult second_chance_assign(std::span<const QueryState> track_queries,
                                             std::span<const QueryState> proposal_queries,
                                             const Frame& gt_frame, const CostParams& cp) {
  return detail::assign(track_queries, proposal_queries, gt_frame, cp, {true, true});
}

// Detection-style supervision: identities are not carried, every query
// competes in a single matching stage.
inline AssignmentResult detection_assign(std::span<const QueryState> track_queries,
                                         std::span<const QueryState> proposal_queries, const Frame& gt_frame,
                                         const CostParams& cp) {
  return detail::assign(track_queries, proposal_queries, gt_frame, cp, {false, true});
}

struct SupervisionLabel {
  QueryId query_id = 0;
  std::optional<TrackId> positive_gt;  // empty means negative

  [[nodiscard]] bool positive() const noexcept { return positive_gt.has_value(); }

  friend bool operator==(const SupervisionLabel&, const SupervisionLabel&) = default;
};

inline std::vector<SupervisionLabel> supervision_labels(const AssignmentResult& result,
                                                        std::span<const QueryState> all_queries) {
  std::unordered_map<QueryId, TrackId> positive;
  for (const auto& p : result.pairs) positive.emplace(p.query_id, p.gt_track_id);
  std::unordered_set<QueryId> known;
  for (const auto& q : all_queries) known.insert(q.query_id);
  for (const auto& p : result.pairs) {
    if (!known.count(p.query_id)) {
      throw DataError("supervision_labels: query " + std::to_string(p.query_id) + " not in query set");
    }
  }
  for (QueryId id : result.unassigned_queries) {
    if (!known.count(id)) throw DataError("supervision_labels: query " + std::to_string(id) + " not in query set");
  }
  std::vector<SupervisionLabel> labels;
  labels.reserve(all_queries.size());
  for (const auto& q : all_queries) {
    SupervisionLabel l{q.query_id, std::nullopt};
    if (auto it = positive.find(q.query_id); it != positive.end()) l.positive_gt = it->second;
    labels.push_back(l);
  }
  return labels;
}

// ---- JSON ----------------------------------------------------------------

inline Json assignment_to_json(const AssignmentResult& r) {
  Json pairs = Json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back(Json{{"query_id", p.query_id}, {"gt_track_id", p.gt_track_id}, {"stage", to_string(p.stage)}});
  }
  return Json{{"pairs", std::move(pairs)},
              {"unassigned_queries", r.unassigned_queries},
              {"unassigned_gt", r.unassigned_gt},
              {"total_second_stage_cost", r.total_second_stage_cost}};
}

template <class J>
AssignmentResult assignment_from_json(const J& j) {
  AssignmentResult r;
  for (const auto& p : j.at("pairs")) {
    r.pairs.push_back({p.at("query_id").template get<QueryId>(), p.at("gt_track_id").template get<TrackId>(),
                       stage_from_string(p.at("stage").template get<std::string>())});
  }
  r.unassigned_queries = j.at("unassigned_queries").template get<std::vector<QueryId>>();
  r.unassigned_gt = j.at("unassigned_gt").template get<std::vector<TrackId>>();
  r.total_second_stage_cost = j.at("total_second_stage_cost").template get<double>();
  return r;
}

inline Json cost_params_to_json(const CostParams& c) {
  return Json{{"w_class", c.w_class}, {"w_center", c.w_center}, {"gate_radius", c.gate_radius}, {"big_m", c.big_m}};
}

template <class J>
CostParams cost_params_from_json(const J& j) {
  CostParams c;
  detail::FieldReader r(j, "cost");
  r.get("w_class", c.w_class);
  r.get("w_center", c.w_center);
  r.get("gate_radius", c.gate_radius);
  r.get("big_m", c.big_m);
  r.finish();
  c.validate();
  return c;
}

}  // namespace tba
