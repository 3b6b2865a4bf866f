#pragma once

// Query-set evolution across a clip: proposal grid, top-N filtering, Track
// Query Dropout groups and propagation to the next frame.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tba/assignment.hpp"
#include "tba/errors.hpp"
#include "tba/query.hpp"
#include "tba/rng.hpp"

namespace tba {

// Desk-scale defaults. The full-size model forwards 300 proposals and
// propagates 600 track queries with one auxiliary group, and disables
// dropout after 52,500 of 70,000 iterations (fraction 0.75).
struct LifecycleConfig {
  int n_pq = 8;
  int n_tq = 8;
  int num_aux_groups = 1;
  double dropout_disable_after_frac = 0.75;
  double proposal_grid_spacing = 4.0;
  int max_clip_len = 10;

  void validate() const {
    if (n_pq < 1) throw ParameterError("lifecycle.n_pq: must be >= 1");
    if (n_tq < 1) throw ParameterError("lifecycle.n_tq: must be >= 1");
    if (num_aux_groups < 0) throw ParameterError("lifecycle.num_aux_groups: must be >= 0");
    if (!(dropout_disable_after_frac >= 0.0 && dropout_disable_after_frac <= 1.0)) {
      throw ParameterError("lifecycle.dropout_disable_after_frac: must lie in [0, 1]");
    }
    if (!(proposal_grid_spacing > 0.0)) throw ParameterError("lifecycle.proposal_grid_spacing: must be > 0");
    if (max_clip_len < 2) throw ParameterError("lifecycle.max_clip_len: must be >= 2");
  }

  friend bool operator==(const LifecycleConfig&, const LifecycleConfig&) = default;
};

// Position of a training iteration in the schedule. Steps are 0-based.
struct TrainingSchedule {
  std::int64_t step = 0;
  std::int64_t total_steps = 1;
};

inline bool dropout_active(const LifecycleConfig& cfg, const TrainingSchedule& s) noexcept {
  if (cfg.num_aux_groups == 0) return false;
  return static_cast<double>(s.step) < cfg.dropout_disable_after_frac * static_cast<double>(s.total_steps);
}

inline int proposal_grid_side(double arena_half_extent, double spacing) {
  if (!(spacing > 0.0)) throw ParameterError("proposal_grid_spacing: must be > 0");
  if (!(arena_half_extent > 0.0)) throw ParameterError("arena_half_extent: must be > 0");
  return static_cast<int>(std::floor(2.0 * arena_half_extent / spacing + 1e-9)) + 1;
}

// Regular grid centered on the origin, ordered by (row, col) with rows along
// y. Query ids are frame_index * grid_size + position, unique per episode.
inline std::vector<QueryState> spawn_proposals(double arena_half_extent, const LifecycleConfig& cfg,
                                               int num_classes, int frame_index = 0) {
  if (num_classes < 1) throw ParameterError("num_classes: must be >= 1");
  const double s = cfg.proposal_grid_spacing;
  const int side = proposal_grid_side(arena_half_extent, s);
  const double offset = -0.5 * s * static_cast<double>(side - 1);
  const auto count = static_cast<QueryId>(side) * side;
  std::vector<QueryState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      QueryState q;
      q.query_id = static_cast<QueryId>(frame_index) * count + row * side + col;
      q.kind = QueryKind::Proposal;
      q.anchor = {offset + s * col, offset + s * row};
      q.prediction.box.cx = q.anchor.x;
      q.prediction.box.cy = q.anchor.y;
      q.prediction.class_scores.assign(static_cast<std::size_t>(num_classes), 1.0 / num_classes);
      q.prediction.confidence = 0.0;
      q.origin_frame = frame_index;
      out.push_back(std::move(q));
    }
  }
  return out;
}

// Highest confidence first; ties by ascending query_id.
inline std::vector<QueryState> select_top_n(std::span<const QueryState> queries, int n) {
  if (n < 1) throw ParameterError("select_top_n: n must be >= 1");
  std::vector<QueryState> sorted(queries.begin(), queries.end());
  std::sort(sorted.begin(), sorted.end(), [](const QueryState& a, const QueryState& b) {
    if (a.prediction.confidence != b.prediction.confidence) {
      return a.prediction.confidence > b.prediction.confidence;
    }
    return a.query_id < b.query_id;
  });
  if (sorted.size() > static_cast<std::size_t>(n)) sorted.resize(static_cast<std::size_t>(n));
  return sorted;
}

// Track queries followed by the forwarded proposals. With no track queries
// (the first frame of a clip, or nothing was propagated) all proposals pass.
inline std::vector<QueryState> first_frame_gate(std::span<const QueryState> track_queries,
                                                std::span<const QueryState> proposal_queries,
                                                const LifecycleConfig& cfg) {
  if (track_queries.empty()) return {proposal_queries.begin(), proposal_queries.end()};
  std::vector<QueryState> out(track_queries.begin(), track_queries.end());
  auto top = select_top_n(proposal_queries, cfg.n_pq);
  out.insert(out.end(), std::make_move_iterator(top.begin()), std::make_move_iterator(top.end()));
  return out;
}

// Uniform sample without replacement of min(n, |queries|) queries, returned
// in input order (partial Fisher-Yates over indices).
inline std::vector<QueryState> sample_aux_group(std::span<const QueryState> queries, int n, Rng& rng) {
  if (n < 1) throw ParameterError("sample_aux_group: n must be >= 1");
  const std::size_t k = std::min(queries.size(), static_cast<std::size_t>(n));
  std::vector<std::size_t> idx(queries.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<QueryState> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(queries[i]);
  return out;
}

// Group 0 keeps the top-n_tq queries; each auxiliary group is an independent
// random n_tq-subset of the same post-decode set. Past the dropout cutoff only
// the main group is produced.
inline std::vector<QueryGroup> dropout_groups(std::span<const QueryState> post_decode_queries,
                                              const LifecycleConfig& cfg, Rng& rng,
                                              const TrainingSchedule& schedule) {
  std::vector<QueryGroup> groups;
  groups.push_back({0, true, select_top_n(post_decode_queries, cfg.n_tq)});
  if (!dropout_active(cfg, schedule)) return groups;
  for (int g = 1; g <= cfg.num_aux_groups; ++g) {
    groups.push_back({g, false, sample_aux_group(post_decode_queries, cfg.n_tq, rng)});
  }
  return groups;
}

// Every query in `group` becomes a track query for the next frame. The
// binding follows this frame's assignment (a second-chance match rebinds);
// an unassigned query carries no binding forward.
inline QueryGroup propagate(const QueryGroup& group, const AssignmentResult& assignment) {
  QueryGroup next{group.group_id, group.is_main, {}};
  next.queries.reserve(group.queries.size());
  for (const auto& q : group.queries) {
    QueryState t = q;
    t.kind = QueryKind::Track;
    t.age = q.age + 1;
    if (auto p = assignment.pair_for_query(q.query_id)) {
      t.prior_gt = p->gt_track_id;
    } else {
      t.prior_gt.reset();
    }
    t.anchor = q.prediction.box.center();
    next.queries.push_back(std::move(t));
  }
  return next;
}

inline const QueryGroup& inference_mode(std::span<const QueryGroup> groups) {
  for (const auto& g : groups) {
    if (g.is_main) return g;
  }
  throw StateError("inference_mode: no main group");
}

inline Json lifecycle_to_json(const LifecycleConfig& c) {
  return Json{{"n_pq", c.n_pq},
              {"n_tq", c.n_tq},
              {"num_aux_groups", c.num_aux_groups},
              {"dropout_disable_after_frac", c.dropout_disable_after_frac},
              {"proposal_grid_spacing", c.proposal_grid_spacing},
              {"max_clip_len", c.max_clip_len}};
}

template <class J>
LifecycleConfig lifecycle_from_json(const J& j) {
  LifecycleConfig c;
  detail::FieldReader r(j, "lifecycle");
  r.get("n_pq", c.n_pq);
  r.get("n_tq", c.n_tq);
  r.get("num_aux_groups", c.num_aux_groups);
  r.get("dropout_disable_after_frac", c.dropout_disable_after_frac);
  r.get("proposal_grid_spacing", c.proposal_grid_spacing);
  r.get("max_clip_len", c.max_clip_len);
  r.finish();
  c.validate();
  return c;
}

}  // namespace tba
