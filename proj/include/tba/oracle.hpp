#pragma once

// Evidence-based stand-in for the transformer decoder.
//
// A track query still bound to a present object re-detects it. Any other
// query (a proposal, or a track query without a live binding) looks for the
// nearest visible object within the capture radius of its anchor. A query
// that captures an object already owned by a bound track query is
// suppressed: its heuristic confidence is scaled by (1 - suppression).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tba/confidence_model.hpp"
#include "tba/errors.hpp"
#include "tba/query.hpp"
#include "tba/rng.hpp"
#include "tba/world.hpp"

namespace tba {

struct OracleParams {
  double pos_noise_std = 0.3;       // bound track queries, meters
  double proposal_noise_std = 0.15;  // capturing queries, meters
  double proposal_residual = 0.1;    // fraction of the anchor offset left after refinement
  double proposal_capture_radius = 3.0;
  double suppression_strength = 0.6;
  double occluded_evidence_scale = 0.3;
  double class_confusion = 0.05;
  double class_peak = 0.9;
  double track_evidence = 0.9;
  double proposal_evidence = 0.85;
  double background_confidence = 0.02;
  double age_norm_frames = 10.0;
  double dist_norm_radius = 4.0;  // matches the default gate radius

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw ParameterError(std::string("oracle.") + name + ": must lie in [0, 1]");
    };
    if (!(pos_noise_std >= 0.0)) throw ParameterError("oracle.pos_noise_std: must be >= 0");
    if (!(proposal_noise_std >= 0.0)) throw ParameterError("oracle.proposal_noise_std: must be >= 0");
    unit(proposal_residual, "proposal_residual");
    if (!(proposal_capture_radius > 0.0)) throw ParameterError("oracle.proposal_capture_radius: must be > 0");
    unit(suppression_strength, "suppression_strength");
    unit(occluded_evidence_scale, "occluded_evidence_scale");
    unit(class_confusion, "class_confusion");
    unit(class_peak, "class_peak");
    unit(track_evidence, "track_evidence");
    unit(proposal_evidence, "proposal_evidence");
    unit(background_confidence, "background_confidence");
    if (!(age_norm_frames > 0.0)) throw ParameterError("oracle.age_norm_frames: must be > 0");
    if (!(dist_norm_radius > 0.0)) throw ParameterError("oracle.dist_norm_radius: must be > 0");
  }

  friend bool operator==(const OracleParams&, const OracleParams&) = default;
};

namespace detail {

// gt_track_id -> query_id of the track query bound to it, for objects present in the frame.
inline std::unordered_map<TrackId, QueryId> live_bindings(const QueryGroup& group, const Frame& frame) {
  std::unordered_map<TrackId, QueryId> out;
  for (const auto& q : group.queries) {
    if (q.kind == QueryKind::Track && q.prior_gt && frame.find(*q.prior_gt) != nullptr) {
      out.emplace(*q.prior_gt, q.query_id);
    }
  }
  return out;
}

inline bool is_live_bound(const QueryState& q, const Frame& frame) {
  return q.kind == QueryKind::Track && q.prior_gt && frame.find(*q.prior_gt) != nullptr;
}

inline const GtObject* nearest_object(const Vec2& p, const Frame& frame, bool visible_only, double radius,
                                      double* dist_out = nullptr) {
  const GtObject* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& o : frame.objects) {
    if (visible_only && !o.visible) continue;
    const double d = distance(p, o.box.center());
    if (d > radius) continue;
    if (d < best_d || (d == best_d && best != nullptr && o.track_id < best->track_id)) {
      best = &o;
      best_d = d;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

inline std::vector<double> peaked_scores(std::size_t k, int true_class, const OracleParams& p, Rng& rng) {
  std::vector<double> s(k, 0.0);
  if (k == 1) {
    s[0] = 1.0;
    return s;
  }
  auto cls = static_cast<std::size_t>(true_class);
  if (rng.bernoulli(p.class_confusion)) {
    // A wrong class, uniformly among the others.
    const auto other = static_cast<std::size_t>(rng.uniform_int(k - 1));
    cls = other >= cls ? other + 1 : other;
  }
  const double rest = (1.0 - p.class_peak) / static_cast<double>(k - 1);
  std::fill(s.begin(), s.end(), rest);
  s[cls] = p.class_peak;
  return s;
}

}  // namespace detail

// The five confidence features, each in [0, 1].
inline FeatureVector features(const QueryState& query, const QueryGroup& group, const Frame& frame,
                              const OracleParams& params) {
  FeatureVector f{};
  f[0] = query.kind == QueryKind::Track ? 1.0 : 0.0;
  f[1] = std::min(static_cast<double>(query.age), params.age_norm_frames) / params.age_norm_frames;
  double d = 0.0;
  const GtObject* g = detail::nearest_object(query.prediction.box.center(), frame, false,
                                             std::numeric_limits<double>::infinity(), &d);
  f[2] = g == nullptr ? 1.0 : std::min(d / params.dist_norm_radius, 1.0);
  f[3] = 0.0;
  if (g != nullptr && d <= params.dist_norm_radius) {
    for (const auto& other : group.queries) {
      if (other.query_id != query.query_id && other.kind == QueryKind::Track && other.prior_gt == g->track_id) {
        f[3] = 1.0;
        break;
      }
    }
  }
  f[4] = std::clamp(query.evidence, 0.0, 1.0);
  return f;
}

// Fills predictions, evidence and confidence. Noise for a query comes from
// rng.derive(query_id), so a query decodes identically whatever else is in
// the group.
inline QueryGroup decode(const QueryGroup& group, const Frame& frame, const OracleParams& params,
                         const ConfidenceModel* model, const Rng& rng) {
  params.validate();
  const auto bound = detail::live_bindings(group, frame);
  QueryGroup out = group;
  std::vector<char> suppressed(out.queries.size(), 0);
  std::vector<char> background(out.queries.size(), 0);

  for (std::size_t i = 0; i < out.queries.size(); ++i) {
    auto& q = out.queries[i];
    Rng qrng = rng.derive(static_cast<std::uint64_t>(q.query_id));
    const std::size_t k = std::max<std::size_t>(q.prediction.class_scores.size(), 1);
    auto& box = q.prediction.box;

    if (detail::is_live_bound(q, frame)) {
      const GtObject& g = *frame.find(*q.prior_gt);
      q.prediction.class_scores = detail::peaked_scores(k, g.class_id, params, qrng);
      box = g.box;
      box.cx += qrng.normal(0.0, params.pos_noise_std);
      box.cy += qrng.normal(0.0, params.pos_noise_std);
      q.evidence = params.track_evidence * (g.visible ? 1.0 : params.occluded_evidence_scale);
      continue;
    }

    double d = 0.0;
    const GtObject* g = detail::nearest_object(q.anchor, frame, true, params.proposal_capture_radius, &d);
    if (g == nullptr) {
      box.cx = q.anchor.x;
      box.cy = q.anchor.y;
      q.prediction.class_scores.assign(k, 1.0 / static_cast<double>(k));
      q.evidence = 0.0;
      background[i] = 1;
      continue;
    }
    q.prediction.class_scores = detail::peaked_scores(k, g->class_id, params, qrng);
    const double rx = params.proposal_residual * (q.anchor.x - g->box.cx);
    const double ry = params.proposal_residual * (q.anchor.y - g->box.cy);
    box = g->box;
    box.cx += rx + qrng.normal(0.0, params.proposal_noise_std);
    box.cy += ry + qrng.normal(0.0, params.proposal_noise_std);
    q.evidence = params.proposal_evidence * (1.0 - 0.5 * d / params.proposal_capture_radius);
    suppressed[i] = bound.count(g->track_id) ? 1 : 0;
  }

  for (std::size_t i = 0; i < out.queries.size(); ++i) {
    auto& q = out.queries[i];
    if (model != nullptr) {
      const auto f = features(q, out, frame, params);
      q.prediction.confidence = predict_confidence(*model, f);
    } else if (background[i]) {
      q.prediction.confidence = params.background_confidence;
    } else {
      q.prediction.confidence = q.evidence * (suppressed[i] ? 1.0 - params.suppression_strength : 1.0);
    }
  }
  return out;
}

inline Json oracle_params_to_json(const OracleParams& p) {
  return Json{{"pos_noise_std", p.pos_noise_std},
              {"proposal_noise_std", p.proposal_noise_std},
              {"proposal_residual", p.proposal_residual},
              {"proposal_capture_radius", p.proposal_capture_radius},
              {"suppression_strength", p.suppression_strength},
              {"occluded_evidence_scale", p.occluded_evidence_scale},
              {"class_confusion", p.class_confusion},
              {"class_peak", p.class_peak},
              {"track_evidence", p.track_evidence},
              {"proposal_evidence", p.proposal_evidence},
              {"background_confidence", p.background_confidence},
              {"age_norm_frames", p.age_norm_frames},
              {"dist_norm_radius", p.dist_norm_radius}};
}

template <class J>
OracleParams oracle_params_from_json(const J& j) {
  OracleParams p;
  detail::FieldReader r(j, "oracle");
  r.get("pos_noise_std", p.pos_noise_std);
  r.get("proposal_noise_std", p.proposal_noise_std);
  r.get("proposal_residual", p.proposal_residual);
  r.get("proposal_capture_radius", p.proposal_capture_radius);
  r.get("suppression_strength", p.suppression_strength);
  r.get("occluded_evidence_scale", p.occluded_evidence_scale);
  r.get("class_confusion", p.class_confusion);
  r.get("class_peak", p.class_peak);
  r.get("track_evidence", p.track_evidence);
  r.get("proposal_evidence", p.proposal_evidence);
  r.get("background_confidence", p.background_confidence);
  r.get("age_norm_frames", p.age_norm_frames);
  r.get("dist_norm_radius", p.dist_norm_radius);
  r.finish();
  p.validate();
  return p;
}

}  // namespace tba
