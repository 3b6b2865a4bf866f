#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tba/errors.hpp"
#include "tba/geometry.hpp"
#include "tba/world.hpp"

namespace tba {

using QueryId = std::int64_t;

enum class QueryKind { Proposal, Track };

struct Prediction {
  BoxBEV box;
  std::vector<double> class_scores;
  double confidence = 0.0;

  void validate() const {
    double sum = 0.0;
    for (double s : class_scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw DataError("Prediction.class_scores: entries must lie in [0, 1]");
      sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("Prediction.class_scores: must sum to 1");
    if (!(confidence >= 0.0 && confidence <= 1.0)) throw DataError("Prediction.confidence: must lie in [0, 1]");
  }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// A proposal or track query. `anchor` is the reference point the decoder
// refines from: the grid location for a proposal, the last predicted center
// for a propagated track. `evidence` is written by the decoder.
struct QueryState {
  QueryId query_id = 0;
  QueryKind kind = QueryKind::Proposal;
  Prediction prediction;
  std::optional<TrackId> prior_gt;
  int age = 0;
  int origin_frame = 0;
  Vec2 anchor;
  double evidence = 0.0;

  void validate() const {
    if (kind == QueryKind::Proposal && (prior_gt.has_value() || age != 0)) {
      throw StateError("proposal query " + std::to_string(query_id) + " must have no prior_gt and age 0");
    }
    if (kind == QueryKind::Track && age < 1) {
      throw StateError("track query " + std::to_string(query_id) + " must have age >= 1");
    }
  }

  friend bool operator==(const QueryState&, const QueryState&) = default;
};

struct QueryGroup {
  int group_id = 0;
  bool is_main = true;
  std::vector<QueryState> queries;

  friend bool operator==(const QueryGroup&, const QueryGroup&) = default;
};

inline const char* to_string(QueryKind k) noexcept {
  return k == QueryKind::Proposal ? "proposal" : "track";
}

inline QueryKind query_kind_from_string(const std::string& s) {
  if (s == "proposal") return QueryKind::Proposal;
  if (s == "track") return QueryKind::Track;
  throw DataError("unknown query kind: " + s);
}

inline Json box_to_json(const BoxBEV& b) {
  return Json{{"cx", b.cx}, {"cy", b.cy}, {"length", b.length}, {"width", b.width}, {"yaw", b.yaw}};
}

template <class J>
BoxBEV box_from_json(const J& j) {
  BoxBEV b;
  b.cx = j.at("cx").template get<double>();
  b.cy = j.at("cy").template get<double>();
  b.length = j.at("length").template get<double>();
  b.width = j.at("width").template get<double>();
  b.yaw = j.at("yaw").template get<double>();
  return b;
}

inline Json query_to_json(const QueryState& q) {
  return Json{{"query_id", q.query_id},
              {"kind", to_string(q.kind)},
              {"prediction",
               Json{{"box", box_to_json(q.prediction.box)},
                    {"class_scores", q.prediction.class_scores},
                    {"confidence", q.prediction.confidence}}},
              {"prior_gt", q.prior_gt ? Json(*q.prior_gt) : Json(nullptr)},
              {"age", q.age},
              {"origin_frame", q.origin_frame},
              {"anchor", Json::array({q.anchor.x, q.anchor.y})},
              {"evidence", q.evidence}};
}

template <class J>
QueryState query_from_json(const J& j) {
  QueryState q;
  q.query_id = j.at("query_id").template get<QueryId>();
  q.kind = query_kind_from_string(j.at("kind").template get<std::string>());
  const auto& p = j.at("prediction");
  q.prediction.box = box_from_json(p.at("box"));
  q.prediction.class_scores = p.at("class_scores").template get<std::vector<double>>();
  q.prediction.confidence = p.at("confidence").template get<double>();
  if (!j.at("prior_gt").is_null()) q.prior_gt = j.at("prior_gt").template get<TrackId>();
  q.age = j.at("age").template get<int>();
  q.origin_frame = j.at("origin_frame").template get<int>();
  q.anchor = {j.at("anchor").at(0).template get<double>(), j.at("anchor").at(1).template get<double>()};
  q.evidence = j.at("evidence").template get<double>();
  return q;
}

}  // namespace tba
