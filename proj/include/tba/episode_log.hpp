#pragma once

// Episode log: one record per (frame, group), stored as JSON lines.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tba/assignment.hpp"
#include "tba/confidence_model.hpp"
#include "tba/errors.hpp"
#include "tba/query.hpp"
#include "tba/world.hpp"

namespace tba {

// Initial: present in the first frame of the clip. Tracked: also present in
// the previous frame. Newborn: first frame of the object inside the clip.
enum class GtStatus { Initial, Newborn, Tracked };

inline const char* to_string(GtStatus s) noexcept {
  switch (s) {
    case GtStatus::Initial: return "initial";
    case GtStatus::Newborn: return "newborn";
    case GtStatus::Tracked: return "tracked";
  }
  return "?";
}

inline GtStatus gt_status_from_string(const std::string& s) {
  if (s == "initial") return GtStatus::Initial;
  if (s == "newborn") return GtStatus::Newborn;
  if (s == "tracked") return GtStatus::Tracked;
  throw DataError("unknown gt status: " + s);
}

struct GtRecord {
  TrackId track_id = 0;
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  bool visible = true;
  GtStatus status = GtStatus::Initial;

  friend bool operator==(const GtRecord&, const GtRecord&) = default;
};

struct EpisodeRecord {
  std::int64_t episode_id = 0;
  int scene_id = 0;
  int frame = 0;
  int group_id = 0;
  bool is_main = true;
  std::vector<QueryState> queries;  // forwarded set after decoding
  std::vector<FeatureVector> features;
  AssignmentResult assignment;
  std::vector<SupervisionLabel> labels;
  std::vector<QueryId> propagated;
  std::vector<GtRecord> gt;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

// Ground truth of a record as a Frame (centers, class and visibility only).
inline Frame gt_frame(const EpisodeRecord& r) {
  Frame f{r.frame, 0.0, {}};
  for (const auto& g : r.gt) {
    GtObject o;
    o.track_id = g.track_id;
    o.class_id = g.class_id;
    o.box.cx = g.cx;
    o.box.cy = g.cy;
    o.visible = g.visible;
    f.objects.push_back(o);
  }
  return f;
}

inline Json record_to_json(const EpisodeRecord& r) {
  Json queries = Json::array();
  for (const auto& q : r.queries) queries.push_back(query_to_json(q));
  Json labels = Json::array();
  for (const auto& l : r.labels) {
    labels.push_back(Json{{"query_id", l.query_id}, {"positive_gt", l.positive_gt ? Json(*l.positive_gt) : Json()}});
  }
  Json gt = Json::array();
  for (const auto& g : r.gt) {
    gt.push_back(Json{{"track_id", g.track_id},
                      {"class_id", g.class_id},
                      {"cx", g.cx},
                      {"cy", g.cy},
                      {"visible", g.visible},
                      {"status", to_string(g.status)}});
  }
  return Json{{"episode_id", r.episode_id},
              {"scene_id", r.scene_id},
              {"frame", r.frame},
              {"group_id", r.group_id},
              {"is_main", r.is_main},
              {"queries", std::move(queries)},
              {"features", r.features},
              {"assignment", assignment_to_json(r.assignment)},
              {"labels", std::move(labels)},
              {"propagated", r.propagated},
              {"gt", std::move(gt)}};
}

template <class J>
EpisodeRecord record_from_json(const J& j) {
  EpisodeRecord r;
  try {
    r.episode_id = j.at("episode_id").template get<std::int64_t>();
    r.scene_id = j.at("scene_id").template get<int>();
    r.frame = j.at("frame").template get<int>();
    r.group_id = j.at("group_id").template get<int>();
    r.is_main = j.at("is_main").template get<bool>();
    for (const auto& q : j.at("queries")) r.queries.push_back(query_from_json(q));
    r.features = j.at("features").template get<std::vector<FeatureVector>>();
    r.assignment = assignment_from_json(j.at("assignment"));
    for (const auto& l : j.at("labels")) {
      SupervisionLabel s{l.at("query_id").template get<QueryId>(), std::nullopt};
      if (!l.at("positive_gt").is_null()) s.positive_gt = l.at("positive_gt").template get<TrackId>();
      r.labels.push_back(s);
    }
    r.propagated = j.at("propagated").template get<std::vector<QueryId>>();
    for (const auto& g : j.at("gt")) {
      r.gt.push_back({g.at("track_id").template get<TrackId>(), g.at("class_id").template get<int>(),
                      g.at("cx").template get<double>(), g.at("cy").template get<double>(),
                      g.at("visible").template get<bool>(),
                      gt_status_from_string(g.at("status").template get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("episode record: ") + e.what());
  }
  if (r.features.size() != r.queries.size() || r.labels.size() != r.queries.size()) {
    throw DataError("episode record: queries, features and labels differ in length");
  }
  return r;
}

inline void write_jsonl(std::ostream& os, const std::vector<EpisodeRecord>& records) {
  for (const auto& r : records) os << record_to_json(r).dump() << '\n';
}

inline std::vector<EpisodeRecord> read_jsonl(std::istream& is) {
  std::vector<EpisodeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("episode log line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

// Every (features, label) pair in the log, all groups included.
inline std::vector<LabeledExample> examples_from_records(const std::vector<EpisodeRecord>& records) {
  std::vector<LabeledExample> out;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.queries.size(); ++i) {
      out.push_back({r.features[i], r.labels[i].positive() ? 1 : 0});
    }
  }
  return out;
}

struct LabelRates {
  std::int64_t proposal_total = 0;
  std::int64_t proposal_positive = 0;
  std::int64_t track_total = 0;
  std::int64_t track_positive = 0;

  [[nodiscard]] std::optional<double> proposal_rate() const {
    if (proposal_total == 0) return std::nullopt;
    return static_cast<double>(proposal_positive) / static_cast<double>(proposal_total);
  }
  [[nodiscard]] std::optional<double> track_rate() const {
    if (track_total == 0) return std::nullopt;
    return static_cast<double>(track_positive) / static_cast<double>(track_total);
  }

  LabelRates& operator+=(const LabelRates& o) {
    proposal_total += o.proposal_total;
    proposal_positive += o.proposal_positive;
    track_total += o.track_total;
    track_positive += o.track_positive;
    return *this;
  }

  friend bool operator==(const LabelRates&, const LabelRates&) = default;
};

inline LabelRates label_rates(const std::vector<EpisodeRecord>& records) {
  LabelRates out;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.queries.size(); ++i) {
      const bool pos = r.labels[i].positive();
      if (r.queries[i].kind == QueryKind::Proposal) {
        ++out.proposal_total;
        out.proposal_positive += pos ? 1 : 0;
      } else {
        ++out.track_total;
        out.track_positive += pos ? 1 : 0;
      }
    }
  }
  return out;
}

}  // namespace tba
