#pragma once

// Runs the query lifecycle over a range of scene frames.
//
// Each query group is an independent branch: it owns its track queries and
// an RNG stream Rng(seed).derive("group").derive(group_id). Per frame a
// branch spawns the proposal grid, decodes it alone (detection stage),
// forwards first_frame_gate(tracks, proposals), decodes the forwarded set
// (track stage), assigns, labels, and propagates its own selection. In
// training with dropout active, the auxiliary branches are forked from the
// main branch's post-decode set at the end of the first clip frame and
// resample their own post-decode set on every later frame.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tba/assignment.hpp"
#include "tba/confidence_model.hpp"
#include "tba/episode_log.hpp"
#include "tba/errors.hpp"
#include "tba/lifecycle.hpp"
#include "tba/oracle.hpp"
#include "tba/query.hpp"
#include "tba/rng.hpp"
#include "tba/world.hpp"

namespace tba {

// Auxiliary groups come from lifecycle.num_aux_groups alone; the comparison
// driver sets it per strategy. Detection drops Stage-1 continuation entirely
// (in training and inference).
enum class Strategy { Baseline, SCA, Dropout, SCA_Dropout, Detection };

inline const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Baseline: return "Baseline";
    case Strategy::SCA: return "SCA";
    case Strategy::Dropout: return "Dropout";
    case Strategy::SCA_Dropout: return "SCA_Dropout";
    case Strategy::Detection: return "Detection";
  }
  return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "Baseline") return Strategy::Baseline;
  if (s == "SCA") return Strategy::SCA;
  if (s == "Dropout") return Strategy::Dropout;
  if (s == "SCA_Dropout") return Strategy::SCA_Dropout;
  if (s == "Detection") return Strategy::Detection;
  throw ParameterError("unknown strategy: " + s);
}

inline bool uses_second_chance(Strategy s) noexcept { return s == Strategy::SCA || s == Strategy::SCA_Dropout; }
inline bool uses_dropout(Strategy s) noexcept { return s == Strategy::Dropout || s == Strategy::SCA_Dropout; }

enum class EpisodeMode { Training, Inference };

inline const char* to_string(EpisodeMode m) noexcept { return m == EpisodeMode::Training ? "training" : "inference"; }

inline EpisodeMode episode_mode_from_string(const std::string& s) {
  if (s == "training") return EpisodeMode::Training;
  if (s == "inference") return EpisodeMode::Inference;
  throw ParameterError("unknown mode: " + s);
}

struct EpisodeSettings {
  Strategy strategy = Strategy::Baseline;
  EpisodeMode mode = EpisodeMode::Training;
  LifecycleConfig lifecycle;
  CostParams cost;
  OracleParams oracle;
  std::optional<ConfidenceModel> model;  // heuristic decoder confidence when empty
  TrainingSchedule schedule;
  std::uint64_t seed = 0;
  std::int64_t episode_id = 0;
  int start_frame = 0;
  int end_frame = -1;  // exclusive; -1 means the end of the scene
};

struct Branch {
  QueryGroup tracks;  // track queries entering the next frame
  Rng rng;
};

class EpisodeRunner {
 public:
  EpisodeRunner(const Scene& scene, EpisodeSettings settings) : scene_(scene), s_(std::move(settings)) {
    s_.lifecycle.validate();
    s_.cost.validate();
    s_.oracle.validate();
    const int n = static_cast<int>(scene_.frames.size());
    if (s_.end_frame < 0) s_.end_frame = n;
    if (s_.start_frame < 0 || s_.start_frame >= s_.end_frame || s_.end_frame > n) {
      throw ParameterError("episode: frame range [" + std::to_string(s_.start_frame) + ", " +
                           std::to_string(s_.end_frame) + ") outside the scene");
    }
    frame_ = s_.start_frame;
    branches_.push_back({QueryGroup{0, true, {}}, branch_rng(0)});
  }
  // The runner keeps a reference to the scene.
  EpisodeRunner(const Scene&&, EpisodeSettings) = delete;

  [[nodiscard]] bool done() const noexcept { return frame_ >= s_.end_frame; }
  [[nodiscard]] int next_frame() const noexcept { return frame_; }

  // Exposed so tests can tamper with auxiliary branches between steps.
  std::vector<Branch>& branches() noexcept { return branches_; }
  [[nodiscard]] const std::vector<Branch>& branches() const noexcept { return branches_; }
  [[nodiscard]] const std::vector<EpisodeRecord>& records() const noexcept { return records_; }

  // Processes one frame for every branch, main branch first.
  void step() {
    if (done()) throw StateError("episode: already finished");
    const Frame& frame = scene_.frames[static_cast<std::size_t>(frame_)];
    const bool training = s_.mode == EpisodeMode::Training;
    const bool fork = training && frame_ == s_.start_frame && dropout_active(s_.lifecycle, s_.schedule);
    std::vector<Branch> next;
    for (auto& b : branches_) {
      const Rng frng = b.rng.derive(static_cast<std::uint64_t>(frame_));
      auto [decoded, assignment] = process(b, frame, frng);
      Rng drng = frng.derive("dropout");
      std::vector<QueryGroup> selected;
      if (b.tracks.is_main && fork) {
        selected = dropout_groups(decoded.queries, s_.lifecycle, drng, s_.schedule);
      } else if (b.tracks.is_main) {
        selected.push_back({b.tracks.group_id, true, select_top_n(decoded.queries, s_.lifecycle.n_tq)});
      } else {
        selected.push_back({b.tracks.group_id, false, sample_aux_group(decoded.queries, s_.lifecycle.n_tq, drng)});
      }
      for (auto& g : selected) {
        const bool own = g.group_id == b.tracks.group_id;
        if (own) {
          for (const auto& q : g.queries) records_.back().propagated.push_back(q.query_id);
        }
        next.push_back({propagate(g, assignment), own ? b.rng : branch_rng(g.group_id)});
      }
    }
    branches_ = std::move(next);
    ++frame_;
  }

  std::vector<EpisodeRecord> run() {
    while (!done()) step();
    return records_;
  }

 private:
  [[nodiscard]] Rng branch_rng(int group_id) const {
    return Rng(s_.seed).derive("group").derive(static_cast<std::uint64_t>(group_id));
  }

  [[nodiscard]] AssignmentResult assign(std::span<const QueryState> tracks, std::span<const QueryState> proposals,
                                        const Frame& frame) const {
    if (s_.strategy == Strategy::Detection) return detection_assign(tracks, proposals, frame, s_.cost);
    if (s_.mode == EpisodeMode::Training && uses_second_chance(s_.strategy)) {
      return second_chance_assign(tracks, proposals, frame, s_.cost);
    }
    return baseline_assign(tracks, proposals, frame, s_.cost);
  }

  [[nodiscard]] std::vector<GtRecord> gt_records(const Frame& frame) const {
    std::vector<GtRecord> out;
    const Frame* prev = frame_ > s_.start_frame ? &scene_.frames[static_cast<std::size_t>(frame_ - 1)] : nullptr;
    for (const auto& o : frame.objects) {
      GtStatus st = GtStatus::Initial;
      if (prev != nullptr) st = prev->find(o.track_id) != nullptr ? GtStatus::Tracked : GtStatus::Newborn;
      out.push_back({o.track_id, o.class_id, o.box.cx, o.box.cy, o.visible, st});
    }
    return out;
  }

  std::pair<QueryGroup, AssignmentResult> process(const Branch& b, const Frame& frame, const Rng& frng) {
    const ConfidenceModel* model = s_.model ? &*s_.model : nullptr;
    const Rng decode_rng = frng.derive("decode");
    const int gid = b.tracks.group_id;
    const bool main = b.tracks.is_main;

    QueryGroup detection{gid, main,
                         spawn_proposals(scene_.params.arena_half_extent, s_.lifecycle, scene_.params.num_classes,
                                         frame_)};
    detection = decode(detection, frame, s_.oracle, model, decode_rng);
    QueryGroup forwarded{gid, main, first_frame_gate(b.tracks.queries, detection.queries, s_.lifecycle)};
    QueryGroup decoded = decode(forwarded, frame, s_.oracle, model, decode_rng);

    std::vector<QueryState> tracks;
    std::vector<QueryState> proposals;
    for (const auto& q : decoded.queries) (q.kind == QueryKind::Track ? tracks : proposals).push_back(q);
    AssignmentResult assignment = assign(tracks, proposals, frame);

    EpisodeRecord rec;
    rec.episode_id = s_.episode_id;
    rec.scene_id = scene_.scene_id;
    rec.frame = frame_;
    rec.group_id = gid;
    rec.is_main = main;
    rec.queries = decoded.queries;
    for (const auto& q : decoded.queries) rec.features.push_back(features(q, decoded, frame, s_.oracle));
    rec.assignment = assignment;
    rec.labels = supervision_labels(assignment, decoded.queries);
    rec.gt = gt_records(frame);
    records_.push_back(std::move(rec));
    return {std::move(decoded), std::move(assignment)};
  }

  const Scene& scene_;
  EpisodeSettings s_;
  int frame_ = 0;
  std::vector<Branch> branches_;
  std::vector<EpisodeRecord> records_;
};

inline std::vector<EpisodeRecord> run_episode(const Scene& scene, const EpisodeSettings& settings) {
  return EpisodeRunner(scene, settings).run();
}

}  // namespace tba
