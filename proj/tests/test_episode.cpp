#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "tba/episode.hpp"
#include "tba/episode_log.hpp"

using namespace tba;

namespace {

Scene test_scene(std::uint64_t seed = 3, int frames = 20) {
  ScenarioParams p;
  p.num_frames = frames;
  p.birth_rate = 0.4;
  return generate_scenario(p, seed);
}

EpisodeSettings settings(Strategy s, EpisodeMode m, int aux = 1) {
  EpisodeSettings e;
  e.strategy = s;
  e.mode = m;
  e.lifecycle.num_aux_groups = aux;
  e.schedule = {0, 10};
  e.seed = 11;
  return e;
}

std::map<int, int> groups_per_frame(const std::vector<EpisodeRecord>& recs) {
  std::map<int, int> n;
  for (const auto& r : recs) ++n[r.frame];
  return n;
}

}  // namespace

TEST(Episode, InferenceHasOneGroup) {
  const auto recs = run_episode(test_scene(), settings(Strategy::SCA_Dropout, EpisodeMode::Inference));
  for (const auto& [f, n] : groups_per_frame(recs)) EXPECT_EQ(n, 1) << f;
  for (const auto& r : recs) {
    EXPECT_TRUE(r.is_main);
    for (const auto& p : r.assignment.pairs) EXPECT_NE(p.stage, AssignmentStage::SecondChance);
  }
}

TEST(Episode, TrainingBaselineWithAuxGroup) {
  const auto recs = run_episode(test_scene(), settings(Strategy::Baseline, EpisodeMode::Training, 1));
  for (const auto& [f, n] : groups_per_frame(recs)) EXPECT_EQ(n, f == 0 ? 1 : 2) << f;
}

TEST(Episode, FrameZeroHasNoContinuation) {
  for (auto s : {Strategy::Baseline, Strategy::SCA, Strategy::SCA_Dropout, Strategy::Detection}) {
    const auto recs = run_episode(test_scene(), settings(s, EpisodeMode::Training));
    for (const auto& r : recs) {
      if (r.frame != 0) continue;
      for (const auto& p : r.assignment.pairs) EXPECT_NE(p.stage, AssignmentStage::Continuation);
      for (const auto& q : r.queries) EXPECT_EQ(q.kind, QueryKind::Proposal);
    }
  }
}

TEST(Episode, DetectionNeverContinues) {
  const auto recs = run_episode(test_scene(), settings(Strategy::Detection, EpisodeMode::Inference));
  bool track_win = false;
  for (const auto& r : recs) {
    for (const auto& p : r.assignment.pairs) {
      EXPECT_NE(p.stage, AssignmentStage::Continuation);
      track_win = track_win || p.stage == AssignmentStage::SecondChance;
    }
  }
  EXPECT_TRUE(track_win);
}

TEST(Episode, Deterministic) {
  const auto s = settings(Strategy::SCA_Dropout, EpisodeMode::Training, 2);
  const auto a = run_episode(test_scene(), s);
  const auto b = run_episode(test_scene(), s);
  std::ostringstream x, y;
  write_jsonl(x, a);
  write_jsonl(y, b);
  EXPECT_EQ(x.str(), y.str());
}

TEST(Episode, MainGroupIsTopN) {
  const auto s = settings(Strategy::SCA_Dropout, EpisodeMode::Training, 2);
  for (const auto& r : run_episode(test_scene(), s)) {
    if (!r.is_main) continue;
    std::vector<QueryId> top;
    for (const auto& q : select_top_n(r.queries, s.lifecycle.n_tq)) top.push_back(q.query_id);
    EXPECT_EQ(r.propagated, top) << r.frame;
  }
}

TEST(Episode, AuxGroupsAreSubsetsOfTheirOwnSet) {
  const auto s = settings(Strategy::Dropout, EpisodeMode::Training, 2);
  for (const auto& r : run_episode(test_scene(), s)) {
    EXPECT_EQ(r.propagated.size(), std::min<std::size_t>(r.queries.size(), 8));
    for (auto id : r.propagated) {
      EXPECT_TRUE(std::any_of(r.queries.begin(), r.queries.end(), [&](const QueryState& q) { return q.query_id == id; }));
    }
  }
}

TEST(Episode, DropoutOffPastCutoff) {
  auto s = settings(Strategy::SCA_Dropout, EpisodeMode::Training, 2);
  s.schedule = {8, 10};
  for (const auto& [f, n] : groups_per_frame(run_episode(test_scene(), s))) EXPECT_EQ(n, 1) << f;
}

TEST(Episode, AgesAndBindingsPropagate) {
  const auto recs = run_episode(test_scene(), settings(Strategy::SCA, EpisodeMode::Training, 0));
  std::map<QueryId, int> age;
  for (const auto& r : recs) {
    for (const auto& q : r.queries) {
      EXPECT_NO_THROW(q.validate());
      if (q.kind == QueryKind::Track) {
        ASSERT_TRUE(age.count(q.query_id));
        EXPECT_EQ(q.age, age[q.query_id] + 1);
      }
    }
    age.clear();
    for (const auto& q : r.queries) age[q.query_id] = q.age;
    for (const auto& p : r.assignment.pairs) {
      if (p.stage != AssignmentStage::Continuation) continue;
      const auto q = std::find_if(r.queries.begin(), r.queries.end(), [&](const QueryState& x) { return x.query_id == p.query_id; });
      EXPECT_EQ(q->prior_gt, p.gt_track_id);
    }
  }
}

TEST(Episode, GroupIsolation) {
  const Scene scene = test_scene(5, 40);
  auto s = settings(Strategy::SCA_Dropout, EpisodeMode::Training, 2);
  const auto reference = run_episode(scene, s);

  EpisodeRunner tampered(scene, s);
  Rng noise(99);
  while (!tampered.done()) {
    tampered.step();
    for (auto& b : tampered.branches()) {
      if (b.tracks.is_main) continue;
      auto& qs = b.tracks.queries;
      std::reverse(qs.begin(), qs.end());
      TrackId bogus = 1000;
      for (auto& q : qs) {
        q.prior_gt = noise.bernoulli(0.5) ? std::optional<TrackId>(bogus++) : std::nullopt;
        q.prediction.box.cx += noise.normal(0.0, 5.0);
        q.anchor.x += 7.0;
      }
      if (!qs.empty()) qs.pop_back();
    }
  }
  std::vector<std::string> a, b;
  for (const auto& r : reference) {
    if (r.is_main) a.push_back(assignment_to_json(r.assignment).dump());
  }
  for (const auto& r : tampered.records()) {
    if (r.is_main) b.push_back(assignment_to_json(r.assignment).dump());
  }
  EXPECT_EQ(a.size(), 40u);
  EXPECT_EQ(a, b);
}

TEST(Episode, FrameRangeValidated) {
  const Scene scene = test_scene();
  auto s = settings(Strategy::Baseline, EpisodeMode::Training);
  s.start_frame = 5;
  s.end_frame = 3;
  EXPECT_THROW(EpisodeRunner(scene, s), ParameterError);
  s.start_frame = 0;
  s.end_frame = 99;
  EXPECT_THROW(EpisodeRunner(scene, s), ParameterError);
  s.end_frame = 2;
  EpisodeRunner r(scene, s);
  r.run();
  EXPECT_THROW(r.step(), StateError);
}

TEST(Episode, ClipStatusesRelativeToClipStart) {
  auto s = settings(Strategy::Baseline, EpisodeMode::Training, 0);
  s.start_frame = 10;
  s.end_frame = 15;
  const Scene scene = test_scene();
  const auto recs = run_episode(scene, s);
  ASSERT_EQ(recs.front().frame, 10);
  for (const auto& g : recs.front().gt) EXPECT_EQ(g.status, GtStatus::Initial);
  for (const auto& r : recs) {
    if (r.frame == 10) continue;
    const Frame& prev = scene.frames[static_cast<std::size_t>(r.frame - 1)];
    for (const auto& g : r.gt) {
      EXPECT_EQ(g.status, prev.find(g.track_id) ? GtStatus::Tracked : GtStatus::Newborn);
    }
  }
}

TEST(EpisodeLog, JsonlRoundTrip) {
  const auto recs = run_episode(test_scene(), settings(Strategy::SCA_Dropout, EpisodeMode::Training));
  std::ostringstream os;
  write_jsonl(os, recs);
  std::istringstream is(os.str());
  const auto back = read_jsonl(is);
  ASSERT_EQ(back.size(), recs.size());
  std::ostringstream again;
  write_jsonl(again, back);
  EXPECT_EQ(again.str(), os.str());
  std::istringstream bad("{not json}\n");
  EXPECT_THROW(read_jsonl(bad), DataError);
}

TEST(EpisodeLog, ExamplesAndLabelRates) {
  const auto recs = run_episode(test_scene(), settings(Strategy::SCA_Dropout, EpisodeMode::Training));
  std::size_t n = 0;
  for (const auto& r : recs) n += r.queries.size();
  EXPECT_EQ(examples_from_records(recs).size(), n);
  const auto rates = label_rates(recs);
  EXPECT_GT(rates.proposal_total, 0);
  EXPECT_GT(rates.track_total, 0);
  EXPECT_GT(*rates.proposal_rate(), 0.0);
  EXPECT_LT(*rates.proposal_rate(), 1.0);
}

TEST(Strategy, Names) {
  for (auto s : {Strategy::Baseline, Strategy::SCA, Strategy::Dropout, Strategy::SCA_Dropout, Strategy::Detection}) {
    EXPECT_EQ(strategy_from_string(to_string(s)), s);
  }
  EXPECT_THROW(strategy_from_string("baseline"), ParameterError);
  EXPECT_THROW(episode_mode_from_string("eval"), ParameterError);
}
