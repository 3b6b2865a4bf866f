#include <gtest/gtest.h>

#include <sstream>

#include "tba/metrics.hpp"

using namespace tba;

namespace {

GtObject gt(TrackId id, double x, double y = 0.0, int cls = 0) {
  GtObject o;
  o.track_id = id;
  o.class_id = cls;
  o.box.cx = x;
  o.box.cy = y;
  return o;
}

TrackedOutput out(int frame, std::int64_t id, double x, double conf, double y = 0.0, int cls = 0) {
  TrackedOutput o;
  o.frame = frame;
  o.pred_track_id = id;
  o.box.cx = x;
  o.box.cy = y;
  o.class_id = cls;
  o.confidence = conf;
  return o;
}

// Two objects over five frames, each followed perfectly by its own id.
EvalSequence perfect_sequence() {
  EvalSequence s;
  for (int t = 0; t < 5; ++t) {
    s.frames.push_back(Frame{t, t / 2.0, {gt(1, t * 1.0), gt(2, -10.0 + t)}});
    s.outputs.push_back(out(t, 100, t * 1.0, 0.9));
    s.outputs.push_back(out(t, 200, -10.0 + t, 0.8));
  }
  return s;
}

}  // namespace

TEST(MatchFrame, Examples) {
  const std::vector<GtObject> g{gt(1, 0.0), gt(2, 10.0)};
  const std::vector<TrackedOutput> exact{out(0, 5, 0.0, 0.5), out(0, 6, 10.0, 0.5)};
  auto r = match_frame(exact, g);
  EXPECT_EQ(r.matches.size(), 2u);
  EXPECT_TRUE(r.fp.empty());
  EXPECT_TRUE(r.fn.empty());

  const std::vector<GtObject> one{gt(1, 0.0)};
  const std::vector<TrackedOutput> far{out(0, 5, 5.0, 0.5)};
  r = match_frame(far, one);
  EXPECT_EQ(r.fp, (std::vector<std::int64_t>{5}));
  EXPECT_EQ(r.fn, (std::vector<TrackId>{1}));

  const std::vector<TrackedOutput> greedy{out(0, 5, 1.5, 0.9), out(0, 6, 0.5, 0.5)};
  r = match_frame(greedy, one);
  ASSERT_EQ(r.matches.size(), 1u);
  EXPECT_EQ(r.matches[0].pred_track_id, 5);
  EXPECT_EQ(r.fp, (std::vector<std::int64_t>{6}));
}

TEST(MatchFrame, TieBreaks) {
  const std::vector<GtObject> g{gt(9, 1.0), gt(3, -1.0)};
  // Equal confidence: lower pred id picks first; equal distance: lower gt id.
  const std::vector<TrackedOutput> p{out(0, 8, 0.0, 0.5), out(0, 4, 0.0, 0.5)};
  const auto r = match_frame(p, g);
  ASSERT_EQ(r.matches.size(), 2u);
  EXPECT_EQ(r.matches[0].pred_track_id, 4);
  EXPECT_EQ(r.matches[0].gt_track_id, 3);
  EXPECT_EQ(r.matches[1].gt_track_id, 9);
}

TEST(ClearMot, PerfectTracker) {
  const auto s = perfect_sequence();
  const auto acc = accumulate_clearmot(s.outputs, s.frames, 1.0);
  EXPECT_EQ(acc.fp, 0);
  EXPECT_EQ(acc.fn, 0);
  EXPECT_EQ(acc.ids, 0);
  EXPECT_EQ(acc.gt_count, 10);
  EXPECT_EQ(acc.match_count, 10);
}

TEST(ClearMot, IdSwitch) {
  EvalSequence s;
  for (int t = 0; t < 5; ++t) {
    s.frames.push_back(Frame{t, 0.0, {gt(1, 0.0)}});
    s.outputs.push_back(out(t, t < 3 ? 7 : 9, 0.0, 0.9));
  }
  EXPECT_EQ(accumulate_clearmot(s.outputs, s.frames, 1.0).ids, 1);
}

TEST(ClearMot, OcclusionGapIsNotASwitch) {
  EvalSequence s;
  for (int t = 0; t < 5; ++t) {
    s.frames.push_back(Frame{t, 0.0, {gt(1, 0.0)}});
    if (t != 2) s.outputs.push_back(out(t, 7, 0.0, 0.9));
  }
  const auto acc = accumulate_clearmot(s.outputs, s.frames, 1.0);
  EXPECT_EQ(acc.ids, 0);
  EXPECT_EQ(acc.fn, 1);
}

TEST(Motar, Formula) {
  MotAccumulator acc;
  acc.recall_threshold = 0.7;
  acc.gt_count = 100;
  acc.fp = 10;
  acc.fn = 35;
  acc.ids = 2;
  EXPECT_NEAR(*motar(acc), 0.7571, 1e-4);
  EXPECT_NEAR(*motar(acc), 1.0 - 17.0 / 70.0, 1e-12);

  acc.fp = 0;
  acc.ids = 0;
  acc.fn = 30;
  EXPECT_EQ(*motar(acc), 1.0);

  acc.fp = 500;
  EXPECT_EQ(*motar(acc), 0.0);

  acc.gt_count = 0;
  EXPECT_FALSE(motar(acc).has_value());
}

TEST(Amota, PerfectTracker) {
  const auto r = amota_amotp(perfect_sequence());
  EXPECT_EQ(r.amota, 1.0);
  EXPECT_EQ(r.amotp, 0.0);
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.fn, 0);
  EXPECT_EQ(r.ids, 0);
  EXPECT_EQ(r.curve.size(), 40u);
  for (const auto& c : r.curve) EXPECT_TRUE(c.achieved);
}

TEST(Amota, EmptyOutput) {
  auto s = perfect_sequence();
  s.outputs.clear();
  const auto r = amota_amotp(s);
  EXPECT_EQ(r.amota, 0.0);
  EXPECT_EQ(r.amotp, 2.0);
  EXPECT_EQ(r.fn, 10);
}

TEST(Amota, TwoThresholdHandCase) {
  // Two GT; A (0.9) and B (0.5) are true positives, C (0.5) is a false
  // positive. r = 0.5 keeps A only: MOTAR 1. r = 1 keeps all: MOTAR 0.5.
  EvalSequence s;
  s.frames.push_back(Frame{0, 0.0, {gt(1, 0.0), gt(2, 10.0)}});
  s.outputs = {out(0, 1, 0.0, 0.9), out(0, 2, 10.0, 0.5), out(0, 3, 30.0, 0.5)};
  AmotaOptions opt;
  opt.num_thresholds = 2;
  const auto r = amota_amotp(s, opt);
  ASSERT_EQ(r.curve.size(), 2u);
  EXPECT_EQ(r.curve[0].motar, 1.0);
  EXPECT_EQ(r.curve[1].motar, 0.5);
  EXPECT_EQ(r.amota, 0.75);
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.fn, 1);
}

TEST(Amota, Errors) {
  EvalSequence s;
  s.frames.push_back(Frame{0, 0.0, {}});
  EXPECT_THROW(amota_amotp(s), DataError);
  AmotaOptions opt;
  opt.num_thresholds = 1;
  EXPECT_THROW(amota_amotp(perfect_sequence(), opt), ParameterError);
}

TEST(Amota, BoundsOnRandomTrackers) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    EvalSequence s;
    for (int t = 0; t < 8; ++t) {
      Frame f{t, 0.0, {}};
      for (int k = 0; k < 3; ++k) {
        f.objects.push_back(gt(k, 5.0 * k + 0.3 * t));
        if (rng.bernoulli(0.7)) {
          s.outputs.push_back(out(t, k + 10 * static_cast<int>(rng.uniform_int(2)), 5.0 * k + 0.3 * t + rng.normal(0, 1),
                                  rng.uniform()));
        }
      }
      if (rng.bernoulli(0.3)) s.outputs.push_back(out(t, 99, rng.uniform(-20, 20), rng.uniform()));
      s.frames.push_back(f);
    }
    const auto r = amota_amotp(s);
    EXPECT_GE(r.amota, 0.0);
    EXPECT_LE(r.amota, 1.0);
    EXPECT_GE(r.amotp, 0.0);
    EXPECT_LE(r.amotp, 2.0);
  }
}

TEST(Amota, PerClassAveragesClasses) {
  EvalSequence s;
  s.frames.push_back(Frame{0, 0.0, {gt(1, 0.0, 0.0, 0), gt(2, 10.0, 0.0, 1)}});
  s.outputs = {out(0, 1, 0.0, 0.9, 0.0, 0)};
  const std::vector<EvalSequence> seqs{s};
  const auto r = amota_amotp_per_class(seqs);
  EXPECT_EQ(r.amota, 0.5);
  EXPECT_EQ(r.fn, 1);
}

namespace {

EpisodeRecord record(int frame, std::vector<QueryState> qs, std::vector<AssignedPair> pairs,
                     std::vector<GtRecord> g, bool main = true) {
  EpisodeRecord r;
  r.frame = frame;
  r.is_main = main;
  r.group_id = main ? 0 : 1;
  r.queries = std::move(qs);
  r.assignment.pairs = std::move(pairs);
  r.gt = std::move(g);
  return r;
}

QueryState q(QueryId id, QueryKind k, double x, double conf) {
  QueryState s;
  s.query_id = id;
  s.kind = k;
  s.age = k == QueryKind::Track ? 1 : 0;
  s.prediction.box.cx = x;
  s.prediction.class_scores = {1.0};
  s.prediction.confidence = conf;
  return s;
}

GtRecord g(TrackId id, double x, GtStatus st) { return GtRecord{id, 0, x, 0.0, true, st}; }

}  // namespace

TEST(TqRecall, Cases) {
  using S = AssignmentStage;
  const auto tracked = record(1, {q(0, QueryKind::Track, 0, 0.9)}, {{0, 1, S::Continuation}},
                              {g(1, 0, GtStatus::Tracked)});
  EXPECT_EQ(tq_recall({tracked}), 1.0);
  const auto by_prop = record(1, {q(5, QueryKind::Proposal, 0, 0.9)}, {{5, 1, S::FirstStage}},
                              {g(1, 0, GtStatus::Tracked)});
  EXPECT_EQ(tq_recall({by_prop}), 0.0);
  EXPECT_EQ(tq_recall({tracked, by_prop}), 0.5);
  // Newborn objects and aux groups do not count.
  const auto newborn = record(1, {q(5, QueryKind::Proposal, 0, 0.9)}, {{5, 1, S::FirstStage}},
                              {g(1, 0, GtStatus::Newborn)});
  EXPECT_FALSE(tq_recall({newborn}).has_value());
  auto aux = by_prop;
  aux.is_main = false;
  EXPECT_EQ(tq_recall({tracked, aux}), 1.0);
}

TEST(ConfidenceStats, NewbornAndTracked) {
  const auto r = record(3,
                        {q(0, QueryKind::Track, 0.0, 0.8), q(1, QueryKind::Proposal, 10.0, 0.3),
                         q(2, QueryKind::Proposal, 20.0, 0.3), q(3, QueryKind::Proposal, 50.0, 0.9)},
                        {}, {g(1, 0.0, GtStatus::Tracked), g(2, 10.0, GtStatus::Newborn), g(3, 20.0, GtStatus::Newborn)});
  const auto cs = confidence_stats({r});
  EXPECT_NEAR(*cs.nb_conf_mean, 0.3, 1e-15);
  EXPECT_NEAR(*cs.trk_conf_mean, 0.8, 1e-15);
  // Clip frame 0 objects are Initial and count for neither.
  const auto first = record(0, {q(0, QueryKind::Proposal, 0.0, 0.8)}, {}, {g(1, 0.0, GtStatus::Initial)});
  const auto none = confidence_stats({first});
  EXPECT_FALSE(none.nb_conf_mean.has_value());
  EXPECT_FALSE(none.trk_conf_mean.has_value());
}

TEST(Report, JsonAndCsv) {
  MetricsReport m;
  m.amota = 0.5;
  m.mota_r_curve = {{0.5, 1.0}, {1.0, 0.0}};
  m.tq_recall = 0.25;
  m.config_hash = "00000000000000ab";
  EXPECT_EQ(metrics_from_json(Json::parse(metrics_to_json(m).dump())), m);
  EXPECT_EQ(metrics_csv_row(m), "0.5,0,0,0,0,0.25,NA,NA,0,00000000000000ab");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
}

TEST(Report, EvaluateRecordsPerfect) {
  std::vector<EpisodeRecord> recs;
  for (int t = 0; t < 4; ++t) {
    recs.push_back(record(t, {q(0, QueryKind::Track, 1.0 * t, 0.9)}, {{0, 1, AssignmentStage::Continuation}},
                          {g(1, 1.0 * t, t == 0 ? GtStatus::Initial : GtStatus::Tracked)}));
  }
  const auto m = evaluate_records(recs);
  EXPECT_EQ(m.amota, 1.0);
  EXPECT_EQ(m.amotp, 0.0);
  EXPECT_EQ(m.tq_recall, 1.0);
  EXPECT_NEAR(*m.trk_conf_mean, 0.9, 1e-15);
  EXPECT_FALSE(m.nb_conf_mean.has_value());
}
