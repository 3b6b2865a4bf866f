#include <gtest/gtest.h>

#include <map>
#include <numbers>
#include <set>

#include "tba/world.hpp"

using namespace tba;

namespace {

Scene scene_with_frames(int n) {
  Scene s;
  for (int i = 0; i < n; ++i) s.frames.push_back(Frame{i, i / 2.0, {}});
  return s;
}

}  // namespace

TEST(World, StaticPopulation) {
  ScenarioParams p;
  p.birth_rate = 0.0;
  p.death_prob = 0.0;
  p.occlusion_prob = 0.0;
  p.initial_objects = 3;
  p.num_frames = 40;
  p.speed_max = 0.0;  // nobody drifts out of the arena
  p.motion_noise_std = 0.0;
  const auto s = generate_scenario(p, 17);
  ASSERT_EQ(s.frames.size(), 40u);
  std::set<TrackId> ids;
  for (const auto& f : s.frames) {
    EXPECT_EQ(f.objects.size(), 3u);
    for (const auto& o : f.objects) ids.insert(o.track_id);
  }
  EXPECT_EQ(ids.size(), 3u);
}

TEST(World, DeterministicSerialization) {
  ScenarioParams p;
  EXPECT_EQ(scene_to_json(generate_scenario(p, 5, 2)).dump(), scene_to_json(generate_scenario(p, 5, 2)).dump());
  EXPECT_NE(scene_to_json(generate_scenario(p, 5, 2)).dump(), scene_to_json(generate_scenario(p, 6, 2)).dump());
}

TEST(World, MeanBirthsMatchPoissonRate) {
  ScenarioParams p;
  p.birth_rate = 0.5;
  p.num_frames = 40;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) total += count_births(generate_scenario(p, seed));
  const double mean = total / 1000.0;
  EXPECT_GE(mean, 18.0);
  EXPECT_LE(mean, 22.0);
}

TEST(World, Invariants) {
  ScenarioParams p;
  p.birth_rate = 0.6;
  p.occlusion_prob = 0.2;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_scenario(p, seed, static_cast<int>(seed));
    std::map<TrackId, std::pair<int, int>> life;  // first, last frame
    std::map<TrackId, int> appearances;
    for (const auto& f : s.frames) {
      EXPECT_DOUBLE_EQ(f.timestamp_s, f.index / p.frame_rate_hz);
      std::set<TrackId> in_frame;
      for (const auto& o : f.objects) {
        EXPECT_TRUE(in_frame.insert(o.track_id).second);
        EXPECT_GE(o.class_id, 0);
        EXPECT_LT(o.class_id, p.num_classes);
        EXPECT_GE(o.box.yaw, -std::numbers::pi);
        EXPECT_LT(o.box.yaw, std::numbers::pi);
        EXPECT_NO_THROW(o.box.validate());
        auto [it, fresh] = life.try_emplace(o.track_id, f.index, f.index);
        if (!fresh) it->second.second = f.index;
        ++appearances[o.track_id];
      }
    }
    // Contiguous lifetimes: an occluded object stays in the frame list.
    for (const auto& [id, fl] : life) EXPECT_EQ(appearances[id], fl.second - fl.first + 1) << id;
  }
}

TEST(World, OcclusionKeepsIdentity) {
  ScenarioParams p;
  p.occlusion_prob = 0.5;
  p.death_prob = 0.0;
  p.speed_max = 0.0;
  const auto s = generate_scenario(p, 3);
  int hidden = 0;
  for (const auto& f : s.frames) {
    EXPECT_EQ(f.objects.size() >= static_cast<std::size_t>(p.initial_objects), true);
    for (const auto& o : f.objects) hidden += o.visible ? 0 : 1;
  }
  EXPECT_GT(hidden, 0);
}

TEST(World, InvalidParamsNameTheField) {
  ScenarioParams p;
  p.death_prob = 1.5;
  try {
    generate_scenario(p, 0);
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("death_prob"), std::string::npos);
  }
  p = {};
  p.num_frames = 0;
  EXPECT_THROW(generate_scenario(p, 0), ParameterError);
  p = {};
  p.class_weights = {1.0};
  EXPECT_THROW(generate_scenario(p, 0), ParameterError);
}

TEST(World, SplitClipsLengths) {
  auto lengths = [](int n, int len) {
    std::vector<int> out;
    for (const auto& c : split_clips(scene_with_frames(n), len)) out.push_back(c.length());
    return out;
  };
  EXPECT_EQ(lengths(40, 10), (std::vector<int>{10, 10, 10, 10}));
  EXPECT_EQ(lengths(7, 10), (std::vector<int>{7}));
  EXPECT_EQ(lengths(23, 10), (std::vector<int>{10, 10, 3}));
  EXPECT_THROW(split_clips(scene_with_frames(5), 1), ParameterError);
}

TEST(World, SplitClipsPartitionAndClassSets) {
  const auto s = generate_scenario(ScenarioParams{}, 8);
  int expect = 0;
  for (const auto& c : split_clips(s, 10)) {
    EXPECT_EQ(c.start, expect);
    std::set<int> classes;
    for (int t = c.start; t < c.end; ++t) {
      for (const auto& o : s.frames[static_cast<std::size_t>(t)].objects) classes.insert(o.class_id);
    }
    EXPECT_EQ(c.class_set, classes);
    expect = c.end;
  }
  EXPECT_EQ(expect, 40);
}

TEST(World, SamplerSingleClassIsUniform) {
  std::vector<Clip> clips;
  for (int i = 0; i < 4; ++i) clips.push_back(Clip{i, 0, 10, {0}});
  std::vector<int> counts(4, 0);
  for (const auto& c : class_balanced_clip_sampler(clips, 8000, 1)) ++counts[static_cast<std::size_t>(c.scene_id)];
  for (int c : counts) EXPECT_NEAR(c, 2000, 200);
}

TEST(World, SamplerTwoDisjointClasses) {
  const std::vector<Clip> clips{Clip{0, 0, 10, {0}}, Clip{1, 0, 10, {1}}};
  int a = 0;
  for (const auto& c : class_balanced_clip_sampler(clips, 10000, 2)) a += c.scene_id == 0 ? 1 : 0;
  EXPECT_NEAR(a, 5000, 300);
}

TEST(World, SamplerOverlappingClasses) {
  const std::vector<Clip> clips{Clip{0, 0, 10, {0, 1}}, Clip{1, 0, 10, {0}}};
  int a = 0;
  const int n = 20000;
  for (const auto& c : class_balanced_clip_sampler(clips, n, 3)) a += c.scene_id == 0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(a) / n, 0.75, 0.015);
}

TEST(World, SamplerDeterministicAndValidated) {
  const std::vector<Clip> clips{Clip{0, 0, 10, {0, 1}}, Clip{1, 0, 10, {2}}};
  EXPECT_EQ(class_balanced_clip_sampler(clips, 50, 9), class_balanced_clip_sampler(clips, 50, 9));
  EXPECT_THROW(class_balanced_clip_sampler({}, 5, 0), ParameterError);
  EXPECT_THROW(class_balanced_clip_sampler(clips, 0, 0), ParameterError);
}

TEST(World, SceneJsonRoundTrip) {
  const auto s = generate_scenario(ScenarioParams{}, 4, 1);
  const auto back = scene_from_json(Json::parse(scene_to_json(s).dump()));
  EXPECT_EQ(back, s);
}

TEST(World, ScenarioParamsJsonIsStrict) {
  EXPECT_THROW(scenario_params_from_json(Json{{"num_frame", 3}}), ParameterError);
  EXPECT_THROW(scenario_params_from_json(Json{{"speed_range", {1.0}}}), ParameterError);
  const auto p = scenario_params_from_json(Json{{"num_frames", 12}, {"speed_range", {1.0, 2.0}}});
  EXPECT_EQ(p.num_frames, 12);
  EXPECT_EQ(p.speed_min, 1.0);
  EXPECT_EQ(p.speed_max, 2.0);
}
