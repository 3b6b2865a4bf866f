#pragma once

// Synthetic BEV scenes: constant-velocity objects with Poisson births,
// per-frame deaths, occlusion spells, and training clips cut from scenes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tba/errors.hpp"
#include "tba/geometry.hpp"
#include "tba/rng.hpp"

namespace tba {

using Json = nlohmann::ordered_json;
using TrackId = std::int64_t;

struct ScenarioParams {
  int num_frames = 40;
  double frame_rate_hz = 2.0;
  int initial_objects = 4;
  double birth_rate = 0.15;  // expected births per frame
  double death_prob = 0.02;  // per object per frame
  double occlusion_prob = 0.05;
  double occlusion_mean_len = 2.0;  // frames
  double arena_half_extent = 20.0;  // meters
  double speed_min = 0.0;           // m/s
  double speed_max = 4.0;
  double motion_noise_std = 0.1;  // meters per frame
  int num_classes = 7;
  std::vector<double> class_weights;  // empty means uniform

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ParameterError(std::string(name) + ": must lie in [0, 1]");
      }
    };
    if (num_frames < 1) throw ParameterError("num_frames: must be >= 1");
    if (!(frame_rate_hz > 0.0)) throw ParameterError("frame_rate_hz: must be > 0");
    if (initial_objects < 0) throw ParameterError("initial_objects: must be >= 0");
    if (!(birth_rate >= 0.0) || !std::isfinite(birth_rate)) {
      throw ParameterError("birth_rate: must be finite and >= 0");
    }
    prob(death_prob, "death_prob");
    prob(occlusion_prob, "occlusion_prob");
    if (!(occlusion_mean_len >= 1.0)) throw ParameterError("occlusion_mean_len: must be >= 1");
    if (!(arena_half_extent > 0.0)) throw ParameterError("arena_half_extent: must be > 0");
    if (!(speed_min >= 0.0 && speed_max >= speed_min)) {
      throw ParameterError("speed_range: need 0 <= min <= max");
    }
    if (!(motion_noise_std >= 0.0)) throw ParameterError("motion_noise_std: must be >= 0");
    if (num_classes < 1) throw ParameterError("num_classes: must be >= 1");
    if (!class_weights.empty()) {
      if (class_weights.size() != static_cast<std::size_t>(num_classes)) {
        throw ParameterError("class_weights: size must equal num_classes");
      }
      double sum = 0.0;
      for (double w : class_weights) {
        if (!(w >= 0.0)) throw ParameterError("class_weights: entries must be >= 0");
        sum += w;
      }
      if (!(sum > 0.0)) throw ParameterError("class_weights: must not all be zero");
    }
  }

  friend bool operator==(const ScenarioParams&, const ScenarioParams&) = default;
};

struct GtObject {
  TrackId track_id = 0;
  int class_id = 0;
  BoxBEV box;
  Vec2 velocity;
  bool visible = true;

  friend bool operator==(const GtObject&, const GtObject&) = default;
};

struct Frame {
  int index = 0;
  double timestamp_s = 0.0;
  std::vector<GtObject> objects;

  [[nodiscard]] const GtObject* find(TrackId id) const noexcept {
    for (const auto& o : objects) {
      if (o.track_id == id) return &o;
    }
    return nullptr;
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Scene {
  int scene_id = 0;
  std::uint64_t seed = 0;
  ScenarioParams params;
  std::vector<Frame> frames;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct Clip {
  int scene_id = 0;
  int start = 0;  // [start, end)
  int end = 0;
  std::set<int> class_set;

  [[nodiscard]] int length() const noexcept { return end - start; }

  friend bool operator==(const Clip&, const Clip&) = default;
};

namespace detail {

struct LiveObject {
  GtObject obj;
  int occluded_left = 0;
};

inline int sample_class(const ScenarioParams& p, Rng& rng) {
  if (p.class_weights.empty()) {
    return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p.num_classes)));
  }
  double total = 0.0;
  for (double w : p.class_weights) total += w;
  double u = rng.uniform() * total;
  for (int c = 0; c < p.num_classes; ++c) {
    u -= p.class_weights[static_cast<std::size_t>(c)];
    if (u < 0.0) return c;
  }
  // Rounding fell off the end: last class with non-zero weight.
  for (int c = p.num_classes - 1; c >= 0; --c) {
    if (p.class_weights[static_cast<std::size_t>(c)] > 0.0) return c;
  }
  return 0;
}

inline GtObject spawn_object(const ScenarioParams& p, TrackId id, Rng& rng) {
  GtObject o;
  o.track_id = id;
  o.class_id = sample_class(p, rng);
  const double h = p.arena_half_extent;
  o.box.cx = rng.uniform(-h, h);
  o.box.cy = rng.uniform(-h, h);
  o.box.length = rng.uniform(3.5, 5.0);
  o.box.width = rng.uniform(1.6, 2.1);
  const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double speed = rng.uniform(p.speed_min, p.speed_max);
  o.box.yaw = normalize_yaw(heading);
  o.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
  o.visible = true;
  return o;
}

inline bool inside_arena(const BoxBEV& b, double half_extent) noexcept {
  return std::abs(b.cx) <= half_extent && std::abs(b.cy) <= half_extent;
}

}  // namespace detail

// Deterministic in (params, seed, scene_id). The stream for a scene is
// Rng(seed).derive(scene_id); draws happen in a fixed order per frame:
// per live object (ascending track_id) death, motion noise, occlusion; then
// births.
inline Scene generate_scenario(const ScenarioParams& params, std::uint64_t seed,
                               int scene_id = 0) {
  params.validate();
  Rng rng = Rng(seed).derive(static_cast<std::uint64_t>(scene_id));
  const double dt = 1.0 / params.frame_rate_hz;

  Scene scene;
  scene.scene_id = scene_id;
  scene.seed = seed;
  scene.params = params;
  scene.frames.reserve(static_cast<std::size_t>(params.num_frames));

  std::vector<detail::LiveObject> live;
  TrackId next_id = 0;

  for (int t = 0; t < params.num_frames; ++t) {
    if (t == 0) {
      for (int i = 0; i < params.initial_objects; ++i) {
        live.push_back({detail::spawn_object(params, next_id++, rng), 0});
      }
    } else {
      std::vector<detail::LiveObject> survivors;
      survivors.reserve(live.size());
      for (auto& lo : live) {
        if (rng.bernoulli(params.death_prob)) continue;
        auto& b = lo.obj.box;
        b.cx += lo.obj.velocity.x * dt + rng.normal(0.0, params.motion_noise_std);
        b.cy += lo.obj.velocity.y * dt + rng.normal(0.0, params.motion_noise_std);
        if (!detail::inside_arena(b, params.arena_half_extent)) continue;
        if (lo.occluded_left > 0) {
          lo.obj.visible = false;
          --lo.occluded_left;
        } else if (rng.bernoulli(params.occlusion_prob)) {
          // Spell length is geometric with the configured mean.
          int len = 1;
          const double keep = 1.0 - 1.0 / params.occlusion_mean_len;
          while (rng.uniform() < keep) ++len;
          lo.obj.visible = false;
          lo.occluded_left = len - 1;
        } else {
          lo.obj.visible = true;
        }
        survivors.push_back(lo);
      }
      live = std::move(survivors);
    }
    const auto births = rng.poisson(params.birth_rate);
    for (std::uint64_t i = 0; i < births; ++i) {
      live.push_back({detail::spawn_object(params, next_id++, rng), 0});
    }

    Frame f;
    f.index = t;
    f.timestamp_s = static_cast<double>(t) / params.frame_rate_hz;
    f.objects.reserve(live.size());
    for (const auto& lo : live) f.objects.push_back(lo.obj);
    scene.frames.push_back(std::move(f));
  }
  return scene;
}

// Number of objects born through the Poisson process (excludes initial_objects).
inline int count_births(const Scene& scene) {
  std::set<TrackId> ids;
  for (const auto& f : scene.frames) {
    for (const auto& o : f.objects) ids.insert(o.track_id);
  }
  return static_cast<int>(ids.size()) - scene.params.initial_objects;
}

inline std::vector<Clip> split_clips(const Scene& scene, int max_clip_len = 10) {
  if (max_clip_len < 2) throw ParameterError("max_clip_len: must be >= 2");
  std::vector<Clip> clips;
  const int n = static_cast<int>(scene.frames.size());
  for (int start = 0; start < n; start += max_clip_len) {
    Clip c;
    c.scene_id = scene.scene_id;
    c.start = start;
    c.end = std::min(n, start + max_clip_len);
    for (int t = c.start; t < c.end; ++t) {
      for (const auto& o : scene.frames[static_cast<std::size_t>(t)].objects) {
        c.class_set.insert(o.class_id);
      }
    }
    clips.push_back(std::move(c));
  }
  return clips;
}

// Two-stage draw with replacement: a class uniformly among classes present in
// any clip, then a clip uniformly among those containing it. If no clip holds
// any class, clips are drawn uniformly.
inline std::vector<Clip> class_balanced_clip_sampler(const std::vector<Clip>& clips,
                                                     int num_samples, std::uint64_t seed) {
  if (clips.empty()) throw ParameterError("clips: must not be empty");
  if (num_samples < 1) throw ParameterError("num_samples: must be >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    for (int c : clips[i].class_set) by_class[c].push_back(i);
  }
  Rng rng(seed);
  std::vector<Clip> out;
  out.reserve(static_cast<std::size_t>(num_samples));
  if (by_class.empty()) {
    for (int s = 0; s < num_samples; ++s) out.push_back(clips[rng.uniform_int(clips.size())]);
    return out;
  }
  std::vector<const std::vector<std::size_t>*> buckets;
  for (const auto& [cls, idx] : by_class) buckets.push_back(&idx);
  for (int s = 0; s < num_samples; ++s) {
    const auto& bucket = *buckets[rng.uniform_int(buckets.size())];
    out.push_back(clips[bucket[rng.uniform_int(bucket.size())]]);
  }
  return out;
}

// ---- JSON ----------------------------------------------------------------

inline void to_json(Json& j, const ScenarioParams& p) {
  j = Json{{"num_frames", p.num_frames},
           {"frame_rate_hz", p.frame_rate_hz},
           {"initial_objects", p.initial_objects},
           {"birth_rate", p.birth_rate},
           {"death_prob", p.death_prob},
           {"occlusion_prob", p.occlusion_prob},
           {"occlusion_mean_len", p.occlusion_mean_len},
           {"arena_half_extent", p.arena_half_extent},
           {"speed_range", Json::array({p.speed_min, p.speed_max})},
           {"motion_noise_std", p.motion_noise_std},
           {"num_classes", p.num_classes},
           {"class_weights", p.class_weights}};
}

namespace detail {

// Strict reader: every key must be known; missing keys keep their defaults.
template <class J>
class FieldReader {
 public:
  FieldReader(const J& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ParameterError(section_ + ": expected a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ParameterError(section_ + "." + key + ": wrong type");
    }
  }

  [[nodiscard]] const J* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParameterError(section_ + "." + it.key() + ": unknown field");
    }
  }

  [[nodiscard]] const std::string& section() const noexcept { return section_; }

 private:
  const J& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace detail

template <class J>
ScenarioParams scenario_params_from_json(const J& j) {
  ScenarioParams p;
  detail::FieldReader r(j, "scenario");
  r.get("num_frames", p.num_frames);
  r.get("frame_rate_hz", p.frame_rate_hz);
  r.get("initial_objects", p.initial_objects);
  r.get("birth_rate", p.birth_rate);
  r.get("death_prob", p.death_prob);
  r.get("occlusion_prob", p.occlusion_prob);
  r.get("occlusion_mean_len", p.occlusion_mean_len);
  r.get("arena_half_extent", p.arena_half_extent);
  if (const auto* sr = r.raw("speed_range")) {
    if (!sr->is_array() || sr->size() != 2) {
      throw ParameterError("scenario.speed_range: expected [min, max]");
    }
    p.speed_min = (*sr)[0].template get<double>();
    p.speed_max = (*sr)[1].template get<double>();
  }
  r.get("motion_noise_std", p.motion_noise_std);
  r.get("num_classes", p.num_classes);
  r.get("class_weights", p.class_weights);
  r.finish();
  p.validate();
  return p;
}

inline Json scene_to_json(const Scene& s) {
  Json frames = Json::array();
  for (const auto& f : s.frames) {
    Json objects = Json::array();
    for (const auto& o : f.objects) {
      objects.push_back(Json{{"track_id", o.track_id},
                             {"class_id", o.class_id},
                             {"cx", o.box.cx},
                             {"cy", o.box.cy},
                             {"length", o.box.length},
                             {"width", o.box.width},
                             {"yaw", o.box.yaw},
                             {"vx", o.velocity.x},
                             {"vy", o.velocity.y},
                             {"visible", o.visible}});
    }
    frames.push_back(Json{{"index", f.index}, {"objects", std::move(objects)}});
  }
  Json params;
  to_json(params, s.params);
  return Json{{"scene_id", s.scene_id},
              {"seed", s.seed},
              {"params", std::move(params)},
              {"frames", std::move(frames)}};
}

template <class J>
Scene scene_from_json(const J& j) {
  Scene s;
  try {
    s.scene_id = j.at("scene_id").template get<int>();
    s.seed = j.at("seed").template get<std::uint64_t>();
    s.params = scenario_params_from_json(j.at("params"));
    for (const auto& jf : j.at("frames")) {
      Frame f;
      f.index = jf.at("index").template get<int>();
      f.timestamp_s = static_cast<double>(f.index) / s.params.frame_rate_hz;
      for (const auto& jo : jf.at("objects")) {
        GtObject o;
        o.track_id = jo.at("track_id").template get<TrackId>();
        o.class_id = jo.at("class_id").template get<int>();
        o.box.cx = jo.at("cx").template get<double>();
        o.box.cy = jo.at("cy").template get<double>();
        o.box.length = jo.at("length").template get<double>();
        o.box.width = jo.at("width").template get<double>();
        o.box.yaw = jo.at("yaw").template get<double>();
        o.velocity.x = jo.at("vx").template get<double>();
        o.velocity.y = jo.at("vy").template get<double>();
        o.visible = jo.at("visible").template get<bool>();
        f.objects.push_back(o);
      }
      s.frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scene JSON: ") + e.what());
  }
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    if (s.frames[i].index != static_cast<int>(i)) throw DataError("scene JSON: frame indices must be 0..n-1");
  }
  return s;
}

}  // namespace tba
