#pragma once

#include <cmath>
#include <numbers>

#include "tba/errors.hpp"

namespace tba {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Wraps an angle into [-pi, pi).
inline double normalize_yaw(double yaw) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(yaw + std::numbers::pi, two_pi);
  if (y < 0.0) y += two_pi;
  y -= std::numbers::pi;
  if (y >= std::numbers::pi) y -= two_pi;
  return y;
}

// Bird's-eye-view box. Metrics only ever look at the center.
struct BoxBEV {
  double cx = 0.0;
  double cy = 0.0;
  double length = 4.5;
  double width = 1.9;
  double yaw = 0.0;

  [[nodiscard]] Vec2 center() const noexcept { return {cx, cy}; }

  void validate() const {
    if (!(length > 0.0)) throw ParameterError("BoxBEV.length must be > 0");
    if (!(width > 0.0)) throw ParameterError("BoxBEV.width must be > 0");
    if (!(yaw >= -std::numbers::pi && yaw < std::numbers::pi)) {
      throw ParameterError("BoxBEV.yaw must lie in [-pi, pi)");
    }
  }

  friend bool operator==(const BoxBEV&, const BoxBEV&) = default;
};

inline double center_distance(const BoxBEV& a, const BoxBEV& b) noexcept {
  return distance(a.center(), b.center());
}

}  // namespace tba
