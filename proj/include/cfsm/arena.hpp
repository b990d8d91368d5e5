#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cfsm/core.hpp"

namespace cfsm {

/// Planar confinement region: an axis-aligned rectangle or a disc.
struct Arena {
  enum class Shape { rect, disc };

  Shape shape = Shape::rect;
  Vec2 lo{0.0, 0.0};     // rect
  Vec2 hi{100.0, 100.0}; // rect
  Vec2 center{0.0, 0.0}; // disc
  double radius = 50.0;  // disc

  static Arena rect(Vec2 lo, Vec2 hi) {
    Arena a;
    a.shape = Shape::rect;
    a.lo = lo;
    a.hi = hi;
    return a;
  }

  static Arena disc(Vec2 center, double radius) {
    Arena a;
    a.shape = Shape::disc;
    a.center = center;
    a.radius = radius;
    return a;
  }

  bool valid() const {
    if (shape == Shape::rect) return lo.finite() && hi.finite() && lo.x < hi.x && lo.y < hi.y;
    return center.finite() && std::isfinite(radius) && radius > 0.0;
  }

  bool contains(Vec2 p) const {
    if (shape == Shape::rect) return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
    return within_radius(p, center, radius);
  }

  Vec2 bbox_lo() const { return shape == Shape::rect ? lo : center - Vec2{radius, radius}; }
  Vec2 bbox_hi() const { return shape == Shape::rect ? hi : center + Vec2{radius, radius}; }

  template <class Rng>
  Vec2 sample_uniform(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (shape == Shape::rect) {
      const double ux = u(rng);
      const double uy = u(rng);
      return {lo.x + ux * (hi.x - lo.x), lo.y + uy * (hi.y - lo.y)};
    }
    const double r = radius * std::sqrt(u(rng));
    const double th = 2.0 * std::numbers::pi * u(rng);
    return center + Vec2{r * std::cos(th), r * std::sin(th)};
  }

  /// Mirrors a step that left the arena back inside and flips the matching
  /// velocity component. `pos` is the proposed position, `vel` the step.
  void reflect(Vec2& pos, Vec2& vel) const {
    if (shape == Shape::rect) {
      auto fold = [](double& p, double& v, double a, double b) {
        for (int guard = 0; guard < 8 && (p < a || p > b); ++guard) {
          if (p < a) p = 2.0 * a - p;
          if (p > b) p = 2.0 * b - p;
          v = -v;
        }
        p = std::clamp(p, a, b);
      };
      fold(pos.x, vel.x, lo.x, hi.x);
      fold(pos.y, vel.y, lo.y, hi.y);
      return;
    }
    const Vec2 d = pos - center;
    const double dist = d.norm();
    if (dist <= radius) return;
    const Vec2 n = (1.0 / dist) * d;
    const double overshoot = dist - radius;
    pos = pos - (2.0 * overshoot) * n;
    const double vn = vel.x * n.x + vel.y * n.y;
    if (vn > 0.0) vel = vel - (2.0 * vn) * n;
    if (!within_radius(pos, center, radius)) {
      // step longer than the diameter; park on the rim
      const Vec2 e = pos - center;
      const double en = e.norm();
      pos = en > 0.0 ? center + (radius * (1.0 - 1e-12) / en) * e : center;
    }
  }
};

}  // namespace cfsm
