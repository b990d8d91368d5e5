#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cfsm/arena.hpp"
#include "cfsm/core.hpp"

namespace cfsm {

/// Kinematics of one behavioural state. Each frame the heading turns by
/// turn_rate plus (1 - heading_persistence) * U(-pi, pi); persistence 1 keeps
/// the heading, 0 draws a fresh one every frame.
struct StateMotion {
  double speed_mean = 0.0;
  double speed_jitter = 0.0;
  double heading_persistence = 1.0;
  double turn_rate = 0.0;  // rad/frame
};

using MotionProfile = std::vector<StateMotion>;

struct SimConfig {
  int n_agents = 26;
  int n_frames = 1000;
  Arena arena = Arena::disc({0.0, 0.0}, 100.0);
  TransitionTensor tensor;
  MotionProfile profile;
  double spatial_radius = 5.0;
  std::uint64_t seed = 0;
  double min_separation = 0.0;  // moves closer than this to another agent are re-drawn
  double speed_half_life = 0.0; // frames; > 0 decays every speed as 2^(-t / half_life)

  void validate() const {
    if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
    if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
    if (!arena.valid()) throw ConfigError("arena is degenerate");
    if (!(spatial_radius >= 0.0)) throw ConfigError("spatial_radius must be >= 0");
    if (!(min_separation >= 0.0)) throw ConfigError("min_separation must be >= 0");
    if (!(speed_half_life >= 0.0)) throw ConfigError("speed_half_life must be >= 0");
    if (const auto v = validate_tensor(tensor, true); !v.empty())
      throw ConfigError("planted tensor is not stochastic-valid: " + v.front());
    if (profile.size() != tensor.n_states()) throw ConfigError("motion profile needs one entry per state");
    for (const auto& m : profile) {
      if (!(m.speed_mean >= 0.0) || !(m.speed_jitter >= 0.0)) throw ConfigError("speeds must be >= 0");
      if (!(m.heading_persistence >= 0.0 && m.heading_persistence <= 1.0))
        throw ConfigError("heading_persistence must lie in [0,1]");
      if (!std::isfinite(m.turn_rate)) throw ConfigError("turn_rate must be finite");
    }
  }
};

struct NoiseConfig {
  double jitter_sigma = 0.0;
  double dropout_prob = 0.0;
  double clutter_rate = 0.0;  // Poisson mean of spurious points per frame
  std::uint64_t seed = 0;
  std::optional<Arena> clutter_arena;  // defaults to the bounding box of the input

  void validate() const {
    if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter_sigma must be >= 0");
    if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) throw ConfigError("dropout_prob must lie in [0,1]");
    if (!(clutter_rate >= 0.0)) throw ConfigError("clutter_rate must be >= 0");
  }
};

struct SimResult {
  std::vector<Trajectory> trajectories;
  std::vector<StateLabelSeries> labels;
};

inline constexpr int kDeflections = 8;

inline std::string agent_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "a%03d", i);
  return buf;
}

/// Forward simulation of finite-state-machine agents. Per frame: record the
/// state, build e_i(t) from the current positions and states, draw the next
/// state from clip-renormalised T_b e, then move by the current state's
/// kinematics with reflection at the arena boundary.
inline SimResult simulate_swarm(const SimConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_agents);
  const auto nb = cfg.tensor.n_states();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pick_state(0, static_cast<int>(nb) - 1);

  std::vector<Vec2> pos(n);
  std::vector<double> heading(n);
  std::vector<int> state(n), next(n);
  const double sep2 = cfg.min_separation * cfg.min_separation;
  auto crowded = [&](std::size_t i, Vec2 p) {
    if (sep2 <= 0.0) return false;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && squared_distance(pos[j], p) < sep2) return true;
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = cfg.arena.sample_uniform(rng);
    for (int tries = 0; tries < 1000 && sep2 > 0.0; ++tries) {
      bool clash = false;
      for (std::size_t j = 0; j < i; ++j) clash = clash || squared_distance(pos[j], pos[i]) < sep2;
      if (!clash) break;
      pos[i] = cfg.arena.sample_uniform(rng);
    }
    heading[i] = angle(rng);
    state[i] = pick_state(rng);
  }

  SimResult res;
  res.trajectories.resize(n);
  res.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.trajectories[i].id = agent_id(static_cast<int>(i));
    res.trajectories[i].samples.reserve(static_cast<std::size_t>(cfg.n_frames));
    res.labels[i] = {agent_id(static_cast<int>(i)), 0, {}};
    res.labels[i].labels.reserve(static_cast<std::size_t>(cfg.n_frames));
  }

  std::vector<double> e(nb + 1);
  for (Frame t = 0; t < cfg.n_frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      res.trajectories[i].samples.push_back({t, pos[i]});
      res.labels[i].labels.push_back(state[i]);
    }
    if (t + 1 == cfg.n_frames) break;

    for (std::size_t i = 0; i < n; ++i) {
      std::fill(e.begin(), e.end(), 0.0);
      e[0] = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && within_radius(pos[j], pos[i], cfg.spatial_radius)) e[1 + static_cast<std::size_t>(state[j])] += 1.0;
      const Eigen::Map<const Eigen::VectorXd> ev(e.data(), static_cast<Eigen::Index>(e.size()));
      const Eigen::VectorXd raw = cfg.tensor.matrix(static_cast<std::size_t>(state[i])) * ev;
      const auto p = clip_renormalize(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())));
      const double u = unit(rng);
      double acc = 0.0;
      next[i] = static_cast<int>(nb) - 1;
      for (std::size_t b = 0; b < nb; ++b) {
        acc += p.probs[b];
        if (u < acc) {
          next[i] = static_cast<int>(b);
          break;
        }
      }
    }

    const double decay = cfg.speed_half_life > 0.0 ? std::exp2(-static_cast<double>(t) / cfg.speed_half_life) : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& m = cfg.profile[static_cast<std::size_t>(state[i])];
      const double speed = std::max(0.0, m.speed_mean + m.speed_jitter * gauss(rng)) * decay;
      double h = heading[i] + m.turn_rate + (1.0 - m.heading_persistence) * angle(rng);
      // blocked moves deflect by growing angles, alternating sides; fully boxed in agents stay put
      for (int attempt = 0; attempt <= 2 * kDeflections; ++attempt) {
        const int k = (attempt + 1) / 2;
        const double hk = h + (attempt % 2 ? 1.0 : -1.0) * k * std::numbers::pi / kDeflections;
        Vec2 step{speed * std::cos(hk), speed * std::sin(hk)};
        Vec2 prop = pos[i] + step;
        cfg.arena.reflect(prop, step);
        if (!crowded(i, prop)) {
          pos[i] = prop;
          if (speed > 0.0) h = std::atan2(step.y, step.x);
          break;
        }
      }
      heading[i] = std::remainder(h, 2.0 * std::numbers::pi);
    }
    state.swap(next);
  }
  return res;
}

/// Turns trajectories into anonymous detection frames: each sample survives
/// with probability 1 - dropout_prob and is jittered by isotropic Gaussian
/// noise; Poisson(clutter_rate) uniform spurious points are added per frame.
inline std::vector<DetectionFrame> corrupt_to_detections(const std::vector<Trajectory>& trajectories,
                                                         const NoiseConfig& noise) {
  noise.validate();
  std::vector<DetectionFrame> out;
  Frame lo = 0, hi = -1;
  Vec2 blo{0, 0}, bhi{0, 0};
  bool any = false;
  for (const auto& t : trajectories) {
    if (t.empty()) continue;
    if (!any) {
      lo = t.first_frame();
      hi = t.last_frame();
      blo = bhi = t.samples.front().pos;
      any = true;
    }
    lo = std::min(lo, t.first_frame());
    hi = std::max(hi, t.last_frame());
    for (const auto& s : t.samples) {
      blo = {std::min(blo.x, s.pos.x), std::min(blo.y, s.pos.y)};
      bhi = {std::max(bhi.x, s.pos.x), std::max(bhi.y, s.pos.y)};
    }
  }
  if (!any) return out;
  const Arena clutter = noise.clutter_arena ? *noise.clutter_arena
                                            : Arena::rect(blo, {std::max(bhi.x, blo.x + 1e-9), std::max(bhi.y, blo.y + 1e-9)});

  std::mt19937_64 rng(noise.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::poisson_distribution<int> clutter_count(noise.clutter_rate > 0.0 ? noise.clutter_rate : 1.0);
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (Frame f = lo; f <= hi; ++f) {
    DetectionFrame fr{f, {}};
    for (const auto& t : trajectories) {
      if (!t.alive_at(f)) continue;
      if (unit(rng) < noise.dropout_prob) continue;
      Vec2 p = t.at(f);
      if (noise.jitter_sigma > 0.0) {
        const double dx = gauss(rng);
        const double dy = gauss(rng);
        p += noise.jitter_sigma * Vec2{dx, dy};
      }
      fr.points.push_back(p);
    }
    if (noise.clutter_rate > 0.0) {
      const int c = clutter_count(rng);
      for (int k = 0; k < c; ++k) fr.points.push_back(clutter.sample_uniform(rng));
    }
    out.push_back(std::move(fr));
  }
  return out;
}

/// Three-state planted tensor (non-moving, random-wandering, forward-moving),
/// m = 4, with interaction deltas on every source state. Negative deltas sit
/// only on the diagonal, so T e stays on the simplex for any realistic
/// neighbour count and clipping never kicks in.
inline TransitionTensor termite_like_tensor() {
  auto t = TransitionTensor::zeros(StateSet({"non-moving", "random-wandering", "forward-moving"}), 4);
  // columns: base, +1 non-moving neighbour, +1 wandering neighbour, +1 forward neighbour
  t.matrix(0) << 0.97, -0.01, -0.02, -0.02,
                 0.02, 0.01, 0.02, 0.0,
                 0.01, 0.0, 0.0, 0.02;
  t.matrix(1) << 0.02, 0.03, 0.0, 0.0,
                 0.96, -0.03, -0.01, -0.02,
                 0.02, 0.0, 0.01, 0.02;
  t.matrix(2) << 0.01, 0.04, 0.0, 0.0,
                 0.0215, 0.03, 0.01, 0.0108635,
                 0.9685, -0.07, -0.01, -0.0108635;
  return t;
}

inline MotionProfile termite_like_profile() {
  return {
      {0.0, 0.0, 1.0, 0.0},    // non-moving
      {0.5, 0.1, 0.0, 0.0},    // random wandering: fresh heading every frame
      {1.5, 0.1, 0.95, 0.0},   // forward moving
  };
}

}  // namespace cfsm
