#pragma once

#include <cstdint>
#include <numbers>

#include "cfsm/estimator.hpp"
#include "cfsm/synth.hpp"
#include "cfsm/tracker.hpp"

namespace scenarios {

// Planted-tensor recovery: termite-like tensor, dense disc so that every
// neighbour column is well excited.
inline cfsm::SimConfig recovery(std::uint64_t seed, int n_frames = 50000) {
  cfsm::SimConfig c;
  c.n_agents = 26;
  c.n_frames = n_frames;
  c.arena = cfsm::Arena::disc({0.0, 0.0}, 60.0);
  c.tensor = cfsm::termite_like_tensor();
  c.profile = cfsm::termite_like_profile();
  c.spatial_radius = 8.0;
  c.seed = seed;
  return c;
}

inline cfsm::TensorError recovery_error(std::uint64_t seed, int n_frames = 50000) {
  const auto cfg = recovery(seed, n_frames);
  const auto sim = cfsm::simulate_swarm(cfg);
  const auto obs = cfsm::collect_observations(sim.trajectories, sim.labels, cfg.tensor.n_states(),
                                              {cfg.spatial_radius, 0});
  const auto est = cfsm::estimate_tensor(obs, cfg.tensor.states);
  return cfsm::tensor_error(est.tensor, cfg.tensor);
}

// End-to-end pipeline: three kinematically distinct states in a large disc,
// agents kept apart so that identities are unambiguous. The only interaction
// is forward-moving agents switching to wandering near a non-moving one.
inline constexpr double kPipelineDelta = 0.05;

inline cfsm::TransitionTensor pipeline_tensor() {
  auto t = cfsm::TransitionTensor::zeros(cfsm::StateSet({"non-moving", "random-wandering", "forward-moving"}), 4);
  t.matrix(0) << 0.9999, 0, 0, 0,
                 0.00005, 0, 0, 0,
                 0.00005, 0, 0, 0;
  t.matrix(1) << 0.00005, 0, 0, 0,
                 0.9999, 0, 0, 0,
                 0.00005, 0, 0, 0;
  t.matrix(2) << 0.00005, 0, 0, 0,
                 0.00005, kPipelineDelta, 0, 0,
                 0.9999, -kPipelineDelta, 0, 0;
  return t;
}

inline cfsm::SimConfig pipeline(std::uint64_t seed, int n_frames) {
  cfsm::SimConfig c;
  c.n_agents = 26;
  c.n_frames = n_frames;
  c.arena = cfsm::Arena::disc({0.0, 0.0}, 1000.0);
  c.tensor = pipeline_tensor();
  c.profile = {
      {0.01, 0.0, 1.0, 2.0 * std::numbers::pi / 1000.0},  // slow fidget, period 1000
      {0.5, 0.02, 1.0, 2.0 * std::numbers::pi / 200.0},  // small loops, period 200
      {2.0, 0.05, 1.0, 0.0},
  };
  c.spatial_radius = 20.0;
  c.seed = seed;
  c.min_separation = 15.0;
  return c;
}

inline cfsm::NoiseConfig pipeline_noise(std::uint64_t seed) {
  cfsm::NoiseConfig n;
  n.jitter_sigma = 0.5;
  n.dropout_prob = 0.05;
  n.seed = seed;
  return n;
}

inline cfsm::TrackerConfig pipeline_tracker() {
  cfsm::TrackerConfig t;
  t.claim_radius = 6.0;
  t.max_unclaimed = 4;  // a lost track dies before it can coast 15 units into a neighbour
  t.smoothing_sigma = 0.0;
  return t;
}

}  // namespace scenarios
