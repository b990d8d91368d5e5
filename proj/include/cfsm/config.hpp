#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "cfsm/arena.hpp"
#include "cfsm/estimator.hpp"
#include "cfsm/io.hpp"
#include "cfsm/state_id.hpp"
#include "cfsm/synth.hpp"
#include "cfsm/tracker.hpp"

namespace cfsm {

enum class StateScheme { spectral, velocity };

/// Simulation parameters that are not shared with the analysis pipeline.
struct SimulationSection {
  int n_agents = 26;
  int n_frames = 5000;
  Arena arena = Arena::disc({0.0, 0.0}, 60.0);
  std::optional<TransitionTensor> tensor;  // termite_like_tensor() when absent
  std::optional<MotionProfile> profile;    // termite_like_profile() when absent
  double min_separation = 0.0;
  double speed_half_life = 0.0;
};

/// Every knob of a pipeline run. JSON keys equal the field names.
struct RunConfig {
  StateScheme state_scheme = StateScheme::spectral;
  int window_len = 1000;
  int stride = 0;
  Frame dt = 1;
  double spatial_radius = 8.0;
  Frame temporal_radius = 0;
  double speed_low = 0.1;
  double speed_high = 0.5;
  int n_directions = 8;
  double smoothing_sigma = 20.0;
  int k_clusters = 3;
  std::uint64_t seed = 0;
  double ridge = 0.0;
  bool allow_empty = false;
  Frame bucket = 100;
  TrackerConfig tracker;
  SimulationSection simulation;
  NoiseConfig noise;

  void validate() const {
    if (window_len < 4) throw ConfigError("window_len must be >= 4");
    if (dt < 1) throw ConfigError("dt must be >= 1");
    if (!(spatial_radius >= 0.0) || temporal_radius < 0) throw ConfigError("radii must be >= 0");
    if (!(speed_low > 0.0 && speed_low < speed_high)) throw ConfigError("need 0 < speed_low < speed_high");
    if (n_directions < 1) throw ConfigError("n_directions must be >= 1");
    if (k_clusters < 1) throw ConfigError("k_clusters must be >= 1");
    if (!(smoothing_sigma >= 0.0)) throw ConfigError("smoothing_sigma must be >= 0");
    if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
    if (bucket < 1) throw ConfigError("bucket must be >= 1");
    tracker_config().validate();
    noise.validate();
  }

  TrackerConfig tracker_config() const {
    TrackerConfig t = tracker;
    t.smoothing_sigma = smoothing_sigma;
    return t;
  }
  SpectralScheme spectral_scheme() const { return {window_len, stride, k_clusters, seed}; }
  VelocityScheme velocity_scheme() const { return {speed_low, speed_high, n_directions}; }
  NeighborSpec neighbor_spec() const { return {spatial_radius, temporal_radius}; }

  SimConfig sim_config() const {
    SimConfig s;
    s.n_agents = simulation.n_agents;
    s.n_frames = simulation.n_frames;
    s.arena = simulation.arena;
    s.tensor = simulation.tensor ? *simulation.tensor : termite_like_tensor();
    s.profile = simulation.profile ? *simulation.profile : termite_like_profile();
    s.spatial_radius = spatial_radius;
    s.seed = seed;
    s.min_separation = simulation.min_separation;
    s.speed_half_life = simulation.speed_half_life;
    return s;
  }
};

namespace detail {

/// Typed access to one JSON object that rejects keys nobody asked for.
class ObjectReader {
public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where_);
  }

private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline Vec2 vec2_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(where + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline Arena arena_from_json(const nlohmann::json& j, const std::string& where) {
  detail::ObjectReader r(j, where);
  std::string shape = "rect";
  r.get("shape", shape);
  Arena a;
  if (shape == "disc") {
    a.shape = Arena::Shape::disc;
    if (const auto* c = r.child("center")) a.center = detail::vec2_from_json(*c, where + ".center");
    r.get("radius", a.radius);
  } else if (shape == "rect") {
    a.shape = Arena::Shape::rect;
    if (const auto* c = r.child("min")) a.lo = detail::vec2_from_json(*c, where + ".min");
    if (const auto* c = r.child("max")) a.hi = detail::vec2_from_json(*c, where + ".max");
  } else {
    throw ConfigError(where + ".shape must be 'disc' or 'rect'");
  }
  r.finish();
  if (!a.valid()) throw ConfigError(where + " is degenerate");
  return a;
}

inline nlohmann::json arena_to_json(const Arena& a) {
  if (a.shape == Arena::Shape::disc)
    return {{"shape", "disc"}, {"center", {a.center.x, a.center.y}}, {"radius", a.radius}};
  return {{"shape", "rect"}, {"min", {a.lo.x, a.lo.y}}, {"max", {a.hi.x, a.hi.y}}};
}

inline TrackerConfig tracker_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "tracker");
  TrackerConfig t;
  r.get("claim_radius", t.claim_radius);
  r.get("max_unclaimed", t.max_unclaimed);
  r.get("min_track_len", t.min_track_len);
  r.get("velocity_blend", t.velocity_blend);
  r.get("merge_radius", t.merge_radius);
  r.get("merge_frames", t.merge_frames);
  if (const auto* a = r.child("arena"); a && !a->is_null()) t.arena = arena_from_json(*a, "tracker.arena");
  r.finish();
  return t;
}

inline MotionProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("simulation.profile must be an array");
  MotionProfile p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    detail::ObjectReader r(j[i], "simulation.profile[" + std::to_string(i) + "]");
    StateMotion m;
    r.get("speed_mean", m.speed_mean);
    r.get("speed_jitter", m.speed_jitter);
    r.get("heading_persistence", m.heading_persistence);
    r.get("turn_rate", m.turn_rate);
    r.finish();
    p.push_back(m);
  }
  return p;
}

inline SimulationSection simulation_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "simulation");
  SimulationSection s;
  r.get("n_agents", s.n_agents);
  r.get("n_frames", s.n_frames);
  r.get("min_separation", s.min_separation);
  r.get("speed_half_life", s.speed_half_life);
  if (const auto* a = r.child("arena")) s.arena = arena_from_json(*a, "simulation.arena");
  if (const auto* p = r.child("profile")) s.profile = profile_from_json(*p);
  const auto* inline_tensor = r.child("tensor");
  const auto* tensor_path = r.child("tensor_path");
  if (inline_tensor && tensor_path) throw ConfigError("give either simulation.tensor or simulation.tensor_path");
  try {
    if (inline_tensor) s.tensor = io::tensor_from_json(*inline_tensor);
    if (tensor_path) {
      if (!tensor_path->is_string()) throw ConfigError("simulation.tensor_path must be a string");
      s.tensor = io::load_tensor(tensor_path->get<std::string>());
    }
  } catch (const DataError& e) {
    throw ConfigError(std::string("simulation tensor: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("simulation tensor: ") + e.what());
  }
  r.finish();
  return s;
}

inline NoiseConfig noise_from_json(const nlohmann::json& j, std::uint64_t default_seed) {
  detail::ObjectReader r(j, "noise");
  NoiseConfig n;
  n.seed = default_seed;
  r.get("jitter_sigma", n.jitter_sigma);
  r.get("dropout_prob", n.dropout_prob);
  r.get("clutter_rate", n.clutter_rate);
  r.get("seed", n.seed);
  if (const auto* a = r.child("arena"); a && !a->is_null()) n.clutter_arena = arena_from_json(*a, "noise.arena");
  r.finish();
  return n;
}

/// Seed used for detection noise when the noise section does not set one.
inline std::uint64_t derived_noise_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::ObjectReader r(j, "config");
  RunConfig c;
  std::string scheme = "spectral";
  r.get("state_scheme", scheme);
  if (scheme == "spectral") c.state_scheme = StateScheme::spectral;
  else if (scheme == "velocity") c.state_scheme = StateScheme::velocity;
  else throw ConfigError("state_scheme must be 'spectral' or 'velocity'");
  r.get("window_len", c.window_len);
  r.get("stride", c.stride);
  r.get("dt", c.dt);
  r.get("spatial_radius", c.spatial_radius);
  r.get("temporal_radius", c.temporal_radius);
  r.get("speed_low", c.speed_low);
  r.get("speed_high", c.speed_high);
  r.get("n_directions", c.n_directions);
  r.get("smoothing_sigma", c.smoothing_sigma);
  r.get("k_clusters", c.k_clusters);
  r.get("seed", c.seed);
  r.get("ridge", c.ridge);
  r.get("allow_empty", c.allow_empty);
  r.get("bucket", c.bucket);
  if (const auto* t = r.child("tracker")) c.tracker = tracker_from_json(*t);
  if (const auto* s = r.child("simulation")) c.simulation = simulation_from_json(*s);
  c.noise.seed = derived_noise_seed(c.seed);
  if (const auto* n = r.child("noise")) c.noise = noise_from_json(*n, derived_noise_seed(c.seed));
  r.finish();
  c.validate();
  return c;
}

namespace detail {

/// Relative simulation.tensor_path entries are taken relative to the config file.
inline void anchor_paths(nlohmann::json& j, const std::string& config_path) {
  if (!j.is_object() || !j.contains("simulation") || !j["simulation"].is_object()) return;
  auto& sim = j["simulation"];
  if (!sim.contains("tensor_path") || !sim["tensor_path"].is_string()) return;
  const std::filesystem::path p = sim["tensor_path"].get<std::string>();
  if (p.is_relative()) sim["tensor_path"] = (std::filesystem::path(config_path).parent_path() / p).string();
}

}  // namespace detail

inline RunConfig parse_run_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  detail::anchor_paths(j, path);
  return run_config_from_json(j);
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json tracker = {
      {"claim_radius", c.tracker.claim_radius},   {"max_unclaimed", c.tracker.max_unclaimed},
      {"min_track_len", c.tracker.min_track_len}, {"velocity_blend", c.tracker.velocity_blend},
      {"merge_radius", c.tracker.merge_radius},   {"merge_frames", c.tracker.merge_frames},
      {"arena", c.tracker.arena ? arena_to_json(*c.tracker.arena) : nlohmann::json(nullptr)},
  };
  nlohmann::json sim = {
      {"n_agents", c.simulation.n_agents},
      {"n_frames", c.simulation.n_frames},
      {"arena", arena_to_json(c.simulation.arena)},
      {"min_separation", c.simulation.min_separation},
      {"speed_half_life", c.simulation.speed_half_life},
  };
  if (c.simulation.tensor) sim["tensor"] = nlohmann::json::parse(io::format_tensor(*c.simulation.tensor));
  if (c.simulation.profile) {
    sim["profile"] = nlohmann::json::array();
    for (const auto& m : *c.simulation.profile)
      sim["profile"].push_back({{"speed_mean", m.speed_mean},
                                {"speed_jitter", m.speed_jitter},
                                {"heading_persistence", m.heading_persistence},
                                {"turn_rate", m.turn_rate}});
  }
  nlohmann::json noise = {{"jitter_sigma", c.noise.jitter_sigma},
                          {"dropout_prob", c.noise.dropout_prob},
                          {"clutter_rate", c.noise.clutter_rate},
                          {"seed", c.noise.seed},
                          {"arena", c.noise.clutter_arena ? arena_to_json(*c.noise.clutter_arena) : nlohmann::json(nullptr)}};
  return {
      {"state_scheme", c.state_scheme == StateScheme::spectral ? "spectral" : "velocity"},
      {"window_len", c.window_len},
      {"stride", c.stride},
      {"dt", c.dt},
      {"spatial_radius", c.spatial_radius},
      {"temporal_radius", c.temporal_radius},
      {"speed_low", c.speed_low},
      {"speed_high", c.speed_high},
      {"n_directions", c.n_directions},
      {"smoothing_sigma", c.smoothing_sigma},
      {"k_clusters", c.k_clusters},
      {"seed", c.seed},
      {"ridge", c.ridge},
      {"allow_empty", c.allow_empty},
      {"bucket", c.bucket},
      {"tracker", tracker},
      {"simulation", sim},
      {"noise", noise},
  };
}

}  // namespace cfsm
