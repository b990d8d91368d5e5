#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfsm/config.hpp"
#include "cfsm/estimator.hpp"
#include "cfsm/io.hpp"
#include "cfsm/state_id.hpp"
#include "cfsm/synth.hpp"
#include "cfsm/tracker.hpp"

namespace cfsm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Transposed tensor table: one row per source state, one cell per target
/// state holding the base coefficient followed by the neighbour deltas.
inline std::string format_tensor_table(const TransitionTensor& t) {
  const auto nb = t.n_states();
  const auto m = static_cast<std::size_t>(t.env_dim);
  auto cell = [&](std::size_t s, std::size_t b) {
    std::string c;
    char buf[32];
    for (std::size_t k = 0; k < m; ++k) {
      const double v = t.matrices[s].coeffs(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k));
      std::snprintf(buf, sizeof buf, k == 0 ? "%.6f" : "%+.6f", v);
      if (k == 1) c += " [";
      else if (k > 1) c += ' ';
      c += buf;
    }
    if (m > 1) c += ']';
    return c;
  };
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"source \\ target"});
  for (std::size_t b = 0; b < nb; ++b) rows[0].push_back(t.states.name(b));
  for (std::size_t s = 0; s < nb; ++s) {
    rows.push_back({t.states.name(s)});
    for (std::size_t b = 0; b < nb; ++b) rows.back().push_back(cell(s, b));
  }
  std::vector<std::size_t> width(nb + 1, 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::string out = "cell = base [delta per neighbour state:";
  for (std::size_t b = 0; b < nb; ++b) out += " " + t.states.name(b);
  out += "]\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out += " | ";
      out += r[c];
      if (c + 1 < r.size()) out.append(width[c] - r[c].size(), ' ');
    }
    out += '\n';
  }
  return out;
}

inline std::string format_activity(const std::vector<ActivityPoint>& series) {
  std::string out = "frame,mean_speed\n";
  for (const auto& p : series) {
    out += std::to_string(p.frame);
    out += ',';
    io::detail::put_real(out, p.mean_speed);
    out += '\n';
  }
  return out;
}

inline std::string format_occupancy(const std::vector<OccupancyRow>& rows, const StateSet& states) {
  std::string out = "frame";
  for (std::size_t b = 0; b < states.size(); ++b) out += "," + states.name(b);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.frame);
    for (double v : r.fraction) {
      out += ',';
      io::detail::put_real(out, v);
    }
    out += '\n';
  }
  return out;
}

/// Collects output files in memory and writes them together, removing the
/// already written ones if a later write fails.
class OutputSet {
public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::string add(const std::string& name, std::string content) {
    files_.emplace_back((dir_ / name).string(), std::move(content));
    return files_.back().first;
  }

  std::vector<std::string> paths() const {
    std::vector<std::string> p;
    for (const auto& f : files_) p.push_back(f.first);
    return p;
  }

  void commit() {
    std::vector<std::string> done;
    try {
      for (const auto& [path, content] : files_) {
        io::detail::write_file(path, content);
        done.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : done) std::filesystem::remove(p, ec);
      throw;
    }
  }

private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Run report: config echo, stage timings, per-bucket fit data, outputs.
class RunReport {
public:
  RunReport(std::string command, const RunConfig& cfg) {
    j_["command"] = std::move(command);
    j_["config"] = run_config_to_json(cfg);
    j_["stages"] = nlohmann::json::array();
  }

  template <class F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      j_["stages"].push_back({{"name", name}, {"seconds", dt.count()}});
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }

  nlohmann::json& operator[](const char* key) { return j_[key]; }

  void set_fits(const EstimateResult& r) {
    auto& b = j_["buckets"] = nlohmann::json::array();
    for (std::size_t s = 0; s < r.fits.size(); ++s) {
      const auto& f = r.fits[s];
      b.push_back({{"source", r.tensor.states.name(s)},
                   {"n_obs", f.n_obs},
                   {"placeholder", f.placeholder},
                   {"ridge_fallback", f.ridge_fallback},
                   {"lambda", f.lambda},
                   {"condition", f.condition},
                   {"inactive_features", f.inactive_features}});
    }
    j_["any_ridge_fallback"] = r.any_fallback();
  }

  std::string finish(const OutputSet& outputs, const std::string& report_path) {
    auto paths = outputs.paths();
    paths.push_back(report_path);
    j_["outputs"] = paths;
    return j_.dump(2) + "\n";
  }

private:
  nlohmann::json j_;
};

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool quiet = false;

  std::optional<std::string> state_scheme;
  std::optional<int> window_len;
  std::optional<int> k_clusters;
  std::optional<double> spatial_radius;
  std::optional<Frame> temporal_radius;
  std::optional<double> smoothing_sigma;
  std::optional<Frame> bucket;
  std::optional<int> n_frames;
  std::optional<int> n_agents;

  bool emit_detections = false;
  std::string input;
  std::string estimated, truth, tracks, truth_tracks;
  double match_radius = 5.0;
};

inline RunConfig resolve_config(const Options& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config_path.empty()) {
    std::string text;
    try {
      text = io::read_file(o.config_path);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    cfsm::detail::anchor_paths(j, o.config_path);
  }
  if (o.seed) j["seed"] = *o.seed;
  if (o.state_scheme) j["state_scheme"] = *o.state_scheme;
  if (o.window_len) j["window_len"] = *o.window_len;
  if (o.k_clusters) j["k_clusters"] = *o.k_clusters;
  if (o.spatial_radius) j["spatial_radius"] = *o.spatial_radius;
  if (o.temporal_radius) j["temporal_radius"] = *o.temporal_radius;
  if (o.smoothing_sigma) j["smoothing_sigma"] = *o.smoothing_sigma;
  if (o.bucket) j["bucket"] = *o.bucket;
  if (o.n_frames) j["simulation"]["n_frames"] = *o.n_frames;
  if (o.n_agents) j["simulation"]["n_agents"] = *o.n_agents;
  return run_config_from_json(j);
}

inline io::LabeledData label_trajectories(const std::vector<Trajectory>& trajs, const RunConfig& cfg) {
  Labeling l = cfg.state_scheme == StateScheme::spectral ? label_spectral(trajs, cfg.spectral_scheme())
                                                         : label_velocity(trajs, cfg.velocity_scheme());
  return {trajs, std::move(l.labels), std::move(l.states)};
}

inline EstimateResult estimate_from_labeled(const io::LabeledData& d, const RunConfig& cfg) {
  const auto obs = collect_observations(d.trajectories, d.labels, d.states.size(), cfg.neighbor_spec(), cfg.dt);
  return estimate_tensor(obs, d.states, {cfg.ridge, cfg.allow_empty});
}

namespace detail {

inline void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing input: ") + what);
}

inline int cmd_simulate(const Options& o, const RunConfig& cfg, OutputSet& out, RunReport& rep) {
  const SimConfig sc = cfg.sim_config();
  sc.validate();
  const auto sim = rep.stage("simulate", [&] { return simulate_swarm(sc); });
  out.add("trajectories.csv", io::format_trajectories(sim.trajectories));
  out.add("labels.csv", io::format_labeled(sim.trajectories, sim.labels, sc.tensor.states));
  out.add("truth_tensor.json", io::format_tensor(sc.tensor));
  if (o.emit_detections) {
    const auto det = rep.stage("corrupt", [&] { return corrupt_to_detections(sim.trajectories, cfg.noise); });
    out.add("detections.csv", io::format_detections(det));
  }
  rep["n_agents"] = sim.trajectories.size();
  return kExitOk;
}

inline int cmd_track(const Options& o, const RunConfig& cfg, OutputSet& out, RunReport& rep) {
  require_input(o.input, "detections CSV");
  const auto det = rep.stage("load", [&] { return io::load_detections(o.input); });
  const auto res = rep.stage("track", [&] { return run_tracker(det, cfg.tracker_config()); });
  out.add("tracks.csv", io::format_trajectories(res.trajectories));
  rep["tracker"] = {{"spawned", res.stats.spawned},
                    {"terminated", res.stats.terminated},
                    {"emitted", res.stats.emitted},
                    {"dropped_short", res.stats.dropped_short},
                    {"merged", res.stats.merged}};
  return kExitOk;
}

inline int cmd_label(const Options& o, const RunConfig& cfg, OutputSet& out, RunReport& rep) {
  require_input(o.input, "trajectories CSV");
  const auto trajs = rep.stage("load", [&] { return io::load_trajectories(o.input); });
  const auto d = rep.stage("label", [&] { return label_trajectories(trajs, cfg); });
  out.add("labeled.csv", io::format_labeled(d.trajectories, d.labels, d.states));
  rep["states"] = d.states.names();
  return kExitOk;
}

inline int cmd_estimate(const Options& o, const RunConfig& cfg, OutputSet& out, RunReport& rep) {
  require_input(o.input, "labeled CSV");
  const auto d = rep.stage("load", [&] { return io::load_labeled(o.input); });
  const auto r = rep.stage("estimate", [&] { return estimate_from_labeled(d, cfg); });
  out.add("tensor.json", io::format_tensor(r.tensor));
  out.add("tensor_table.txt", format_tensor_table(r.tensor));
  rep.set_fits(r);
  return kExitOk;
}

inline int cmd_eval(const Options& o, const RunConfig&, OutputSet& out, RunReport& rep) {
  nlohmann::json metrics = nlohmann::json::object();
  const bool tensors = !o.estimated.empty() || !o.truth.empty();
  const bool tracks = !o.tracks.empty() || !o.truth_tracks.empty();
  if (!tensors && !tracks) throw ConfigError("eval needs --estimated/--truth or --tracks/--truth-tracks");
  if (tensors) {
    require_input(o.estimated, "--estimated tensor");
    require_input(o.truth, "--truth tensor");
    const auto err = rep.stage("tensor_error", [&] {
      return tensor_error(io::load_tensor(o.estimated), io::load_tensor(o.truth));
    });
    metrics["tensor"] = {{"max_abs", err.max_abs}, {"rmse", err.rmse}};
  }
  if (tracks) {
    require_input(o.tracks, "--tracks");
    require_input(o.truth_tracks, "--truth-tracks");
    if (!(o.match_radius > 0.0)) throw ConfigError("--radius must be > 0");
    const auto m = rep.stage("track_metrics", [&] {
      return track_metrics(io::load_trajectories(o.tracks), io::load_trajectories(o.truth_tracks), o.match_radius);
    });
    metrics["tracks"] = {{"identity_switches", m.identity_switches},
                         {"track_purity", m.track_purity},
                         {"coverage", m.coverage},
                         {"purity_per_track", m.purity_per_track}};
  }
  out.add("metrics.json", metrics.dump(2) + "\n");
  return kExitOk;
}

inline int cmd_report(const Options& o, const RunConfig& cfg, OutputSet& out, RunReport& rep) {
  require_input(o.input, "labeled CSV");
  const auto d = rep.stage("load", [&] { return io::load_labeled(o.input); });
  const auto act = rep.stage("activity", [&] { return activity_series(d.trajectories, cfg.bucket); });
  const auto occ = rep.stage("occupancy", [&] { return state_occupancy(d.labels, d.states.size(), cfg.bucket); });
  out.add("activity.csv", format_activity(act));
  out.add("occupancy.csv", format_occupancy(occ, d.states));
  return kExitOk;
}

}  // namespace detail

/// Entry point behind the `collective-fsm` executable. `args` excludes argv[0].
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavioural-state labelling and transition-tensor estimation for collectives", "collective-fsm"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "Run configuration JSON");
  app.add_option("--seed", o.seed, "Override the config seed");
  app.add_option("--out-dir", o.out_dir, "Existing directory for outputs")->capture_default_str();
  app.add_flag("--quiet", o.quiet, "Suppress the summary on stdout");
  app.add_option("--state-scheme", o.state_scheme, "spectral | velocity");
  app.add_option("--window-len", o.window_len);
  app.add_option("--k-clusters", o.k_clusters);
  app.add_option("--spatial-radius", o.spatial_radius);
  app.add_option("--temporal-radius", o.temporal_radius);
  app.add_option("--smoothing-sigma", o.smoothing_sigma);
  app.add_option("--bucket", o.bucket);

  auto* sim = app.add_subcommand("simulate", "Simulate a swarm from a planted tensor");
  sim->add_flag("--emit-detections", o.emit_detections, "Also write noisy anonymous detections");
  sim->add_option("--n-frames", o.n_frames);
  sim->add_option("--n-agents", o.n_agents);
  auto* trk = app.add_subcommand("track", "Link detections into trajectories");
  trk->add_option("detections", o.input)->required();
  auto* lab = app.add_subcommand("label", "Assign behavioural states to trajectories");
  lab->add_option("trajectories", o.input)->required();
  auto* est = app.add_subcommand("estimate", "Estimate the transition tensor from a labeled CSV");
  est->add_option("labeled", o.input)->required();
  auto* ev = app.add_subcommand("eval", "Compare tensors or tracks against ground truth");
  ev->add_option("--estimated", o.estimated);
  ev->add_option("--truth", o.truth);
  ev->add_option("--tracks", o.tracks);
  ev->add_option("--truth-tracks", o.truth_tracks);
  ev->add_option("--radius", o.match_radius)->capture_default_str();
  auto* rpt = app.add_subcommand("report", "Activity and state-occupancy series from a labeled CSV");
  rpt->add_option("labeled", o.input)->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (!std::filesystem::is_directory(o.out_dir))
      throw ConfigError("output directory '" + o.out_dir + "' does not exist");
    const RunConfig cfg = resolve_config(o);
    OutputSet files(o.out_dir);
    RunReport rep(name, cfg);
    if (name == "simulate") detail::cmd_simulate(o, cfg, files, rep);
    else if (name == "track") detail::cmd_track(o, cfg, files, rep);
    else if (name == "label") detail::cmd_label(o, cfg, files, rep);
    else if (name == "estimate") detail::cmd_estimate(o, cfg, files, rep);
    else if (name == "eval") detail::cmd_eval(o, cfg, files, rep);
    else detail::cmd_report(o, cfg, files, rep);
    const std::string report_path = (std::filesystem::path(o.out_dir) / "report.json").string();
    const std::string report = rep.finish(files, report_path);
    files.add("report.json", report);
    files.commit();
    if (!o.quiet)
      for (const auto& p : files.paths()) out << "wrote " << p << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace cfsm::cli
