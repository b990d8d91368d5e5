#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfsm/arena.hpp"
#include "cfsm/core.hpp"

namespace cfsm {

struct TrackerConfig {
  double claim_radius = 5.0;
  int max_unclaimed = 10;
  std::optional<Arena> arena;  // agents leaving it are terminated
  int min_track_len = 10;
  double velocity_blend = 0.5;  // weight of the newly observed displacement
  double merge_radius = -1.0;   // < 0 selects claim_radius / 2
  int merge_frames = 10;
  double smoothing_sigma = 20.0;

  double effective_merge_radius() const { return merge_radius < 0.0 ? claim_radius / 2.0 : merge_radius; }

  void validate() const {
    if (!(claim_radius > 0.0) || !std::isfinite(claim_radius)) throw ConfigError("claim_radius must be > 0");
    if (max_unclaimed < 0) throw ConfigError("max_unclaimed must be >= 0");
    if (min_track_len < 2) throw ConfigError("min_track_len must be >= 2");
    if (!(velocity_blend >= 0.0 && velocity_blend <= 1.0)) throw ConfigError("velocity_blend must lie in [0,1]");
    if (merge_frames < 1) throw ConfigError("merge_frames must be >= 1");
    if (!(smoothing_sigma >= 0.0)) throw ConfigError("smoothing_sigma must be >= 0");
    if (arena && !arena->valid()) throw ConfigError("tracker arena is degenerate");
  }
};

/// A live hypothesis: predicted motion plus the positions it has produced.
struct AgentTrack {
  std::int64_t id = 0;
  Vec2 pos;
  Vec2 vel;
  int frames_unclaimed = 0;
  Frame last_claimed = 0;
  std::vector<TimedPosition> history;
};

struct TrackerStats {
  std::size_t spawned = 0;
  std::size_t terminated = 0;  // ended by timeout or leaving the arena
  std::size_t emitted = 0;     // trajectories written out (incl. end-of-stream flush)
  std::size_t dropped_short = 0;
  std::size_t merged = 0;
};

inline std::string track_id(std::int64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trk%06lld", static_cast<long long>(n));
  return buf;
}

/// Online predict / claim / coast tracker over detection-point streams.
class Tracker {
public:
  explicit Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<AgentTrack>& agents() const { return agents_; }
  const TrackerStats& stats() const { return stats_; }

  /// Advances to `frame`. Skipped frame indices are processed as empty.
  std::vector<Trajectory> step(const DetectionFrame& frame) {
    std::vector<Trajectory> finished;
    if (last_frame_ && frame.frame <= *last_frame_)
      throw DataError("detection frame " + std::to_string(frame.frame) + " is not after frame " +
                      std::to_string(*last_frame_));
    if (last_frame_)
      for (Frame f = *last_frame_ + 1; f < frame.frame; ++f) process(f, {}, finished);
    process(frame.frame, frame.points, finished);
    last_frame_ = frame.frame;
    return finished;
  }

  /// Emits every live agent that meets the minimum length and clears state.
  std::vector<Trajectory> flush() {
    std::vector<Trajectory> finished;
    for (auto& a : agents_) emit(a, finished);
    agents_.clear();
    merge_count_.clear();
    return finished;
  }

private:
  void process(Frame f, const std::vector<Vec2>& points, std::vector<Trajectory>& finished) {
    // predict
    std::vector<Vec2> prev(agents_.size());
    for (std::size_t a = 0; a < agents_.size(); ++a) {
      prev[a] = agents_[a].pos;
      agents_[a].pos += agents_[a].vel;
    }

    // associate: greedy over ascending distance, ties by agent id then point index
    const double r2 = cfg_.claim_radius * cfg_.claim_radius;
    std::vector<std::tuple<double, std::int64_t, std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < agents_.size(); ++a)
      for (std::size_t p = 0; p < points.size(); ++p) {
        const double d2 = squared_distance(agents_[a].pos, points[p]);
        if (d2 <= r2) pairs.emplace_back(d2, agents_[a].id, p, a);
      }
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> agent_taken(agents_.size(), 0), point_taken(points.size(), 0);
    for (const auto& [d2, id, p, a] : pairs) {
      if (agent_taken[a] || point_taken[p]) continue;
      agent_taken[a] = point_taken[p] = 1;
      auto& ag = agents_[a];
      const double beta = cfg_.velocity_blend;
      ag.vel = beta * (points[p] - prev[a]) + (1.0 - beta) * ag.vel;
      ag.pos = points[p];
      ag.frames_unclaimed = 0;
      ag.last_claimed = f;
      ag.history.push_back({f, ag.pos});
    }

    // coast the rest along their linear projection
    for (std::size_t a = 0; a < agents_.size(); ++a) {
      if (agent_taken[a]) continue;
      agents_[a].frames_unclaimed += 1;
      agents_[a].history.push_back({f, agents_[a].pos});
    }

    // spawn
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (point_taken[p]) continue;
      AgentTrack ag;
      ag.id = next_id_++;
      ag.pos = points[p];
      ag.last_claimed = f;
      ag.history.push_back({f, ag.pos});
      agents_.push_back(std::move(ag));
      ++stats_.spawned;
    }

    // terminate
    std::vector<AgentTrack> alive;
    alive.reserve(agents_.size());
    for (auto& a : agents_) {
      const bool timed_out = a.frames_unclaimed > cfg_.max_unclaimed;
      const bool left = cfg_.arena && !cfg_.arena->contains(a.pos);
      if (timed_out || left) {
        ++stats_.terminated;
        emit(a, finished);
        forget_pairs(a.id);
      } else {
        alive.push_back(std::move(a));
      }
    }
    agents_ = std::move(alive);

    merge();
  }

  void merge() {
    const double mr2 = cfg_.effective_merge_radius() * cfg_.effective_merge_radius();
    std::vector<char> absorbed(agents_.size(), 0);
    std::map<std::pair<std::int64_t, std::int64_t>, int> next;
    for (std::size_t a = 0; a < agents_.size(); ++a) {
      if (absorbed[a]) continue;
      for (std::size_t b = a + 1; b < agents_.size(); ++b) {
        if (absorbed[b]) continue;
        if (squared_distance(agents_[a].pos, agents_[b].pos) > mr2) continue;
        const auto key = std::make_pair(agents_[a].id, agents_[b].id);
        const auto it = merge_count_.find(key);
        const int run = (it == merge_count_.end() ? 0 : it->second) + 1;
        if (run >= cfg_.merge_frames) {
          absorbed[b] = 1;  // agents_ is ordered by id, so b is the younger one
          ++stats_.merged;
        } else {
          next[key] = run;
        }
      }
    }
    merge_count_ = std::move(next);
    if (std::find(absorbed.begin(), absorbed.end(), 1) == absorbed.end()) return;
    std::vector<AgentTrack> kept;
    for (std::size_t a = 0; a < agents_.size(); ++a)
      if (!absorbed[a]) kept.push_back(std::move(agents_[a]));
    agents_ = std::move(kept);
  }

  void forget_pairs(std::int64_t id) {
    std::erase_if(merge_count_, [id](const auto& kv) { return kv.first.first == id || kv.first.second == id; });
  }

  void emit(AgentTrack& a, std::vector<Trajectory>& finished) {
    // trailing projected samples were never confirmed by a detection
    const Frame first = a.history.front().frame;
    a.history.resize(static_cast<std::size_t>(a.last_claimed - first + 1));
    if (static_cast<int>(a.history.size()) < cfg_.min_track_len) {
      ++stats_.dropped_short;
      return;
    }
    ++stats_.emitted;
    finished.push_back({track_id(a.id), std::move(a.history)});
  }

  TrackerConfig cfg_;
  std::vector<AgentTrack> agents_;
  std::int64_t next_id_ = 0;
  std::optional<Frame> last_frame_;
  std::map<std::pair<std::int64_t, std::int64_t>, int> merge_count_;
  TrackerStats stats_;
};

/// Normalised Gaussian kernel truncated at +-ceil(3 sigma); near the ends the
/// kernel is renormalised over the samples that exist. sigma = 0 is identity.
inline Trajectory smooth_trajectory(const Trajectory& traj, double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("smoothing sigma must be >= 0");
  if (sigma == 0.0 || traj.samples.size() < 2) return traj;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(radius + 1));
  for (std::ptrdiff_t k = 0; k <= radius; ++k)
    w[static_cast<std::size_t>(k)] = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));

  const auto n = static_cast<std::ptrdiff_t>(traj.samples.size());
  Trajectory out{traj.id, traj.samples};
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - radius);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + radius);
    double sx = 0.0, sy = 0.0, sw = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double wj = w[static_cast<std::size_t>(std::abs(j - i))];
      sx += wj * traj.samples[static_cast<std::size_t>(j)].pos.x;
      sy += wj * traj.samples[static_cast<std::size_t>(j)].pos.y;
      sw += wj;
    }
    out.samples[static_cast<std::size_t>(i)].pos = {sx / sw, sy / sw};
  }
  return out;
}

struct TrackRunResult {
  std::vector<Trajectory> trajectories;
  TrackerStats stats;
};

/// Folds the tracker over `stream`, flushes at end-of-stream and smooths
/// every emitted trajectory with cfg.smoothing_sigma.
inline TrackRunResult run_tracker(const std::vector<DetectionFrame>& stream, const TrackerConfig& cfg) {
  Tracker tracker(cfg);
  TrackRunResult res;
  for (const auto& fr : stream) {
    auto done = tracker.step(fr);
    for (auto& t : done) res.trajectories.push_back(std::move(t));
  }
  for (auto& t : tracker.flush()) res.trajectories.push_back(std::move(t));
  for (auto& t : res.trajectories) t = smooth_trajectory(t, cfg.smoothing_sigma);
  res.stats = tracker.stats();
  return res;
}

struct TrackMetrics {
  std::size_t identity_switches = 0;
  double track_purity = 1.0;  // frame-weighted over all tracks
  double coverage = 1.0;
  std::vector<double> purity_per_track;
  std::vector<int> majority_identity;        // index into ground truth, -1 if never matched
  std::vector<std::vector<int>> assignment;  // per track sample, -1 if unmatched
};

/// Matches every track sample to the nearest ground-truth individual alive in
/// that frame and within `radius` (ties to the lower ground-truth index).
inline TrackMetrics track_metrics(const std::vector<Trajectory>& tracks,
                                  const std::vector<Trajectory>& ground_truth, double radius) {
  std::unordered_map<Frame, std::vector<std::pair<int, Vec2>>> by_frame;
  std::size_t truth_samples = 0;
  for (std::size_t g = 0; g < ground_truth.size(); ++g)
    for (const auto& s : ground_truth[g].samples) {
      by_frame[s.frame].emplace_back(static_cast<int>(g), s.pos);
      ++truth_samples;
    }

  TrackMetrics m;
  std::unordered_map<Frame, std::vector<int>> covered;  // frame -> matched truth indices
  std::size_t total_frames = 0, majority_frames = 0;
  const double r2 = radius * radius;
  for (const auto& t : tracks) {
    std::vector<int> assign(t.samples.size(), -1);
    for (std::size_t k = 0; k < t.samples.size(); ++k) {
      const auto it = by_frame.find(t.samples[k].frame);
      if (it == by_frame.end()) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [g, p] : it->second) {  // ascending g
        const double d2 = squared_distance(p, t.samples[k].pos);
        if (d2 <= r2 && d2 < best) {
          best = d2;
          assign[k] = g;
        }
      }
      if (assign[k] >= 0) covered[t.samples[k].frame].push_back(assign[k]);
    }

    int last = -1;
    std::map<int, std::size_t> votes;
    for (int g : assign) {
      if (g < 0) continue;
      if (last >= 0 && g != last) ++m.identity_switches;
      last = g;
      ++votes[g];
    }
    int major = -1;
    std::size_t major_n = 0;
    for (const auto& [g, n] : votes)
      if (n > major_n) {
        major = g;
        major_n = n;
      }
    m.majority_identity.push_back(major);
    m.purity_per_track.push_back(t.samples.empty() ? 1.0
                                                   : static_cast<double>(major_n) / static_cast<double>(t.samples.size()));
    total_frames += t.samples.size();
    majority_frames += major_n;
    m.assignment.push_back(std::move(assign));
  }

  std::size_t matched = 0;
  for (auto& [f, gs] : covered) {
    std::sort(gs.begin(), gs.end());
    matched += static_cast<std::size_t>(std::unique(gs.begin(), gs.end()) - gs.begin());
  }
  m.track_purity = total_frames ? static_cast<double>(majority_frames) / static_cast<double>(total_frames) : 1.0;
  m.coverage = truth_samples ? static_cast<double>(matched) / static_cast<double>(truth_samples) : 1.0;
  return m;
}

}  // namespace cfsm
