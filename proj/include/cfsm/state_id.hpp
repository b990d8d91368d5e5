#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fftw3.h>

#include "cfsm/core.hpp"

namespace cfsm {

// ------------------------------------------------------------------ spectral

struct SpectralFeature {
  double low_band_power = 0.0;  // summed x+y power of the ten lowest non-DC bins
  double peak_frequency = 0.0;  // cycles/frame, in [0, 0.5]
};

struct WindowFeature {
  Frame center = 0;
  SpectralFeature feature;
  double mean_speed = 0.0;  // mean per-frame displacement inside the window
};

inline constexpr int kLowBandBins = 10;
inline constexpr double kSilentPower = 1e-12;

namespace detail {

/// Owns an FFTW real-to-complex plan and its buffers for one transform size.
class RealFft {
public:
  explicit RealFft(int n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)))) {
    plan_ = fftw_plan_dft_r2c_1d(n_, in_, out_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  double* input() { return in_; }

  /// Adds |X_k|^2 for k = 0..n/2 into `power`.
  void accumulate_power(std::vector<double>& power) {
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) power[static_cast<std::size_t>(k)] += out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace detail

/// Power-spectrum features of sliding windows over one trajectory. Each
/// window's x and y series are mean-removed, transformed, and their power
/// spectra summed bin-wise. stride <= 0 selects window_len / 4.
inline std::vector<WindowFeature> windowed_features(const Trajectory& traj, int window_len, int stride = 0) {
  if (window_len < 4) throw ConfigError("window_len must be >= 4");
  if (stride <= 0) stride = std::max(1, window_len / 4);
  const auto n = traj.samples.size();
  if (n < static_cast<std::size_t>(window_len))
    throw DataError("trajectory '" + traj.id + "' has " + std::to_string(n) + " frames, shorter than window " +
                    std::to_string(window_len));

  detail::RealFft fft(window_len);
  const int half = window_len / 2;
  std::vector<double> power(static_cast<std::size_t>(half + 1));
  std::vector<WindowFeature> out;
  for (std::size_t start = 0; start + static_cast<std::size_t>(window_len) <= n; start += static_cast<std::size_t>(stride)) {
    std::fill(power.begin(), power.end(), 0.0);
    for (int axis = 0; axis < 2; ++axis) {
      double mean = 0.0;
      for (int k = 0; k < window_len; ++k) {
        const auto& p = traj.samples[start + static_cast<std::size_t>(k)].pos;
        mean += axis == 0 ? p.x : p.y;
      }
      mean /= window_len;
      for (int k = 0; k < window_len; ++k) {
        const auto& p = traj.samples[start + static_cast<std::size_t>(k)].pos;
        fft.input()[k] = (axis == 0 ? p.x : p.y) - mean;
      }
      fft.accumulate_power(power);
    }

    WindowFeature wf;
    wf.center = traj.samples[start].frame + window_len / 2;
    double total = 0.0;
    for (int k = 1; k <= half; ++k) total += power[static_cast<std::size_t>(k)];
    if (total >= kSilentPower) {
      for (int k = 1; k <= std::min(kLowBandBins, half); ++k) wf.feature.low_band_power += power[static_cast<std::size_t>(k)];
      int peak = 1;
      for (int k = 2; k <= half; ++k)
        if (power[static_cast<std::size_t>(k)] > power[static_cast<std::size_t>(peak)]) peak = k;
      wf.feature.peak_frequency = static_cast<double>(peak) / window_len;
    }
    double dist = 0.0;
    for (int k = 1; k < window_len; ++k)
      dist += (traj.samples[start + static_cast<std::size_t>(k)].pos - traj.samples[start + static_cast<std::size_t>(k) - 1].pos).norm();
    wf.mean_speed = dist / (window_len - 1);
    out.push_back(wf);
  }
  return out;
}

struct ClusterResult {
  std::vector<int> assignments;
  std::vector<SpectralFeature> centroids;  // mean member feature in the original units
  int iterations = 0;
};

inline constexpr int kMaxKMeansIterations = 300;

/// k-means on (log10(1 + low_band_power), peak_frequency) after per-dimension
/// z-scoring. Farthest-point initialisation from a seeded first pick; ties go
/// to the lower index everywhere; emptied clusters take the point farthest
/// from its own centroid.
inline ClusterResult cluster_features(const std::vector<SpectralFeature>& features, int k, std::uint64_t seed) {
  const std::size_t n = features.size();
  if (n == 0) throw DataError("no features to cluster");
  if (k < 1) throw ConfigError("k must be >= 1");

  std::vector<std::array<double, 2>> pts(n);
  for (std::size_t i = 0; i < n; ++i)
    pts[i] = {std::log10(1.0 + features[i].low_band_power), features[i].peak_frequency};
  {
    auto sorted = pts;
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (static_cast<std::size_t>(k) > distinct)
      throw DataError("k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) + " distinct feature points");
  }
  for (int d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& p : pts) mean += p[d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& p : pts) var += (p[d] - mean) * (p[d] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (auto& p : pts) p[d] = sd > 0.0 ? (p[d] - mean) / sd : p[d] - mean;
  }
  auto d2 = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
  };

  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::array<double, 2>> cent;
  std::mt19937_64 rng(seed);
  cent.push_back(pts[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = d2(pts[i], cent[0]);
  while (cent.size() < kk) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (nearest[i] > nearest[far]) far = i;
    cent.push_back(pts[far]);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d2(pts[i], cent.back()));
  }

  auto assign_all = [&](std::vector<int>& a) {
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = d2(pts[i], cent[0]);
      for (std::size_t c = 1; c < kk; ++c) {
        const double dc = d2(pts[i], cent[c]);
        if (dc < bd) {
          bd = dc;
          best = static_cast<int>(c);
        }
      }
      a[i] = best;
    }
    std::vector<std::size_t> count(kk, 0);
    for (int c : a) ++count[static_cast<std::size_t>(c)];
    for (std::size_t c = 0; c < kk; ++c) {
      if (count[c] > 0) continue;
      std::size_t far = n;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto ci = static_cast<std::size_t>(a[i]);
        if (count[ci] < 2) continue;
        const double di = d2(pts[i], cent[ci]);
        if (di > fd) {
          fd = di;
          far = i;
        }
      }
      --count[static_cast<std::size_t>(a[far])];
      a[far] = static_cast<int>(c);
      count[c] = 1;
    }
  };
  auto update = [&](const std::vector<int>& a) {
    std::vector<std::array<double, 2>> sum(kk, {0.0, 0.0});
    std::vector<std::size_t> count(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(a[i]);
      sum[c][0] += pts[i][0];
      sum[c][1] += pts[i][1];
      ++count[c];
    }
    for (std::size_t c = 0; c < kk; ++c)
      cent[c] = {sum[c][0] / static_cast<double>(count[c]), sum[c][1] / static_cast<double>(count[c])};
  };

  ClusterResult res;
  res.assignments.assign(n, 0);
  assign_all(res.assignments);
  std::vector<int> next(n);
  for (res.iterations = 1; res.iterations <= kMaxKMeansIterations; ++res.iterations) {
    update(res.assignments);
    assign_all(next);
    if (next == res.assignments) break;
    res.assignments.swap(next);
  }
  res.iterations = std::min(res.iterations, kMaxKMeansIterations);

  res.centroids.assign(kk, {});
  std::vector<std::size_t> count(kk, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(res.assignments[i]);
    res.centroids[c].low_band_power += features[i].low_band_power;
    res.centroids[c].peak_frequency += features[i].peak_frequency;
    ++count[c];
  }
  for (std::size_t c = 0; c < kk; ++c) {
    res.centroids[c].low_band_power /= static_cast<double>(count[c]);
    res.centroids[c].peak_frequency /= static_cast<double>(count[c]);
  }
  return res;
}

struct SpectralScheme {
  int window_len = 1000;
  int stride = 0;  // <= 0 selects window_len / 4
  int k_clusters = 3;
  std::uint64_t seed = 0;
};

struct Labeling {
  StateSet states;
  std::vector<StateLabelSeries> labels;  // one per input trajectory, same order
};

inline StateSet spectral_state_names(int k) {
  if (k == 3) return StateSet({"non-moving", "random-wandering", "forward-moving"});
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("state" + std::to_string(i));
  return StateSet(std::move(names));
}

/// Clusters windowed spectral features pooled over all trajectories, orders
/// the clusters by ascending mean within-window speed and gives every frame
/// the state of its nearest window centre (ties to the earlier window).
inline Labeling label_spectral(const std::vector<Trajectory>& trajectories, const SpectralScheme& scheme) {
  std::vector<std::vector<WindowFeature>> per_traj;
  std::vector<SpectralFeature> pooled;
  for (const auto& t : trajectories) {
    per_traj.push_back(windowed_features(t, scheme.window_len, scheme.stride));
    for (const auto& w : per_traj.back()) pooled.push_back(w.feature);
  }
  Labeling out;
  out.states = spectral_state_names(scheme.k_clusters);
  if (trajectories.empty()) return out;

  const auto clusters = cluster_features(pooled, scheme.k_clusters, scheme.seed);
  const auto kk = static_cast<std::size_t>(scheme.k_clusters);
  std::vector<double> speed_sum(kk, 0.0);
  std::vector<std::size_t> members(kk, 0);
  {
    std::size_t w = 0;
    for (const auto& windows : per_traj)
      for (const auto& wf : windows) {
        const auto c = static_cast<std::size_t>(clusters.assignments[w++]);
        speed_sum[c] += wf.mean_speed;
        ++members[c];
      }
  }
  std::vector<std::size_t> order(kk);
  for (std::size_t c = 0; c < kk; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return speed_sum[a] / static_cast<double>(members[a]) < speed_sum[b] / static_cast<double>(members[b]);
  });
  std::vector<int> rank(kk);
  for (std::size_t r = 0; r < kk; ++r) rank[order[r]] = static_cast<int>(r);

  std::size_t w0 = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    const auto& windows = per_traj[i];
    StateLabelSeries ls{t.id, t.first_frame(), {}};
    ls.labels.reserve(t.size());
    std::size_t w = 0;
    for (const auto& s : t.samples) {
      while (w + 1 < windows.size() && std::abs(windows[w + 1].center - s.frame) < std::abs(windows[w].center - s.frame)) ++w;
      ls.labels.push_back(rank[static_cast<std::size_t>(clusters.assignments[w0 + w])]);
    }
    w0 += windows.size();
    out.labels.push_back(std::move(ls));
  }
  return out;
}

// ------------------------------------------------------------------ velocity

struct VelocityScheme {
  double speed_low = 0.1;
  double speed_high = 0.5;
  int n_directions = 8;

  void validate() const {
    if (!(speed_low > 0.0 && speed_low < speed_high)) throw ConfigError("need 0 < speed_low < speed_high");
    if (n_directions < 1) throw ConfigError("n_directions must be >= 1");
  }
  int n_states() const { return 1 + 2 * n_directions; }
};

inline StateSet velocity_state_names(int n_directions) {
  static const std::array<const char*, 8> compass{"E", "NE", "N", "NW", "W", "SW", "S", "SE"};
  auto dir = [&](int d) {
    return n_directions == 8 ? std::string(compass[static_cast<std::size_t>(d)]) : "d" + std::to_string(d);
  };
  std::vector<std::string> names{"not-moving"};
  for (int d = 0; d < n_directions; ++d) names.push_back("normal-" + dir(d));
  for (int d = 0; d < n_directions; ++d) names.push_back("fast-" + dir(d));
  return StateSet(std::move(names));
}

/// Direction bin d is centred on angle d * 2pi / n (d = 0 points along +x).
inline int direction_bin(Vec2 v, int n_directions) {
  const double width = 2.0 * std::numbers::pi / n_directions;
  const auto d = static_cast<long long>(std::floor(std::atan2(v.y, v.x) / width + 0.5));
  const long long n = n_directions;
  return static_cast<int>(((d % n) + n) % n);
}

/// 0 = not moving; 1..n = normal moving per direction; n+1..2n = fast moving.
/// Both thresholds belong to the normal band.
inline int classify_velocity(Vec2 v, const VelocityScheme& scheme) {
  const double speed = v.norm();
  if (speed < scheme.speed_low) return 0;
  const int d = direction_bin(v, scheme.n_directions);
  return speed > scheme.speed_high ? 1 + scheme.n_directions + d : 1 + d;
}

/// Per-frame central-difference velocity (one-sided at the ends).
inline std::vector<Vec2> frame_velocities(const Trajectory& t) {
  const auto n = t.samples.size();
  std::vector<Vec2> v(n);
  if (n < 2) return v;
  v[0] = t.samples[1].pos - t.samples[0].pos;
  v[n - 1] = t.samples[n - 1].pos - t.samples[n - 2].pos;
  for (std::size_t k = 1; k + 1 < n; ++k) v[k] = 0.5 * (t.samples[k + 1].pos - t.samples[k - 1].pos);
  return v;
}

inline Labeling label_velocity(const std::vector<Trajectory>& trajectories, const VelocityScheme& scheme) {
  scheme.validate();
  Labeling out;
  out.states = velocity_state_names(scheme.n_directions);
  for (const auto& t : trajectories) {
    if (t.size() < 2) throw DataError("trajectory '" + t.id + "' needs at least 2 frames for velocity labels");
    StateLabelSeries ls{t.id, t.first_frame(), {}};
    for (const auto& v : frame_velocities(t)) ls.labels.push_back(classify_velocity(v, scheme));
    out.labels.push_back(std::move(ls));
  }
  return out;
}

// ------------------------------------------------------------------ activity

struct ActivityPoint {
  Frame frame = 0;  // bucket start
  double mean_speed = 0.0;
};

inline Frame bucket_start(Frame f, Frame bucket) { return (f / bucket) * bucket; }

/// Mean per-frame speed of every individual alive in each bucket of frames.
/// Speed is the forward displacement (backward at a trajectory's last frame).
inline std::vector<ActivityPoint> activity_series(const std::vector<Trajectory>& trajectories, Frame bucket) {
  if (bucket < 1) throw ConfigError("bucket must be >= 1");
  std::map<Frame, std::pair<double, std::size_t>> acc;
  for (const auto& t : trajectories) {
    const auto n = t.samples.size();
    if (n < 2) continue;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = k + 1 < n ? (t.samples[k + 1].pos - t.samples[k].pos).norm()
                                 : (t.samples[k].pos - t.samples[k - 1].pos).norm();
      auto& [sum, count] = acc[bucket_start(t.samples[k].frame, bucket)];
      sum += s;
      ++count;
    }
  }
  std::vector<ActivityPoint> out;
  for (const auto& [f, sc] : acc) out.push_back({f, sc.first / static_cast<double>(sc.second)});
  return out;
}

struct OccupancyRow {
  Frame frame = 0;
  std::vector<double> fraction;  // per state
};

/// Fraction of labeled (individual, frame) samples in each state per bucket.
inline std::vector<OccupancyRow> state_occupancy(const std::vector<StateLabelSeries>& labels, std::size_t n_states,
                                                 Frame bucket) {
  if (bucket < 1) throw ConfigError("bucket must be >= 1");
  std::map<Frame, std::vector<std::size_t>> acc;
  for (const auto& ls : labels)
    for (std::size_t k = 0; k < ls.labels.size(); ++k) {
      auto& row = acc[bucket_start(ls.first_frame + static_cast<Frame>(k), bucket)];
      row.resize(n_states, 0);
      ++row[static_cast<std::size_t>(ls.labels[k])];
    }
  std::vector<OccupancyRow> out;
  for (const auto& [f, counts] : acc) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    OccupancyRow r{f, {}};
    for (auto c : counts) r.fraction.push_back(static_cast<double>(c) / static_cast<double>(total));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cfsm
