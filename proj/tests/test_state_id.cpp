#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "cfsm/state_id.hpp"
#include "scenarios.hpp"

using namespace cfsm;

namespace {

Trajectory circle(Frame n, double radius, double period, Vec2 c = {0, 0}) {
  Trajectory t{"c", {}};
  for (Frame f = 0; f < n; ++f) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(f) / period;
    t.samples.push_back({f, {c.x + radius * std::cos(a), c.y + radius * std::sin(a)}});
  }
  return t;
}

Trajectory line(const std::string& id, Frame n, Vec2 step, Vec2 start = {0, 0}) {
  Trajectory t{id, {}};
  for (Frame f = 0; f < n; ++f) t.samples.push_back({f, start + static_cast<double>(f) * step});
  return t;
}

// direct O(W^2) DFT of the mean-removed x and y series
std::vector<double> dft_power(const Trajectory& t, std::size_t start, int w) {
  std::vector<double> p(static_cast<std::size_t>(w / 2 + 1), 0.0);
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> x(static_cast<std::size_t>(w));
    double mean = 0.0;
    for (int k = 0; k < w; ++k) {
      const auto& q = t.samples[start + static_cast<std::size_t>(k)].pos;
      x[static_cast<std::size_t>(k)] = axis == 0 ? q.x : q.y;
      mean += x[static_cast<std::size_t>(k)];
    }
    mean /= w;
    for (int j = 0; j <= w / 2; ++j) {
      std::complex<double> acc{0.0, 0.0};
      for (int k = 0; k < w; ++k)
        acc += (x[static_cast<std::size_t>(k)] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * j * k / w);
      p[static_cast<std::size_t>(j)] += std::norm(acc);
    }
  }
  return p;
}

}  // namespace

TEST(Spectral, StationaryIsSilent) {
  const auto w = windowed_features(line("s", 1000, {0, 0}, {4, 4}), 1000);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].feature.low_band_power, 0.0);
  EXPECT_EQ(w[0].feature.peak_frequency, 0.0);
  EXPECT_EQ(w[0].mean_speed, 0.0);
}

TEST(Spectral, CirclePeaksAtItsFrequency) {
  const auto t = circle(1000, 5.0, 100.0);
  const auto w = windowed_features(t, 1000);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NEAR(w[0].feature.peak_frequency, 0.01, 1e-12);
}

TEST(Spectral, MatchesDirectDft) {
  Trajectory t{"w", {}};
  for (Frame f = 0; f < 256; ++f) {
    const double x = static_cast<double>(f);
    t.samples.push_back({f, {std::sin(0.3 * x) + 0.01 * x, std::cos(0.05 * x) + std::sin(1.1 * x)}});
  }
  const auto w = windowed_features(t, 128, 64);
  ASSERT_EQ(w.size(), 3u);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto p = dft_power(t, i * 64, 128);
    double low = 0.0;
    for (int j = 1; j <= 10; ++j) low += p[static_cast<std::size_t>(j)];
    EXPECT_NEAR(w[i].feature.low_band_power, low, 1e-9 * low);
    std::size_t peak = 1;
    for (std::size_t j = 2; j < p.size(); ++j)
      if (p[j] > p[peak]) peak = j;
    EXPECT_DOUBLE_EQ(w[i].feature.peak_frequency, static_cast<double>(peak) / 128.0);
    EXPECT_EQ(w[i].center, static_cast<Frame>(i * 64 + 64));
  }
}

TEST(Spectral, DefaultStrideIsQuarterWindow) {
  EXPECT_EQ(windowed_features(circle(2000, 1.0, 50.0), 1000).size(), 5u);
  EXPECT_THROW(windowed_features(circle(999, 1.0, 50.0), 1000), DataError);
  EXPECT_EQ(SpectralScheme{}.window_len, 1000);
}

TEST(KMeans, SeparatesTwoBlobs) {
  std::vector<SpectralFeature> f;
  for (int i = 0; i < 20; ++i) f.push_back({std::pow(10.0, 1.0 + 0.01 * i) - 1.0, 0.01 + 0.0001 * i});
  for (int i = 0; i < 20; ++i) f.push_back({std::pow(10.0, 5.0 + 0.01 * i) - 1.0, 0.2 + 0.0001 * i});
  const auto r = cluster_features(f, 2, 11);
  for (int i = 1; i < 20; ++i) EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)], r.assignments[0]);
  for (int i = 21; i < 40; ++i) EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)], r.assignments[20]);
  EXPECT_NE(r.assignments[0], r.assignments[20]);
}

TEST(KMeans, MatchesBruteForceOptimumOnSmallSet) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SpectralFeature> f;
  for (int i = 0; i < 10; ++i) f.push_back({std::pow(10.0, 4.0 * u(rng)) - 1.0, 0.5 * u(rng)});
  // brute force over all 2-partitions of the z-scored points
  std::vector<std::array<double, 2>> z;
  for (const auto& x : f) z.push_back({std::log10(1.0 + x.low_band_power), x.peak_frequency});
  for (int d = 0; d < 2; ++d) {
    double m = 0, v = 0;
    for (auto& p : z) m += p[d];
    m /= 10;
    for (auto& p : z) v += (p[d] - m) * (p[d] - m);
    for (auto& p : z) p[d] = (p[d] - m) / std::sqrt(v / 10);
  }
  auto cost = [&](const std::vector<int>& a) {
    double total = 0;
    for (int c = 0; c < 2; ++c) {
      double sx = 0, sy = 0;
      int n = 0;
      for (int i = 0; i < 10; ++i)
        if (a[static_cast<std::size_t>(i)] == c) sx += z[static_cast<std::size_t>(i)][0], sy += z[static_cast<std::size_t>(i)][1], ++n;
      if (n == 0) return 1e300;
      for (int i = 0; i < 10; ++i)
        if (a[static_cast<std::size_t>(i)] == c) {
          const double dx = z[static_cast<std::size_t>(i)][0] - sx / n, dy = z[static_cast<std::size_t>(i)][1] - sy / n;
          total += dx * dx + dy * dy;
        }
    }
    return total;
  };
  double best = 1e300;
  for (int mask = 1; mask < 1023; ++mask) {
    std::vector<int> a(10);
    for (int i = 0; i < 10; ++i) a[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    best = std::min(best, cost(a));
  }
  double found = 1e300;
  for (std::uint64_t seed = 0; seed < 10; ++seed) found = std::min(found, cost(cluster_features(f, 2, seed).assignments));
  EXPECT_NEAR(found, best, 1e-9);
}

TEST(KMeans, DegenerateInputs) {
  const std::vector<SpectralFeature> same(5, {1.0, 0.1});
  const auto r = cluster_features(same, 1, 0);
  EXPECT_EQ(r.assignments, std::vector<int>(5, 0));
  EXPECT_THROW(cluster_features(same, 2, 0), DataError);
  EXPECT_THROW(cluster_features({}, 1, 0), DataError);
  EXPECT_THROW(cluster_features(same, 0, 0), ConfigError);
}

TEST(LabelSpectral, RecoversThreeMotionProfiles) {
  // no transitions and loops far from the wall, so every window is pure
  auto cfg = scenarios::pipeline(21, 6000);
  cfg.tensor = TransitionTensor::zeros(cfg.tensor.states, 4);
  for (std::size_t s = 0; s < 3; ++s) cfg.tensor.matrix(s)(static_cast<Eigen::Index>(s), 0) = 1.0;
  cfg.arena = Arena::disc({0, 0}, 5000.0);
  cfg.min_separation = 0.0;
  const auto sim = simulate_swarm(cfg);
  const auto lab = label_spectral(sim.trajectories, {1000, 0, 3, 21});
  ASSERT_EQ(lab.states.size(), 3u);
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < sim.labels.size(); ++i)
    for (std::size_t k = 0; k < sim.labels[i].labels.size(); ++k) {
      hit += lab.labels[i].labels[k] == sim.labels[i].labels[k];
      ++total;
    }
  EXPECT_GE(static_cast<double>(hit) / static_cast<double>(total), 0.95);
}

TEST(LabelSpectral, SingleStationaryAgentIsNonMoving) {
  const auto lab = label_spectral({line("a", 1200, {0, 0}, {3, 3})}, {1000, 0, 1, 0});
  ASSERT_EQ(lab.labels.size(), 1u);
  EXPECT_EQ(lab.labels[0].labels, std::vector<int>(1200, 0));
  EXPECT_EQ(lab.states.size(), 1u);
}

TEST(LabelSpectral, ClustersAreOrderedBySpeed) {
  std::vector<Trajectory> t{line("still", 2000, {0, 0}), circle(2000, 30.0, 40.0), circle(2000, 2.0, 400.0)};
  t[1].id = "fast";
  t[2].id = "slow";
  const auto lab = label_spectral(t, {1000, 0, 3, 1});
  EXPECT_EQ(lab.states.name(0), "non-moving");
  EXPECT_EQ(lab.labels[0].labels.front(), 0);
  EXPECT_EQ(lab.labels[2].labels.front(), 1);
  EXPECT_EQ(lab.labels[1].labels.front(), 2);
}

TEST(Velocity, ClassifiesExamples) {
  const VelocityScheme v;
  EXPECT_EQ(classify_velocity({0.05, 0.0}, v), 0);
  EXPECT_EQ(classify_velocity({0.3, 0.0}, v), 1);
  EXPECT_EQ(classify_velocity({0.0, 0.7}, v), 11);
  EXPECT_EQ(classify_velocity({0.1, 0.0}, v), 1);
  EXPECT_EQ(classify_velocity({0.5, 0.0}, v), 1);
  EXPECT_EQ(classify_velocity({-0.3, -0.3}, v), 6);
  EXPECT_EQ(velocity_state_names(8).size(), 17u);
  EXPECT_EQ(velocity_state_names(8).name(11), "fast-N");
}

TEST(Velocity, RotationByOneSectorShiftsDirection) {
  const VelocityScheme v;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), sp(0.11, 2.0);
  const double step = 2.0 * std::numbers::pi / 8;
  for (int i = 0; i < 2000; ++i) {
    const double a = ang(rng), s = sp(rng);
    if (std::abs(s - 0.5) < 1e-9) continue;
    const int b0 = classify_velocity({s * std::cos(a), s * std::sin(a)}, v);
    const int b1 = classify_velocity({s * std::cos(a + step), s * std::sin(a + step)}, v);
    const int base = b0 > 8 ? 9 : 1;
    const int d0 = b0 - base, d1 = b1 - base;
    if (std::abs(std::fmod(a / step + 0.5, 1.0)) < 1e-9) continue;
    EXPECT_EQ(d1, (d0 + 1) % 8);
  }
}

TEST(Velocity, LabelsFollowCentralDifferences) {
  const auto lab = label_velocity({line("a", 10, {0.0, -1.0})}, {});
  EXPECT_EQ(lab.labels[0].labels, std::vector<int>(10, 15));
  EXPECT_THROW(label_velocity({line("b", 1, {1, 0})}, {}), DataError);
  EXPECT_THROW(label_velocity({}, {0.5, 0.1, 8}), ConfigError);
}

TEST(Activity, StationaryAndUnitSpeed) {
  const auto still = activity_series({line("a", 300, {0, 0})}, 100);
  ASSERT_EQ(still.size(), 3u);
  for (const auto& p : still) EXPECT_EQ(p.mean_speed, 0.0);
  const auto unit = activity_series({line("a", 300, {0.6, 0.8})}, 100);
  for (const auto& p : unit) EXPECT_NEAR(p.mean_speed, 1.0, 1e-12);
  const auto per_frame = activity_series({line("a", 5, {1, 0})}, 1);
  EXPECT_EQ(per_frame.size(), 5u);
  EXPECT_THROW(activity_series({}, 0), ConfigError);
}

TEST(Activity, DecayingSpeedIsNonIncreasing) {
  Trajectory t{"a", {{0, {0, 0}}}};
  for (Frame f = 1; f < 1000; ++f) t.samples.push_back({f, t.samples.back().pos + Vec2{std::pow(0.5, f / 100.0), 0.0}});
  const auto a = activity_series({t}, 100);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LE(a[i].mean_speed, a[i - 1].mean_speed);
}

TEST(Occupancy, FractionsPerBucket) {
  const std::vector<StateLabelSeries> l{{"a", 0, {0, 0, 1, 1}}, {"b", 2, {2, 2}}};
  const auto o = state_occupancy(l, 3, 2);
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(o[0].fraction, (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_EQ(o[1].fraction, (std::vector<double>{0.0, 0.5, 0.5}));
}
