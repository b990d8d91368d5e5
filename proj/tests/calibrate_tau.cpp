// Re-derives the recovery tolerance in calibration.hpp: runs the recovery
// scenario for ten seeds and prints max_abs per seed with summary statistics.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "scenarios.hpp"

int main(int argc, char** argv) {
  const int n_frames = argc > 1 ? std::atoi(argv[1]) : 50000;
  const std::uint64_t base = 1000;
  std::vector<double> errs;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto e = scenarios::recovery_error(base + s, n_frames);
    errs.push_back(e.max_abs);
    std::printf("seed %llu max_abs %.6g rmse %.6g\n", static_cast<unsigned long long>(base + s), e.max_abs, e.rmse);
  }
  double mean = 0.0;
  for (double v : errs) mean += v;
  mean /= static_cast<double>(errs.size());
  double var = 0.0;
  for (double v : errs) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(errs.size() - 1));
  const double mx = *std::max_element(errs.begin(), errs.end());
  std::printf("mean %.6g sd %.6g max %.6g\n", mean, sd, mx);
  std::printf("tau = max(mean + 3 sd, 1.5 max) = %.6g\n", std::max(mean + 3.0 * sd, 1.5 * mx));
}
