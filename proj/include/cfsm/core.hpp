#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfsm/error.hpp"

namespace cfsm {

using Frame = std::int64_t;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend Vec2 operator*(Vec2 v, double s) { return {s * v.x, s * v.y}; }
  friend bool operator==(Vec2, Vec2) = default;

  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double squared_distance(Vec2 a, Vec2 b) { return (a - b).squared_norm(); }

/// Neighbourhood test shared by the simulator and the estimator so both
/// agree bit-for-bit on who counts as a neighbour.
inline bool within_radius(Vec2 a, Vec2 b, double radius) {
  return squared_distance(a, b) <= radius * radius;
}

struct TimedPosition {
  Frame frame = 0;
  Vec2 pos;
  friend bool operator==(const TimedPosition&, const TimedPosition&) = default;
};

/// One individual's contiguous run of positions, one sample per frame.
struct Trajectory {
  std::string id;
  std::vector<TimedPosition> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  Frame first_frame() const { return samples.front().frame; }
  Frame last_frame() const { return samples.back().frame; }
  bool alive_at(Frame f) const { return !samples.empty() && f >= first_frame() && f <= last_frame(); }
  /// Position at frame f; requires alive_at(f) and contiguity.
  Vec2 at(Frame f) const { return samples[static_cast<std::size_t>(f - first_frame())].pos; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Anonymous detection points observed in one frame.
struct DetectionFrame {
  Frame frame = 0;
  std::vector<Vec2> points;
  friend bool operator==(const DetectionFrame&, const DetectionFrame&) = default;
};

/// Ordered catalogue of behavioural state names.
class StateSet {
public:
  StateSet() = default;
  explicit StateSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw DataError("state set must contain at least one state");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw DataError("state names must be non-empty");
      if (!seen.insert(n).second) throw DataError("duplicate state name '" + n + "'");
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<int> index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<int>(it - names_.begin());
  }

  friend bool operator==(const StateSet&, const StateSet&) = default;

private:
  std::vector<std::string> names_;
};

/// Per-frame state labels b_i(t) for one individual, starting at first_frame.
struct StateLabelSeries {
  std::string id;
  Frame first_frame = 0;
  std::vector<int> labels;

  Frame last_frame() const { return first_frame + static_cast<Frame>(labels.size()) - 1; }
  bool covers(Frame f) const { return !labels.empty() && f >= first_frame && f <= last_frame(); }
  int at(Frame f) const { return labels[static_cast<std::size_t>(f - first_frame)]; }

  friend bool operator==(const StateLabelSeries&, const StateLabelSeries&) = default;
};

/// (1, n_0, n_1, ..., n_{|B|-1}): constant unity followed by neighbour counts per state.
struct EnvironmentVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }
  friend bool operator==(const EnvironmentVector&, const EnvironmentVector&) = default;
};

struct TransitionMatrix {
  int state = 0;
  Eigen::MatrixXd coeffs;  // |B| x m, coeffs(target, feature)
};

/// T-hat: one |B| x m matrix per source state.
struct TransitionTensor {
  StateSet states;
  int env_dim = 0;
  std::vector<TransitionMatrix> matrices;

  std::size_t n_states() const { return states.size(); }
  const Eigen::MatrixXd& matrix(std::size_t s) const { return matrices.at(s).coeffs; }
  Eigen::MatrixXd& matrix(std::size_t s) { return matrices.at(s).coeffs; }

  static TransitionTensor zeros(StateSet states, int env_dim) {
    TransitionTensor t;
    const auto n = static_cast<Eigen::Index>(states.size());
    t.states = std::move(states);
    t.env_dim = env_dim;
    for (Eigen::Index s = 0; s < n; ++s)
      t.matrices.push_back({static_cast<int>(s), Eigen::MatrixXd::Zero(n, env_dim)});
    return t;
  }
};

inline bool operator==(const TransitionTensor& a, const TransitionTensor& b) {
  if (!(a.states == b.states) || a.env_dim != b.env_dim || a.matrices.size() != b.matrices.size())
    return false;
  for (std::size_t s = 0; s < a.matrices.size(); ++s) {
    const auto& ma = a.matrices[s];
    const auto& mb = b.matrices[s];
    if (ma.state != mb.state || ma.coeffs.rows() != mb.coeffs.rows() ||
        ma.coeffs.cols() != mb.coeffs.cols() || ma.coeffs != mb.coeffs)
      return false;
  }
  return true;
}

struct Distribution {
  std::vector<double> probs;
  bool degenerate = false;  // raw vector had no positive mass; probs is uniform
};

/// Negative entries are set to zero, then the vector is rescaled to sum 1.
/// A vector with no positive mass maps to the uniform distribution.
inline Distribution clip_renormalize(std::span<const double> raw) {
  Distribution d;
  d.probs.reserve(raw.size());
  double total = 0.0;
  for (double v : raw) {
    const double c = v > 0.0 ? v : 0.0;
    d.probs.push_back(c);
    total += c;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    d.degenerate = true;
    std::fill(d.probs.begin(), d.probs.end(), raw.empty() ? 0.0 : 1.0 / static_cast<double>(raw.size()));
    return d;
  }
  for (double& p : d.probs) p /= total;
  return d;
}

constexpr double kStochasticTolerance = 1e-12;

/// Lists every violated tensor invariant; an empty result means valid.
/// With `stochastic`, column 0 of each matrix must be a probability vector
/// and every other column must sum to zero.
inline std::vector<std::string> validate_tensor(const TransitionTensor& tensor, bool stochastic) {
  std::vector<std::string> out;
  const auto n = static_cast<Eigen::Index>(tensor.states.size());
  if (n < 1) out.emplace_back("state set is empty");
  if (tensor.env_dim < 1) out.emplace_back("env_dim must be >= 1");
  if (tensor.env_dim != n + 1)
    out.emplace_back("env_dim " + std::to_string(tensor.env_dim) + " != 1 + |B| (" +
                     std::to_string(n + 1) + ")");
  if (static_cast<Eigen::Index>(tensor.matrices.size()) != n)
    out.emplace_back("matrix count " + std::to_string(tensor.matrices.size()) + " != |B|");

  for (std::size_t s = 0; s < tensor.matrices.size(); ++s) {
    const auto& tm = tensor.matrices[s];
    const std::string tag = "matrix " + std::to_string(s) + ": ";
    if (tm.state != static_cast<int>(s)) out.push_back(tag + "state index mismatch");
    if (tm.coeffs.rows() != n) out.push_back(tag + "matrix row count != |B|");
    if (tm.coeffs.cols() != tensor.env_dim) out.push_back(tag + "matrix column count != env_dim");
    if (!tm.coeffs.allFinite()) out.push_back(tag + "non-finite entry");
    if (!stochastic || tm.coeffs.rows() != n || tm.coeffs.cols() < 1) continue;

    const auto base = tm.coeffs.col(0);
    if (base.minCoeff() < 0.0 || base.maxCoeff() > 1.0)
      out.push_back(tag + "base column entry outside [0,1]");
    if (std::abs(base.sum() - 1.0) > kStochasticTolerance)
      out.push_back(tag + "base column does not sum to 1");
    for (Eigen::Index k = 1; k < tm.coeffs.cols(); ++k)
      if (std::abs(tm.coeffs.col(k).sum()) > kStochasticTolerance)
        out.push_back(tag + "interaction column " + std::to_string(k) + " does not sum to 0");
  }
  return out;
}

struct TensorError {
  double max_abs = 0.0;
  double rmse = 0.0;
};

inline TensorError tensor_error(const TransitionTensor& estimated, const TransitionTensor& truth) {
  if (estimated.n_states() != truth.n_states() || estimated.env_dim != truth.env_dim ||
      estimated.matrices.size() != truth.matrices.size())
    throw DataError("tensor shapes differ");
  TensorError e;
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < truth.matrices.size(); ++s) {
    const auto& a = estimated.matrix(s);
    const auto& b = truth.matrix(s);
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("tensor shapes differ");
    const Eigen::ArrayXXd d = (a - b).array().abs();
    if (d.size() > 0) e.max_abs = std::max(e.max_abs, d.maxCoeff());
    sq += d.square().sum();
    count += static_cast<std::size_t>(d.size());
  }
  e.rmse = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
  return e;
}

}  // namespace cfsm
