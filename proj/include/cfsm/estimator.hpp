#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfsm/core.hpp"

namespace cfsm {

struct NeighborSpec {
  double spatial_radius = 0.0;
  Frame temporal_radius = 0;

  void validate() const {
    if (!(spatial_radius >= 0.0) || !std::isfinite(spatial_radius)) throw ConfigError("spatial_radius must be >= 0");
    if (temporal_radius < 0) throw ConfigError("temporal_radius must be >= 0");
  }
};

/// Labeled trajectories indexed by frame for neighbour queries.
class Population {
public:
  Population(const std::vector<Trajectory>& trajectories, const std::vector<StateLabelSeries>& labels,
             std::size_t n_states)
      : traj_(&trajectories), labels_(&labels), n_states_(n_states) {
    if (trajectories.size() != labels.size()) throw DataError("trajectory and label counts differ");
    Frame lo = std::numeric_limits<Frame>::max(), hi = std::numeric_limits<Frame>::min();
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto& t = trajectories[i];
      const auto& l = labels[i];
      if (t.id != l.id) throw DataError("label series '" + l.id + "' does not match trajectory '" + t.id + "'");
      if (t.empty()) continue;
      if (t.last_frame() - t.first_frame() + 1 != static_cast<Frame>(t.size()))
        throw DataError("trajectory '" + t.id + "' is not contiguous");
      if (l.first_frame != t.first_frame() || l.labels.size() != t.size())
        throw DataError("labels for '" + t.id + "' do not span the trajectory");
      for (int s : l.labels)
        if (s < 0 || static_cast<std::size_t>(s) >= n_states) throw DataError("label out of range for '" + t.id + "'");
      lo = std::min(lo, t.first_frame());
      hi = std::max(hi, t.last_frame());
    }
    if (lo > hi) return;
    first_ = lo;
    alive_.resize(static_cast<std::size_t>(hi - lo + 1));
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      const auto& t = trajectories[i];
      for (const auto& s : t.samples) alive_[static_cast<std::size_t>(s.frame - first_)].push_back(static_cast<std::uint32_t>(i));
    }
  }

  std::size_t size() const { return traj_->size(); }
  std::size_t n_states() const { return n_states_; }
  const Trajectory& trajectory(std::size_t i) const { return (*traj_)[i]; }
  const StateLabelSeries& labels(std::size_t i) const { return (*labels_)[i]; }

  std::span<const std::uint32_t> alive_at(Frame f) const {
    if (alive_.empty() || f < first_ || f >= first_ + static_cast<Frame>(alive_.size())) return {};
    return alive_[static_cast<std::size_t>(f - first_)];
  }

  /// e_i(t) = (1, n_0, ..., n_{|B|-1}). Individual j != i counts once, in its
  /// state at the frame t' (|t' - t| <= temporal radius, nearest first, earlier
  /// on ties) at which it lies within the spatial radius of x_i(t).
  EnvironmentVector environment(std::size_t i, Frame t, const NeighborSpec& spec) const {
    if (i >= size() || !trajectory(i).alive_at(t))
      throw DataError("individual " + std::to_string(i) + " not alive at frame " + std::to_string(t));
    const auto& ti = trajectory(i);
    EnvironmentVector e;
    e.values.assign(n_states_ + 1, 0.0);
    e.values[0] = 1.0;
    const Vec2 xi = ti.at(t);
    std::vector<std::uint32_t> seen;
    for (Frame off = 0; off <= spec.temporal_radius; ++off) {
      for (const Frame tp : {t - off, t + off}) {
        for (const auto j : alive_at(tp)) {
          if (j == i) continue;
          if (off > 0 && std::find(seen.begin(), seen.end(), j) != seen.end()) continue;
          if (!within_radius(trajectory(j).at(tp), xi, spec.spatial_radius)) continue;
          e.values[1 + static_cast<std::size_t>(labels(j).at(tp))] += 1.0;
          if (spec.temporal_radius > 0) seen.push_back(j);
        }
        if (off == 0) break;
      }
    }
    return e;
  }

private:
  const std::vector<Trajectory>* traj_;
  const std::vector<StateLabelSeries>* labels_;
  std::size_t n_states_;
  Frame first_ = 0;
  std::vector<std::vector<std::uint32_t>> alive_;
};

inline EnvironmentVector build_environment_vector(std::size_t i, Frame t, const std::vector<Trajectory>& trajectories,
                                                  const std::vector<StateLabelSeries>& labels, std::size_t n_states,
                                                  const NeighborSpec& spec) {
  return Population(trajectories, labels, n_states).environment(i, t, spec);
}

/// (e, next state) training pairs bucketed by source state. Features are
/// stored row-major, env_dim values per observation.
struct ObservationSet {
  struct Bucket {
    std::vector<double> features;
    std::vector<int> next;
    std::size_t size() const { return next.size(); }
  };

  std::size_t n_states = 0;
  std::size_t env_dim = 0;
  std::vector<Bucket> buckets;

  ObservationSet() = default;
  ObservationSet(std::size_t n_states_, std::size_t env_dim_)
      : n_states(n_states_), env_dim(env_dim_), buckets(n_states_) {}

  void add(int source, std::span<const double> e, int next) {
    if (source < 0 || static_cast<std::size_t>(source) >= n_states || next < 0 ||
        static_cast<std::size_t>(next) >= n_states)
      throw DataError("observation state out of range");
    if (e.size() != env_dim) throw DataError("environment vector has wrong dimension");
    auto& b = buckets[static_cast<std::size_t>(source)];
    b.features.insert(b.features.end(), e.begin(), e.end());
    b.next.push_back(next);
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& b : buckets) n += b.size();
    return n;
  }
};

/// Every (i, t) with both t and t + dt labeled contributes (e_i(t), b_i(t+dt))
/// to bucket b_i(t).
inline ObservationSet collect_observations(const Population& pop, const NeighborSpec& spec, Frame dt = 1) {
  if (dt < 1) throw ConfigError("dt must be >= 1");
  spec.validate();
  ObservationSet obs(pop.n_states(), pop.n_states() + 1);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto& ls = pop.labels(i);
    const auto n = static_cast<Frame>(ls.labels.size());
    for (Frame k = 0; k + dt < n; ++k) {
      const Frame t = ls.first_frame + k;
      const auto e = pop.environment(i, t, spec);
      obs.add(ls.labels[static_cast<std::size_t>(k)], e.values, ls.labels[static_cast<std::size_t>(k + dt)]);
    }
  }
  return obs;
}

inline ObservationSet collect_observations(const std::vector<Trajectory>& trajectories,
                                           const std::vector<StateLabelSeries>& labels, std::size_t n_states,
                                           const NeighborSpec& spec, Frame dt = 1) {
  return collect_observations(Population(trajectories, labels, n_states), spec, dt);
}

struct EstimateOptions {
  double ridge = 0.0;
  bool allow_empty = false;  // empty buckets become flagged zero matrices
};

struct BucketFit {
  std::size_t n_obs = 0;
  bool placeholder = false;
  bool ridge_fallback = false;
  double lambda = 0.0;
  double condition = 0.0;             // of the Gram matrix over the active features
  std::vector<int> inactive_features;  // identically zero in this bucket; coefficients fixed at 0
};

struct EstimateResult {
  TransitionTensor tensor;
  std::vector<BucketFit> fits;

  bool any_fallback() const {
    return std::any_of(fits.begin(), fits.end(), [](const BucketFit& f) { return f.ridge_fallback; });
  }
};

inline constexpr double kMaxGramCondition = 1e12;
inline constexpr double kFallbackRidgeScale = 1e-8;

/// Per source state s: T_s = C G^-1 with G = sum e e^T and C = sum y e^T,
/// y the one-hot next state. Features that are zero in every observation of
/// a bucket are left out of its solve. If the remaining Gram matrix is
/// singular or has condition > 1e12, a ridge of 1e-8 * trace(G) / m is added
/// and the fit is flagged.
inline EstimateResult estimate_tensor(const ObservationSet& obs, const StateSet& states, const EstimateOptions& opt = {}) {
  if (!(opt.ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
  if (obs.n_states != states.size()) throw DataError("observation set and state set disagree on |B|");
  const auto nb = static_cast<Eigen::Index>(states.size());
  const auto m = static_cast<Eigen::Index>(obs.env_dim);
  EstimateResult res;
  res.tensor = TransitionTensor::zeros(states, static_cast<int>(m));

  for (Eigen::Index s = 0; s < nb; ++s) {
    const auto& b = obs.buckets[static_cast<std::size_t>(s)];
    BucketFit fit;
    fit.n_obs = b.size();
    if (b.size() == 0) {
      if (!opt.allow_empty) throw DataError("no observations for source state '" + states.name(static_cast<std::size_t>(s)) + "'");
      fit.placeholder = true;
      res.fits.push_back(fit);
      continue;
    }

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(nb, m);
    for (std::size_t o = 0; o < b.size(); ++o) {
      const Eigen::Map<const Eigen::VectorXd> e(b.features.data() + o * obs.env_dim, m);
      gram.noalias() += e * e.transpose();
      cross.row(b.next[o]) += e.transpose();
    }

    std::vector<Eigen::Index> active;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (gram(k, k) > 0.0) active.push_back(k);
      else fit.inactive_features.push_back(static_cast<int>(k));
    }
    const auto ma = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd g(ma, ma), c(nb, ma);
    for (Eigen::Index a = 0; a < ma; ++a) {
      c.col(a) = cross.col(active[static_cast<std::size_t>(a)]);
      for (Eigen::Index q = 0; q < ma; ++q) g(a, q) = gram(active[static_cast<std::size_t>(a)], active[static_cast<std::size_t>(q)]);
    }

    double lambda = opt.ridge;
    auto condition_of = [&](double lam) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g + lam * Eigen::MatrixXd::Identity(ma, ma), Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    };
    fit.condition = condition_of(lambda);
    if (!(fit.condition <= kMaxGramCondition)) {
      fit.ridge_fallback = true;
      lambda += kFallbackRidgeScale * gram.trace() / static_cast<double>(m);
      fit.condition = condition_of(lambda);
    }
    fit.lambda = lambda;

    const Eigen::MatrixXd lhs = g + lambda * Eigen::MatrixXd::Identity(ma, ma);
    const Eigen::MatrixXd sol = lhs.ldlt().solve(c.transpose());  // ma x |B|
    auto& out = res.tensor.matrix(static_cast<std::size_t>(s));
    for (Eigen::Index a = 0; a < ma; ++a) out.col(active[static_cast<std::size_t>(a)]) = sol.row(a).transpose();
    res.fits.push_back(std::move(fit));
  }
  return res;
}

/// T_s e before clipping.
inline std::vector<double> raw_prediction(const TransitionTensor& tensor, int s, const EnvironmentVector& e) {
  if (s < 0 || static_cast<std::size_t>(s) >= tensor.n_states()) throw DataError("source state out of range");
  if (static_cast<int>(e.size()) != tensor.env_dim) throw DataError("environment vector dimension != env_dim");
  const Eigen::Map<const Eigen::VectorXd> ev(e.values.data(), static_cast<Eigen::Index>(e.size()));
  const Eigen::VectorXd raw = tensor.matrix(static_cast<std::size_t>(s)) * ev;
  return {raw.data(), raw.data() + raw.size()};
}

/// Next-state distribution: T_s e with negatives clipped and renormalised;
/// uniform (flagged degenerate) when nothing positive remains.
inline Distribution predict_distribution(const TransitionTensor& tensor, int s, const EnvironmentVector& e) {
  const auto raw = raw_prediction(tensor, s, e);
  return clip_renormalize(raw);
}

}  // namespace cfsm
