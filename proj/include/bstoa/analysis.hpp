// SPDX-License-Identifier: Apache-2.0
//
// Closed-form MSE of the constrained estimators, Cramer-Rao bounds for both
// topologies, and Monte-Carlo error statistics.

#pragma once

#include "bstoa/common.hpp"
#include "bstoa/topology.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <utility>

namespace bstoa {

struct MseReport {
  Matrix per_entry_mse;             ///< M x N, seconds^2
  std::optional<double> sigma0_sq;  ///< sigma^2 / L when known

  double mean() const { return per_entry_mse.mean(); }

  double diagonal_mean() const {
    const Eigen::Index k = std::min(per_entry_mse.rows(), per_entry_mse.cols());
    return per_entry_mse.diagonal().sum() / static_cast<double>(k);
  }

  /// Mean over i != j; NaN for a 1x1 matrix.
  double off_diagonal_mean() const {
    const Eigen::Index k = std::min(per_entry_mse.rows(), per_entry_mse.cols());
    const auto count = static_cast<double>(per_entry_mse.size() - k);
    return (per_entry_mse.sum() - per_entry_mse.diagonal().sum()) / count;
  }
};

/// Bistatic: (M+N-1)/(MN) sigma0^2 everywhere. Monostatic: (2M-1)/M^2 on the
/// diagonal, (M-1)/M^2 off it.
inline MseReport theoretical_mse_iid(const Topology& topo, double sigma0_sq) {
  if (!(sigma0_sq >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma0^2 must be >= 0");
  const Alphas al = alphas(topo);
  MseReport report{Matrix::Constant(topo.m(), topo.n(), al.a1 * sigma0_sq), sigma0_sq};
  if (topo.is_monostatic()) {
    const double m = topo.m();
    report.per_entry_mse.setConstant((m - 1.0) / (m * m) * sigma0_sq);
    report.per_entry_mse.diagonal().setConstant(al.a1 * sigma0_sq);
  }
  return report;
}

/// Conventional LS: every entry has MSE sigma0^2 = sigma^2 / L.
inline MseReport theoretical_mse_ls(const Topology& topo, double sigma0_sq) {
  if (!(sigma0_sq >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma0^2 must be >= 0");
  return {Matrix::Constant(topo.m(), topo.n(), sigma0_sq), sigma0_sq};
}

/// Independent, non-identical noise. `sigmas_sq(i, j)` is the observation-level
/// variance of subchannel (i, j); it is divided by the pilot length here.
/// Bistatic entry z: sum_r B(z,r)^2 s_r. Monostatic entry z with mirror z':
/// sum_r ((B(z,r) + B(z',r)) / 2)^2 s_r.
inline MseReport theoretical_mse_independent(const Topology& topo, const Matrix& sigmas_sq,
                                             int pilot_len) {
  if (sigmas_sq.rows() != topo.m() || sigmas_sq.cols() != topo.n()) {
    throw Error(ErrorKind::DimensionMismatch, "variance matrix does not match " + topo.describe());
  }
  if (pilot_len < 1) throw Error(ErrorKind::InvalidArgument, "pilot length must be >= 1");
  if ((sigmas_sq.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "variances must be >= 0");
  }
  const WeightMatrix b = compute_b(topo);
  const Vector s = vec(sigmas_sq) / static_cast<double>(pilot_len);
  const int m = topo.m();

  Matrix weights = b;  // rows: linear map from t_hat to each estimated entry
  if (topo.is_monostatic()) {
    for (int z = 0; z < topo.subchannels(); ++z) {
      const int mirror = (z / m) + m * (z % m);
      weights.row(z) = 0.5 * (b.row(z) + b.row(mirror));
    }
  }
  const Vector per_entry = weights.array().square().matrix() * s;
  return {unvec(per_entry, topo.m(), topo.n()), std::nullopt};
}

struct CrlbReport {
  /// Bistatic: (MN x MN) bound on cov(t). Monostatic: (M x M) inverse Fisher
  /// information of the one-way delays h.
  Matrix covariance_bound;
  /// M x N lower bound on the variance of each subchannel estimate.
  Matrix subchannel_bounds;
};

/// C >= (sigma^2 / L) B.
inline CrlbReport crlb_bistatic(const Topology& topo, double sigma_sq, int pilot_len) {
  if (topo.is_monostatic()) {
    throw Error(ErrorKind::WrongTopology, "crlb_bistatic needs a bistatic topology");
  }
  if (pilot_len < 1) throw Error(ErrorKind::InvalidArgument, "pilot length must be >= 1");
  CrlbReport report;
  report.covariance_bound = (sigma_sq / pilot_len) * compute_b(topo);
  report.subchannel_bounds = unvec(report.covariance_bound.diagonal(), topo.m(), topo.n());
  return report;
}

/// J_h = (2L / sigma^2) (M I + 1 1^T), from t_ij = h_i + h_j with all M^2
/// subchannels observed independently.
inline Matrix fisher_information_monostatic(const Topology& topo, double sigma_sq,
                                            int pilot_len) {
  if (!topo.is_monostatic()) {
    throw Error(ErrorKind::WrongTopology, "Fisher information of h needs a monostatic topology");
  }
  const int m = topo.m();
  const Matrix core = m * Matrix::Identity(m, m) + Matrix::Ones(m, m);
  return (2.0 * pilot_len / sigma_sq) * core;
}

/// J_h^{-1} via the rank-one update identity:
/// (M I + 1 1^T)^{-1} = (I - 1 1^T / (2M)) / M.
inline CrlbReport crlb_monostatic(const Topology& topo, double sigma_sq, int pilot_len) {
  if (!topo.is_monostatic()) {
    throw Error(ErrorKind::WrongTopology, "crlb_monostatic needs a monostatic topology");
  }
  if (pilot_len < 1) throw Error(ErrorKind::InvalidArgument, "pilot length must be >= 1");
  const int m = topo.m();
  const double md = m;
  const double scale = sigma_sq / (4.0 * pilot_len);
  CrlbReport report;
  report.covariance_bound = Matrix::Constant(m, m, -scale / (md * md));
  report.covariance_bound.diagonal().setConstant(scale * (2.0 * md - 1.0) / (md * md));

  const Matrix& c = report.covariance_bound;
  report.subchannel_bounds.resize(m, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      report.subchannel_bounds(i, j) = i == j ? 4.0 * c(i, i) : c(i, i) + c(j, j) + 2.0 * c(i, j);
    }
  }
  return report;
}

/// Running sums of estimation error centred on the true T. Merging two
/// accumulators equals accumulating their trials in sequence.
class ErrorAccumulator {
 public:
  ErrorAccumulator() = default;
  ErrorAccumulator(Eigen::Index rows, Eigen::Index cols, bool track_covariance = false)
      : rows_(rows),
        cols_(cols),
        sum_(Vector::Zero(rows * cols)),
        sum_sq_(Vector::Zero(rows * cols)),
        track_covariance_(track_covariance) {
    if (track_covariance_) outer_ = Matrix::Zero(rows * cols, rows * cols);
  }

  void add(const DelayMatrix& t_true, const DelayMatrix& t_est) {
    if (t_true.rows() != rows_ || t_true.cols() != cols_ || t_est.rows() != rows_ ||
        t_est.cols() != cols_) {
      throw Error(ErrorKind::DimensionMismatch, "trial dimensions differ from accumulator");
    }
    const Vector e = vec(t_est - t_true);
    sum_ += e;
    sum_sq_ += e.array().square().matrix();
    if (track_covariance_) outer_.selfadjointView<Eigen::Lower>().rankUpdate(e);
    ++count_;
  }

  void merge(const ErrorAccumulator& other) {
    if (other.count_ == 0) return;
    if (count_ == 0 && sum_.size() == 0) {
      *this = other;
      return;
    }
    if (other.rows_ != rows_ || other.cols_ != cols_ ||
        other.track_covariance_ != track_covariance_) {
      throw Error(ErrorKind::DimensionMismatch, "cannot merge differently shaped accumulators");
    }
    sum_ += other.sum_;
    sum_sq_ += other.sum_sq_;
    if (track_covariance_) outer_ += other.outer_;
    count_ += other.count_;
  }

  long long trials() const noexcept { return count_; }

  MseReport mse() const {
    require_trials();
    return {unvec(sum_sq_ / static_cast<double>(count_), rows_, cols_), std::nullopt};
  }

  Matrix mean_error() const {
    require_trials();
    return unvec(sum_ / static_cast<double>(count_), rows_, cols_);
  }

  /// (MN x MN) second moment of the error about zero, i.e. the error
  /// covariance around the known true T.
  Matrix covariance() const {
    require_trials();
    if (!track_covariance_) {
      throw Error(ErrorKind::InvalidArgument, "accumulator was built without covariance tracking");
    }
    Matrix full = outer_.selfadjointView<Eigen::Lower>();
    return full / static_cast<double>(count_);
  }

 private:
  void require_trials() const {
    if (count_ == 0) throw Error(ErrorKind::EmptyInput, "no trials accumulated");
  }

  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  Vector sum_;
  Vector sum_sq_;
  Matrix outer_;
  bool track_covariance_ = false;
  long long count_ = 0;
};

struct EmpiricalStats {
  MseReport mse;
  Matrix covariance;  ///< (MN x MN), centred on the true T
};

/// Per-entry MSE and error covariance over (t_true, t_estimated) pairs.
inline EmpiricalStats empirical_mse(std::span<const std::pair<DelayMatrix, DelayMatrix>> trials) {
  if (trials.empty()) throw Error(ErrorKind::EmptyInput, "empirical_mse needs at least one trial");
  ErrorAccumulator acc(trials.front().first.rows(), trials.front().first.cols(), true);
  for (const auto& [truth, est] : trials) acc.add(truth, est);
  return {acc.mse(), acc.covariance()};
}

/// ||empirical - bound||_F / ||bound||_F
inline double frobenius_relative_error(const Matrix& empirical, const Matrix& bound) {
  if (empirical.rows() != bound.rows() || empirical.cols() != bound.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "covariance shapes differ");
  }
  return (empirical - bound).norm() / bound.norm();
}

}  // namespace bstoa
