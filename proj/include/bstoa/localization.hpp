// SPDX-License-Identifier: Apache-2.0
//
// Tag positioning from a delay matrix.
//
// Bistatic: every subchannel gives a range-sum |tx_i - p| + |rx_j - p|, so the
// tag lies on an ellipsoid per pair. Solved by damped Gauss-Newton.
// Monostatic: the diagonal gives plain ranges |a_i - p|. Differencing the
// squared range equations against the first anchor yields a linear system.

#pragma once

#include "bstoa/channel.hpp"
#include "bstoa/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace bstoa {

struct PositionFix {
  Point3 position = Point3::Zero();
  double residual_norm = 0.0;  ///< meters, sqrt of the summed squared residuals
  int iterations = 0;
  /// Joint mode only: estimated tag delay in seconds.
  std::optional<double> delta;
  /// Sum of squared residuals after each accepted step, starting with the
  /// initial point.
  std::vector<double> cost_history;
};

struct GaussNewtonOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;  ///< meters
  int max_halvings = 20;
  /// Estimate the tag delay together with the position (needs M*N >= 5).
  bool estimate_delta = false;
};

namespace detail {

inline Point3 unit_or_zero(const Point3& v) {
  const double n = v.norm();
  return n > 0.0 ? Point3(v / n) : Point3::Zero();
}

/// Range-sum residuals c (t_ij - delta) - |tx_i - p| - |rx_j - p|, column-major.
inline Vector range_sum_residuals(const DelayMatrix& t, const std::vector<Point3>& tx,
                                  const std::vector<Point3>& rx, double delta, const Point3& p) {
  Vector r(t.size());
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    const double dj = (rx[j] - p).norm();
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      r[i + t.rows() * j] = kSpeedOfLight * (t(i, j) - delta) - (tx[i] - p).norm() - dj;
    }
  }
  return r;
}

inline void check_anchor_counts(const DelayMatrix& t, const std::vector<Point3>& tx,
                                const std::vector<Point3>& rx) {
  if (static_cast<Eigen::Index>(tx.size()) != t.rows() ||
      static_cast<Eigen::Index>(rx.size()) != t.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "anchor counts do not match the delay matrix");
  }
}

inline Point3 centroid(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  Point3 sum = Point3::Zero();
  for (const auto& p : a) sum += p;
  for (const auto& p : b) sum += p;
  return sum / static_cast<double>(a.size() + b.size());
}

}  // namespace detail

/// Damped Gauss-Newton on sum_ij (c (t_ij - delta) - |tx_i - p| - |rx_j - p|)^2
/// from a single starting point. A step that would raise the cost is halved
/// up to max_halvings times; if none helps, the iterate is final.
inline PositionFix gauss_newton_range_sum(const DelayMatrix& t, const std::vector<Point3>& tx,
                                          const std::vector<Point3>& rx, double delta,
                                          const Point3& initial,
                                          const GaussNewtonOptions& opts = {}) {
  detail::check_anchor_counts(t, tx, rx);
  const Eigen::Index equations = t.size();
  const int unknowns = opts.estimate_delta ? 4 : 3;
  if (equations < unknowns + 1) {
    throw Error(ErrorKind::UnderDetermined,
                "need at least " + std::to_string(unknowns + 1) + " range-sum equations");
  }

  // State: position, plus the tag delay expressed as a range offset c*delta.
  Point3 p = initial;
  double offset = opts.estimate_delta ? 0.0 : kSpeedOfLight * delta;
  auto residuals = [&](const Point3& pos, double off) {
    return detail::range_sum_residuals(t, tx, rx, off / kSpeedOfLight, pos);
  };

  PositionFix fix;
  Vector r = residuals(p, offset);
  double cost = r.squaredNorm();
  fix.cost_history.push_back(cost);

  Matrix jac(equations, unknowns);
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      const Point3 ur = detail::unit_or_zero(p - rx[j]);
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        const Eigen::Index row = i + t.rows() * j;
        // d r / d p = -(u_tx + u_rx); d r / d offset = -1
        jac.row(row).head<3>() = -(detail::unit_or_zero(p - tx[i]) + ur).transpose();
        if (opts.estimate_delta) jac(row, 3) = -1.0;
      }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(jac);
    qr.setThreshold(1e-10);
    if (qr.rank() < unknowns) {
      throw Error(ErrorKind::SingularGeometry, "range-sum Jacobian is rank deficient");
    }
    const Vector step = qr.solve(-r);

    double scale = 1.0;
    bool accepted = false;
    Point3 candidate;
    double candidate_offset = offset;
    Vector candidate_r;
    for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
      candidate = p + scale * step.head<3>();
      if (opts.estimate_delta) candidate_offset = offset + scale * step[3];
      candidate_r = residuals(candidate, candidate_offset);
      if (candidate_r.squaredNorm() <= cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const double moved = (scale * step).norm();
    p = candidate;
    offset = candidate_offset;
    r = std::move(candidate_r);
    cost = r.squaredNorm();
    fix.cost_history.push_back(cost);
    if (moved < opts.step_tolerance) {
      ++iter;
      break;
    }
  }

  fix.position = p;
  fix.residual_norm = std::sqrt(cost);
  fix.iterations = iter;
  if (opts.estimate_delta) fix.delta = offset / kSpeedOfLight;
  return fix;
}

/// Closed-form elliptic localization. With range-sums s_ij = c (t_ij - delta)
/// and one auxiliary range R_i = |tx_i - p| per transmitter, squaring
/// s_ij - R_i = |rx_j - p| and eliminating |p|^2 leaves equations linear in
/// (p, R_1..R_M):
///   2 (rx_j - tx_i)^T p - 2 s_ij R_i = |rx_j|^2 - |tx_i|^2 - s_ij^2.
/// The auxiliaries go on whichever side has fewer antennas. Needs
/// M*N >= 3 + min(M, N) equations.
inline PositionFix localize_bistatic_closed_form(const DelayMatrix& t,
                                                 const std::vector<Point3>& tx,
                                                 const std::vector<Point3>& rx,
                                                 double delta = 0.0) {
  detail::check_anchor_counts(t, tx, rx);
  if (t.cols() < t.rows()) return localize_bistatic_closed_form(t.transpose(), rx, tx, delta);

  const Eigen::Index m = t.rows();
  const Eigen::Index n = t.cols();
  const Eigen::Index unknowns = 3 + m;
  if (m * n < unknowns) {
    throw Error(ErrorKind::UnderDetermined, "closed-form elliptic fix needs M*N >= 3 + min(M, N)");
  }
  Matrix lhs = Matrix::Zero(m * n, unknowns);
  Vector rhs(m * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index row = i + m * j;
      const double s = kSpeedOfLight * (t(i, j) - delta);
      lhs.row(row).head<3>() = 2.0 * (rx[j] - tx[i]).transpose();
      lhs(row, 3 + i) = -2.0 * s;
      rhs[row] = rx[j].squaredNorm() - tx[i].squaredNorm() - s * s;
    }
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
  qr.setThreshold(1e-10);
  if (qr.rank() < unknowns) {
    throw Error(ErrorKind::SingularGeometry, "linearized elliptic system is rank deficient");
  }
  const Vector x = qr.solve(rhs);

  PositionFix fix;
  fix.position = x.head<3>();
  const double cost = detail::range_sum_residuals(t, tx, rx, delta, fix.position).squaredNorm();
  fix.cost_history.push_back(cost);
  fix.residual_norm = std::sqrt(cost);
  return fix;
}

struct MonostaticOptions {
  /// Apply one Gauss-Newton step on the full range residual after the
  /// closed-form solve; kept only if it lowers the residual.
  bool polish = true;
};

/// Closed-form range localization from the diagonal of a monostatic T.
/// With r_i = c (T_ii - delta) / 2,
///   2 (a_i - a_1)^T p = |a_i|^2 - |a_1|^2 - r_i^2 + r_1^2,   i = 2..M.
inline PositionFix localize_monostatic(const DelayMatrix& t, const std::vector<Point3>& anchors,
                                       double delta = 0.0, const MonostaticOptions& opts = {}) {
  if (t.rows() != t.cols() || static_cast<Eigen::Index>(anchors.size()) != t.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "monostatic T must be M x M with M anchors");
  }
  const Eigen::Index m = t.rows();
  if (m < 4) throw Error(ErrorKind::UnderDetermined, "need at least 4 transceivers for a 3D fix");

  Vector ranges(m);
  for (Eigen::Index i = 0; i < m; ++i) ranges[i] = kSpeedOfLight * (t(i, i) - delta) / 2.0;

  Matrix lhs(m - 1, 3);
  Vector rhs(m - 1);
  const Point3& a1 = anchors[0];
  for (Eigen::Index i = 1; i < m; ++i) {
    lhs.row(i - 1) = 2.0 * (anchors[i] - a1).transpose();
    rhs[i - 1] = anchors[i].squaredNorm() - a1.squaredNorm() - ranges[i] * ranges[i] +
                 ranges[0] * ranges[0];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
  // Relative to the largest pivot; anchors in a common plane drop the rank to 2.
  qr.setThreshold(1e-9);
  if (qr.rank() < 3) {
    throw Error(ErrorKind::SingularGeometry, "anchors do not span 3D (rank < 3)");
  }
  Point3 p = qr.solve(rhs);

  auto residuals = [&](const Point3& pos) {
    Vector r(m);
    for (Eigen::Index i = 0; i < m; ++i) r[i] = ranges[i] - (anchors[i] - pos).norm();
    return r;
  };

  PositionFix fix;
  Vector r = residuals(p);
  fix.cost_history.push_back(r.squaredNorm());
  if (opts.polish) {
    Matrix jac(m, 3);
    for (Eigen::Index i = 0; i < m; ++i) {
      jac.row(i) = -detail::unit_or_zero(p - anchors[i]).transpose();
    }
    const Point3 candidate = p + Point3(jac.colPivHouseholderQr().solve(-r));
    const Vector cr = residuals(candidate);
    if (cr.squaredNorm() < r.squaredNorm()) {
      p = candidate;
      r = cr;
      fix.cost_history.push_back(r.squaredNorm());
    }
    fix.iterations = 1;
  }
  fix.position = p;
  fix.residual_norm = r.norm();
  return fix;
}

/// Axis-aligned search box.
struct Box {
  Point3 lo = Point3::Zero();
  Point3 hi = Point3::Constant(10.0);
};

/// Exhaustive grid minimization of the bistatic range-sum cost. Grid points
/// are lo + (hi - lo) * k / n per axis with n = round((hi - lo) / grid_step),
/// so a grid whose step divides another's contains all of its points.
inline Point3 oracle_localize(const DelayMatrix& t, const std::vector<Point3>& tx,
                              const std::vector<Point3>& rx, double delta, double grid_step,
                              const Box& bounds) {
  if (!(grid_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid_step must be > 0");
  detail::check_anchor_counts(t, tx, rx);
  int counts[3];
  for (int k = 0; k < 3; ++k) {
    counts[k] = std::max(1, static_cast<int>(std::lround((bounds.hi[k] - bounds.lo[k]) / grid_step)));
  }
  auto coord = [&](int axis, int k) {
    return bounds.lo[axis] + (bounds.hi[axis] - bounds.lo[axis]) * k / counts[axis];
  };
  Point3 best = bounds.lo;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int ix = 0; ix <= counts[0]; ++ix) {
    for (int iy = 0; iy <= counts[1]; ++iy) {
      for (int iz = 0; iz <= counts[2]; ++iz) {
        const Point3 p(coord(0, ix), coord(1, iy), coord(2, iz));
        const double cost = detail::range_sum_residuals(t, tx, rx, delta, p).squaredNorm();
        if (cost < best_cost) {
          best_cost = cost;
          best = p;
        }
      }
    }
  }
  return best;
}

/// Sum of squared range-sum residuals at p (meters^2).
inline double range_sum_cost(const DelayMatrix& t, const std::vector<Point3>& tx,
                             const std::vector<Point3>& rx, double delta, const Point3& p) {
  detail::check_anchor_counts(t, tx, rx);
  return detail::range_sum_residuals(t, tx, rx, delta, p).squaredNorm();
}

/// Bistatic range-sum localization by damped Gauss-Newton.
///
/// With `initial` given, one run from that point. Otherwise runs start from
/// the anchor centroid, the closed-form elliptic fix (when determined) and the
/// corners of the anchors' bounding box, and the lowest-cost fix wins: the
/// range-sum cost has local minima that a centroid start alone falls into.
inline PositionFix localize_bistatic(const DelayMatrix& t, const std::vector<Point3>& tx,
                                     const std::vector<Point3>& rx, double delta = 0.0,
                                     std::optional<Point3> initial = std::nullopt,
                                     const GaussNewtonOptions& opts = {}) {
  if (initial) return gauss_newton_range_sum(t, tx, rx, delta, *initial, opts);

  std::vector<Point3> starts{detail::centroid(tx, rx)};
  const auto m = static_cast<Eigen::Index>(tx.size());
  const auto n = static_cast<Eigen::Index>(rx.size());
  if (!opts.estimate_delta && m * n >= 3 + std::min(m, n)) {
    try {
      starts.push_back(localize_bistatic_closed_form(t, tx, rx, delta).position);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularGeometry) throw;
    }
  }
  Point3 lo = tx.front(), hi = tx.front();
  for (const auto* set : {&tx, &rx}) {
    for (const auto& a : *set) {
      lo = lo.cwiseMin(a);
      hi = hi.cwiseMax(a);
    }
  }
  for (int corner = 0; corner < 8; ++corner) {
    starts.emplace_back(corner & 1 ? hi.x() : lo.x(), corner & 2 ? hi.y() : lo.y(),
                        corner & 4 ? hi.z() : lo.z());
  }

  std::optional<PositionFix> best;
  std::optional<Error> last_failure;
  for (const auto& start : starts) {
    try {
      PositionFix fix = gauss_newton_range_sum(t, tx, rx, delta, start, opts);
      if (!best || fix.residual_norm < best->residual_norm) best = std::move(fix);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularGeometry) throw;
      last_failure = e;
    }
  }
  if (!best) throw *last_failure;
  return *best;
}

/// Topology dispatch used by the sweep driver and the CLI: closed-form
/// elliptic fix for bistatic (Gauss-Newton when the closed form is
/// under-determined), closed-form range fix for monostatic.
///
/// Gauss-Newton over all M*N range-sums is not used for bistatic sweeps: its
/// model lies in the range of B, so the fixes from the LS and the constrained
/// estimate coincide.
inline PositionFix localize(const Scene& scene, const DelayMatrix& t) {
  if (scene.topo.is_monostatic()) return localize_monostatic(t, scene.tx(), scene.delta);
  const int m = scene.topo.m();
  const int n = scene.topo.n();
  if (m * n >= 3 + std::min(m, n)) {
    return localize_bistatic_closed_form(t, scene.tx(), scene.rx(), scene.delta);
  }
  return localize_bistatic(t, scene.tx(), scene.rx(), scene.delta);
}

}  // namespace bstoa
