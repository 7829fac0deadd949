// SPDX-License-Identifier: Apache-2.0
//
// Conventional least-squares TOA estimate and the topology-constrained
// estimators built on it.

#pragma once

#include "bstoa/channel.hpp"
#include "bstoa/common.hpp"
#include "bstoa/topology.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace bstoa {

/// Per-subchannel mean over the L pilot rows. With S = I_MN (x) 1_L this is
/// exactly (S^T S)^{-1} S^T y.
inline DelayMatrix estimate_ls(const ObservationBlock& obs, const Topology& topo) {
  const int l = obs.pilot_len;
  if (l < 1 || obs.y.rows() != static_cast<Eigen::Index>(l) * topo.m() ||
      obs.y.cols() != topo.n()) {
    throw Error(ErrorKind::DimensionMismatch, "observation block must be (L*M) x N for " +
                                                  topo.describe());
  }
  DelayMatrix t(topo.m(), topo.n());
  for (int i = 0; i < topo.m(); ++i) {
    t.row(i) = obs.y.middleRows(static_cast<Eigen::Index>(i) * l, l).colwise().sum() / l;
  }
  return t;
}

/// vec(result) = B vec(t_hat).
inline DelayMatrix estimate_bistatic(const DelayMatrix& t_hat, const WeightMatrix& b) {
  if (b.rows() != t_hat.size() || b.cols() != t_hat.size()) {
    throw Error(ErrorKind::DimensionMismatch, "weight matrix order must equal M*N");
  }
  return unvec(b * vec(t_hat), t_hat.rows(), t_hat.cols());
}

/// Projection by B followed by symmetrization, (T + T^T) / 2. The second step
/// keeps A vec(T) = 0 because A's null space is closed under transposition.
inline DelayMatrix estimate_monostatic(const DelayMatrix& t_hat, const WeightMatrix& b) {
  if (t_hat.rows() != t_hat.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "monostatic delay matrix must be square");
  }
  const DelayMatrix projected = estimate_bistatic(t_hat, b);
  return 0.5 * (projected + projected.transpose());
}

/// Dispatches on topology kind.
inline DelayMatrix estimate_proposed(const DelayMatrix& t_hat, const WeightMatrix& b,
                                     const Topology& topo) {
  if (t_hat.rows() != topo.m() || t_hat.cols() != topo.n()) {
    throw Error(ErrorKind::DimensionMismatch, "delay matrix does not match " + topo.describe());
  }
  return topo.is_monostatic() ? estimate_monostatic(t_hat, b) : estimate_bistatic(t_hat, b);
}

/// max |A vec(t)|, evaluated directly from the 2x2 block identities.
inline double constraint_residual(const DelayMatrix& t) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j + 1 < t.cols(); ++j) {
    for (Eigen::Index i = 0; i + 1 < t.rows(); ++i) {
      const double r = t(i, j) - t(i + 1, j) - t(i, j + 1) + t(i + 1, j + 1);
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

struct EstimateReport {
  DelayMatrix t_hat;    ///< conventional LS
  DelayMatrix t_tilde;  ///< topology-constrained
  double constraint_residual = 0.0;
};

inline EstimateReport estimate(const ObservationBlock& obs, const Topology& topo,
                               const WeightMatrix& b) {
  EstimateReport report;
  report.t_hat = estimate_ls(obs, topo);
  report.t_tilde = estimate_proposed(report.t_hat, b, topo);
  report.constraint_residual = constraint_residual(report.t_tilde);
  return report;
}

struct DelayComponents {
  Vector h;  ///< uplink (transmitter side) delays
  Vector g;  ///< downlink (receiver side) delays
};

/// Splits a constraint-satisfying T into delta + h (+) g^T. Only the sums
/// h_i + g_j are identifiable, so the caller fixes g_1 = gauge_g1. For a
/// monostatic T pass gauge_g1 = (T(0,0) - delta) / 2 to obtain h == g.
inline DelayComponents decompose(const DelayMatrix& t, double delta, double gauge_g1) {
  if (t.size() == 0) throw Error(ErrorKind::DimensionMismatch, "empty delay matrix");
  const double scale = std::max(1.0, max_abs(t));
  const double residual = constraint_residual(t);
  if (!(residual <= 1e-9 * scale)) {
    throw Error(ErrorKind::ConstraintViolated,
                "delay matrix violates A vec(T) = 0 (residual " + std::to_string(residual) + ")");
  }
  DelayComponents c;
  c.h = t.col(0).array() - delta - gauge_g1;
  c.g = t.row(0).transpose().array() - delta - c.h[0];
  return c;
}

}  // namespace bstoa
