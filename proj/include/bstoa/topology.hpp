// SPDX-License-Identifier: Apache-2.0
//
// Channel topology, the correlation matrix A whose rows encode the 2x2
// submatrix identities T(i,j) - T(i+1,j) - T(i,j+1) + T(i+1,j+1) = 0, and the
// weighting matrix B = I - A^T (A A^T)^{-1} A that projects onto them.

#pragma once

#include "bstoa/common.hpp"

#include <cstdint>
#include <string>

namespace bstoa {

enum class TopologyKind { Bistatic, Monostatic };

/// M transmit and N receive antennas. Monostatic arrays share antennas, so
/// M == N and the delay matrix is symmetric.
class Topology {
 public:
  static Topology bistatic(int m, int n) {
    if (m < 1 || n < 1) {
      throw Error(ErrorKind::InvalidArgument, "topology needs m >= 1 and n >= 1");
    }
    return Topology(TopologyKind::Bistatic, m, n);
  }

  static Topology monostatic(int m) {
    if (m < 1) throw Error(ErrorKind::InvalidArgument, "topology needs m >= 1");
    return Topology(TopologyKind::Monostatic, m, m);
  }

  TopologyKind kind() const noexcept { return kind_; }
  bool is_monostatic() const noexcept { return kind_ == TopologyKind::Monostatic; }
  int m() const noexcept { return m_; }
  int n() const noexcept { return n_; }
  int subchannels() const noexcept { return m_ * n_; }
  int constraints() const noexcept { return (m_ - 1) * (n_ - 1); }

  bool operator==(const Topology&) const = default;

  std::string describe() const {
    return is_monostatic() ? "monostatic M=" + std::to_string(m_)
                           : "bistatic M=" + std::to_string(m_) + " N=" + std::to_string(n_);
  }

 private:
  Topology(TopologyKind kind, int m, int n) : kind_(kind), m_(m), n_(n) {}

  TopologyKind kind_;
  int m_;
  int n_;
};

/// Entries in {-1, 0, 1}; (M-1)(N-1) rows, M*N columns.
using CorrelationMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;
using WeightMatrix = Eigen::MatrixXd;

/// Builds A row by row. Row p covers the 2x2 block whose top-left element sits
/// at flat column-major index q = p + floor(p / (M-1)) (0-based), so the four
/// nonzeros are at q, q+1, q+M, q+M+1.
inline CorrelationMatrix generate_a(const Topology& topo) {
  const int m = topo.m();
  const int rows = topo.constraints();
  CorrelationMatrix a = CorrelationMatrix::Zero(rows, topo.subchannels());
  for (int p = 0; p < rows; ++p) {
    const int q = p + p / (m - 1);
    a(p, q) = 1;
    a(p, q + 1) = -1;
    a(p, q + m) = -1;
    a(p, q + m + 1) = 1;
  }
  return a;
}

/// B = I - A^T (A A^T)^{-1} A, obtained from a Cholesky solve of
/// (A A^T) X = A rather than an explicit inverse. Throws SingularSystem when
/// A has dependent rows.
inline WeightMatrix compute_b(const CorrelationMatrix& a) {
  const Eigen::Index order = a.cols();
  if (a.rows() == 0) return WeightMatrix::Identity(order, order);

  const Matrix ad = a.cast<double>();
  const Matrix gram = ad * ad.transpose();
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularSystem, "A A^T is not positive definite");
  }
  const Matrix x = llt.solve(ad);
  const double residual = max_abs(gram * x - ad);
  if (!std::isfinite(residual) || residual > 1e-8) {
    throw Error(ErrorKind::SingularSystem,
                "solve of A A^T X = A left residual " + std::to_string(residual));
  }
  WeightMatrix b = Matrix::Identity(order, order) - ad.transpose() * x;
  // Exact symmetry; the solve leaves rounding-level asymmetry.
  return 0.5 * (b + b.transpose());
}

inline WeightMatrix compute_b(const Topology& topo) { return compute_b(generate_a(topo)); }

struct Alphas {
  double a1;  ///< weight of the subchannel itself
  double a2;  ///< same transmitter, other receiver
  double a3;  ///< same receiver, other transmitter
  double a4;  ///< neither antenna shared
};

inline Alphas alphas(const Topology& topo) {
  const double m = topo.m();
  const double n = topo.n();
  const double mn = m * n;
  return {(m + n - 1.0) / mn, (m - 1.0) / mn, (n - 1.0) / mn, -1.0 / mn};
}

enum class EntryType { Type1 = 1, Type2 = 2, Type3 = 3, Type4 = 4 };

/// Classifies the pair of subchannels (z, r), both 0-based column-major flat
/// indices: z = i + M*j for transmitter i, receiver j.
inline EntryType classify_entry(const Topology& topo, int z, int r) {
  const int total = topo.subchannels();
  if (z < 0 || z >= total || r < 0 || r >= total) {
    throw Error(ErrorKind::IndexOutOfRange, "flat subchannel index outside 0..M*N-1");
  }
  const int m = topo.m();
  const bool same_tx = z % m == r % m;
  const bool same_rx = z / m == r / m;
  if (same_tx && same_rx) return EntryType::Type1;
  if (same_tx) return EntryType::Type2;
  if (same_rx) return EntryType::Type3;
  return EntryType::Type4;
}

inline double alpha_for(const Alphas& al, EntryType type) {
  switch (type) {
    case EntryType::Type1: return al.a1;
    case EntryType::Type2: return al.a2;
    case EntryType::Type3: return al.a3;
    case EntryType::Type4: return al.a4;
  }
  return 0.0;
}

}  // namespace bstoa
