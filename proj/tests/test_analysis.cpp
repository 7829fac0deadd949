// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "bstoa/analysis.hpp"
#include "bstoa/channel.hpp"
#include "bstoa/estimator.hpp"

#include <vector>

using namespace bstoa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// d t / d h for t_ij = h_i + h_j, column-major rows.
Matrix monostatic_jacobian(int m) {
  Matrix g = Matrix::Zero(m * m, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      g(i + m * j, i) += 1.0;
      g(i + m * j, j) += 1.0;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("theoretical_mse_iid", "[analysis]") {
  const auto bi = theoretical_mse_iid(Topology::bistatic(4, 3), 1.0);
  CHECK(max_abs(bi.per_entry_mse.array() - 0.5) < 1e-15);

  const auto mono = theoretical_mse_iid(Topology::monostatic(6), 1.0);
  CHECK_THAT(mono.diagonal_mean(), WithinAbs(11.0 / 36, 1e-15));
  CHECK_THAT(mono.off_diagonal_mean(), WithinAbs(5.0 / 36, 1e-15));
  CHECK(mono.per_entry_mse(0, 0) == mono.per_entry_mse(5, 5));
  CHECK(mono.per_entry_mse(0, 1) == mono.per_entry_mse(4, 2));

  CHECK(theoretical_mse_iid(Topology::bistatic(1, 1), 3e-19).per_entry_mse(0, 0) == 3e-19);
  CHECK_THROWS_AS(theoretical_mse_iid(Topology::bistatic(2, 2), -1.0), Error);
}

TEST_CASE("theoretical_mse_independent", "[analysis]") {
  Matrix s2(2, 2);  // column-major: sigma_1^2..sigma_4^2
  s2 << 1.0, 9.0,
        4.0, 16.0;
  SECTION("bistatic first entry") {
    const auto r = theoretical_mse_independent(Topology::bistatic(2, 2), s2, 1);
    CHECK_THAT(r.per_entry_mse(0, 0), WithinRel((9 * 1.0 + 4.0 + 9.0 + 16.0) / 16, 1e-14));
  }
  SECTION("monostatic off-diagonal") {
    const auto r = theoretical_mse_independent(Topology::monostatic(2), s2, 1);
    CHECK_THAT(r.per_entry_mse(1, 0), WithinRel((1.0 + 4.0 + 9.0 + 16.0) / 16, 1e-14));
    CHECK_THAT(r.per_entry_mse(0, 1), WithinRel((1.0 + 4.0 + 9.0 + 16.0) / 16, 1e-14));
  }
  SECTION("pilot length scales the variances") {
    const auto r1 = theoretical_mse_independent(Topology::bistatic(2, 2), s2, 1);
    const auto r4 = theoretical_mse_independent(Topology::bistatic(2, 2), s2, 4);
    CHECK(max_abs(r1.per_entry_mse / 4 - r4.per_entry_mse) < 1e-14);
  }
  SECTION("equal variances reduce to the iid form") {
    for (const Topology topo : {Topology::bistatic(4, 3), Topology::bistatic(1, 5),
                                Topology::monostatic(6), Topology::monostatic(1)}) {
      const Matrix equal = Matrix::Constant(topo.m(), topo.n(), 2e-18);
      const auto indep = theoretical_mse_independent(topo, equal, 8);
      const auto iid = theoretical_mse_iid(topo, 2e-18 / 8);
      CHECK(max_abs(indep.per_entry_mse - iid.per_entry_mse) < 1e-12 * max_abs(iid.per_entry_mse));
    }
  }
  SECTION("errors") {
    CHECK_THROWS_AS(theoretical_mse_independent(Topology::bistatic(2, 3), s2, 1), Error);
    CHECK_THROWS_AS(theoretical_mse_independent(Topology::bistatic(2, 2), s2, 0), Error);
  }
}

TEST_CASE("crlb_bistatic", "[analysis]") {
  const auto r22 = crlb_bistatic(Topology::bistatic(2, 2), 1.0, 1);
  CHECK(max_abs(r22.covariance_bound - compute_b(Topology::bistatic(2, 2))) < 1e-15);
  CHECK_THAT(r22.covariance_bound(0, 0), WithinAbs(0.75, 1e-15));

  const auto r11 = crlb_bistatic(Topology::bistatic(1, 1), 4e-18, 2);
  CHECK(r11.covariance_bound.rows() == 1);
  CHECK(r11.covariance_bound(0, 0) == 2e-18);

  const auto r43 = crlb_bistatic(Topology::bistatic(4, 3), 2.0, 8);
  CHECK(max_abs(r43.covariance_bound.diagonal().array() - 0.125) < 1e-14);
  CHECK(max_abs(r43.subchannel_bounds.array() - 0.125) < 1e-14);

  CHECK_THROWS_AS(crlb_bistatic(Topology::monostatic(3), 1.0, 1), Error);

  // Theory meets the bound on every subchannel.
  const auto theory = theoretical_mse_iid(Topology::bistatic(4, 3), 2.0 / 8);
  CHECK(max_abs(theory.per_entry_mse - r43.subchannel_bounds) < 1e-14);
}

TEST_CASE("crlb_monostatic", "[analysis]") {
  const auto r2 = crlb_monostatic(Topology::monostatic(2), 1.0, 1);
  Matrix expected(2, 2);
  expected << 0.75, -0.25, -0.25, 0.75;
  CHECK(max_abs(r2.covariance_bound - expected / 4) < 1e-15);

  const auto r6 = crlb_monostatic(Topology::monostatic(6), 1.0, 1);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK_THAT(r6.subchannel_bounds(i, j), WithinAbs(i == j ? 11.0 / 36 : 5.0 / 36, 1e-14));
    }
  }
  const auto theory = theoretical_mse_iid(Topology::monostatic(6), 1.0);
  CHECK(max_abs(theory.per_entry_mse - r6.subchannel_bounds) < 1e-14);

  CHECK_THROWS_AS(crlb_monostatic(Topology::bistatic(3, 3), 1.0, 1), Error);
}

TEST_CASE("monostatic Fisher information against a generic oracle", "[analysis]") {
  for (int m = 1; m <= 8; ++m) {
    const auto topo = Topology::monostatic(m);
    const double sigma_sq = 3e-18;
    const int l = 5;
    const Matrix g = monostatic_jacobian(m);
    const Matrix generic = (l / sigma_sq) * g.transpose() * g;
    const Matrix closed = fisher_information_monostatic(topo, sigma_sq, l);
    CHECK(max_abs(generic - closed) < 1e-10 * max_abs(closed));

    const Matrix numeric_inverse = generic.inverse();
    const Matrix bound = crlb_monostatic(topo, sigma_sq, l).covariance_bound;
    INFO("M=" << m);
    CHECK(max_abs(numeric_inverse - bound) / max_abs(bound) < 1e-10);
  }
}

TEST_CASE("empirical_mse", "[analysis]") {
  const DelayMatrix truth = DelayMatrix::Constant(2, 3, 1e-8);
  SECTION("single trial") {
    std::vector<std::pair<DelayMatrix, DelayMatrix>> trials{
        {truth, (truth.array() + 2e-9).matrix()}};
    const auto stats = empirical_mse(trials);
    CHECK(max_abs(stats.mse.per_entry_mse.array() - 4e-18) < 1e-30);
    CHECK(stats.covariance.rows() == 6);
  }
  SECTION("perfect estimates") {
    std::vector<std::pair<DelayMatrix, DelayMatrix>> trials{{truth, truth}, {truth, truth}};
    CHECK(empirical_mse(trials).mse.per_entry_mse.isZero());
  }
  SECTION("empty input") {
    std::vector<std::pair<DelayMatrix, DelayMatrix>> none;
    try {
      empirical_mse(none);
      FAIL("expected EmptyInput");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyInput);
    }
  }
  SECTION("LS sampling check") {
    const auto topo = Topology::bistatic(2, 3);
    ErrorAccumulator acc(2, 3);
    for (int k = 0; k < 100'000; ++k) {
      Rng rng(50, k);
      acc.add(truth, estimate_ls(synth_observations(truth, 4, 1e-9, rng), topo));
    }
    const auto mse = acc.mse().per_entry_mse;
    CHECK(((mse.array() / 2.5e-19 - 1.0).abs() < 0.03).all());
  }
}

TEST_CASE("accumulator merge equals sequential accumulation", "[analysis][property]") {
  Rng rng(60, 0);
  ErrorAccumulator all(2, 2, true), first(2, 2, true), second(2, 2, true);
  const DelayMatrix truth = DelayMatrix::Zero(2, 2);
  for (int k = 0; k < 64; ++k) {
    DelayMatrix e(2, 2);
    for (auto& x : e.reshaped()) x = rng.normal();
    all.add(truth, e);
    (k < 20 ? first : second).add(truth, e);
  }
  first.merge(second);
  CHECK(first.trials() == 64);
  CHECK(max_abs(first.covariance() - all.covariance()) < 1e-12);
  CHECK(max_abs(first.mse().per_entry_mse - all.mse().per_entry_mse) < 1e-12);
  CHECK(max_abs(first.mse().per_entry_mse - first.covariance().diagonal().reshaped(2, 2)) < 1e-12);
}

TEST_CASE("gain factor decreases with array size", "[analysis][property]") {
  auto gain = [](int m, int n) { return alphas(Topology::bistatic(m, n)).a1; };
  for (int m = 1; m <= 16; ++m) {
    for (int n = 1; n <= 16; ++n) {
      // With a single antenna on the other side the factor stays at 1.
      if (m < 16) CHECK((n == 1 ? gain(m + 1, n) == gain(m, n) : gain(m + 1, n) < gain(m, n)));
      if (n < 16) CHECK((m == 1 ? gain(m, n + 1) == gain(m, n) : gain(m, n + 1) < gain(m, n)));
    }
  }
}
