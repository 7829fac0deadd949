// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "bstoa/rng.hpp"

#include <cmath>
#include <vector>

using namespace bstoa;

TEST_CASE("Philox4x32-10 known-answer vectors", "[rng]") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                             K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                             K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible", "[rng]") {
  Rng a(42, 7);
  Rng b(42, 7);
  for (int k = 0; k < 1000; ++k) REQUIRE(a.normal() == b.normal());

  Rng c(42, 8);
  Rng d(43, 7);
  Rng e(42, 7);
  bool differs_stream = false;
  bool differs_seed = false;
  for (int k = 0; k < 10; ++k) {
    const double x = e.uniform();
    differs_stream |= x != c.uniform();
    differs_seed |= x != d.uniform();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("uniform and normal moments", "[rng]") {
  Rng rng(1, 0);
  constexpr int n = 200'000;
  double sum_u = 0.0, sum_n = 0.0, sum_n2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum_u += u;
    const double z = rng.normal();
    sum_n += z;
    sum_n2 += z * z;
  }
  CHECK(std::abs(sum_u / n - 0.5) < 0.005);
  CHECK(std::abs(sum_n / n) < 0.01);
  CHECK(std::abs(sum_n2 / n - 1.0) < 0.015);
}

TEST_CASE("distinct streams are uncorrelated", "[rng][property]") {
  constexpr int n = 100'000;
  for (std::uint64_t s = 0; s < 4; ++s) {
    Rng a(2024, s);
    Rng b(2024, s + 1);
    double sab = 0.0, saa = 0.0, sbb = 0.0, sa = 0.0, sb = 0.0;
    for (int k = 0; k < n; ++k) {
      const double x = a.normal();
      const double y = b.normal();
      sa += x;
      sb += y;
      sab += x * y;
      saa += x * x;
      sbb += y * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double rho = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
    INFO("streams " << s << "," << s + 1 << " rho=" << rho);
    CHECK(std::abs(rho) < 0.01);
  }
}
