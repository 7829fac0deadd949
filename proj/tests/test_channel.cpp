// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "bstoa/channel.hpp"
#include "bstoa/estimator.hpp"

using namespace bstoa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("random_scene draws inside the cube", "[channel]") {
  Rng rng(5, 0);
  const Scene bi = random_scene(Topology::bistatic(2, 2), 10.0, rng);
  CHECK(bi.tx_positions.size() == 2);
  CHECK(bi.rx_positions.size() == 2);
  CHECK(bi.delta == 0.0);
  std::vector<Point3> all = bi.tx_positions;
  all.insert(all.end(), bi.rx_positions.begin(), bi.rx_positions.end());
  all.push_back(bi.tag_position);
  CHECK(all.size() == 5);
  for (const auto& p : all) {
    CHECK((p.array() >= 0.0).all());
    CHECK((p.array() <= 10.0).all());
  }

  const Scene mono = random_scene(Topology::monostatic(3), 10.0, rng);
  CHECK(mono.tx().size() == 3);
  CHECK(&mono.rx() == &mono.tx());

  Rng r1(9, 3), r2(9, 3);
  const Scene s1 = random_scene(Topology::bistatic(3, 2), 10.0, r1);
  const Scene s2 = random_scene(Topology::bistatic(3, 2), 10.0, r2);
  CHECK(serialize_scene(s1) == serialize_scene(s2));

  CHECK_THROWS_AS(random_scene(Topology::bistatic(1, 1), 0.0, rng), Error);
}

TEST_CASE("true_delays geometry", "[channel]") {
  Scene scene;
  scene.topo = Topology::bistatic(1, 1);
  scene.tx_positions = {Point3(3, 0, 0)};
  scene.rx_positions = {Point3(0, 4, 0)};
  scene.tag_position = Point3::Zero();
  const DelayMatrix t = true_delays(scene);
  CHECK(t(0, 0) == 7.0 / kSpeedOfLight);

  Rng rng(11, 0);
  Scene random = random_scene(Topology::bistatic(4, 3), 10.0, rng);
  const DelayMatrix base = true_delays(random);
  random.delta = 1e-7;
  const DelayMatrix shifted = true_delays(random);
  CHECK(max_abs((shifted - base).array() - 1e-7) < 1e-20);
}

TEST_CASE("monostatic delays are symmetric with round-trip diagonal", "[channel]") {
  Rng rng(12, 0);
  const Scene scene = random_scene(Topology::monostatic(5), 10.0, rng);
  const DelayMatrix t = true_delays(scene);
  CHECK(t == t.transpose());
  for (int i = 0; i < 5; ++i) {
    CHECK_THAT(t(i, i), WithinRel(2.0 * (scene.tx()[i] - scene.tag_position).norm() / kSpeedOfLight,
                                  1e-15));
  }
}

TEST_CASE("scene delays satisfy the correlation constraints", "[channel][property]") {
  for (std::uint64_t k = 0; k < 200; ++k) {
    Rng rng(77, k);
    const int m = 1 + static_cast<int>(k % 6);
    const int n = 1 + static_cast<int>((k / 6) % 6);
    const Topology topo = k % 2 ? Topology::bistatic(m, n) : Topology::monostatic(m);
    Scene scene = random_scene(topo, 10.0, rng);
    scene.delta = rng.uniform(0.0, 1e-6);
    const DelayMatrix t = true_delays(scene);
    CHECK((t.array() >= 0.0).all());
    const Vector residual = generate_a(topo).cast<double>() * vec(t);
    CHECK(max_abs(residual) <= 1e-12 * max_abs(t));
  }
}

TEST_CASE("synth_observations", "[channel]") {
  Rng rng(3, 0);
  DelayMatrix t(2, 3);
  t << 1, 2, 3, 4, 5, 6;

  SECTION("L = 1 and no noise is the identity") {
    const auto obs = synth_observations(t, 1, 0.0, rng);
    CHECK(obs.y == t);
  }
  SECTION("pilot replication") {
    const auto obs = synth_observations(DelayMatrix::Constant(1, 1, 2.0), 3, 0.0, rng);
    CHECK(obs.y == Matrix::Constant(3, 1, 2.0));
  }
  SECTION("row layout groups pilots per transmitter") {
    const auto obs = synth_observations(t, 4, 0.0, rng);
    REQUIRE(obs.y.rows() == 8);
    CHECK(obs.y.row(3) == t.row(0));
    CHECK(obs.y.row(4) == t.row(1));
  }
  SECTION("noise variance") {
    const double sigma = 1e-9;
    double sum_sq = 0.0;
    long count = 0;
    Rng noise_rng(4, 1);
    for (int draw = 0; draw < 100'000 / 48 + 1; ++draw) {
      const auto obs = synth_observations(t, 8, sigma, noise_rng);
      for (int i = 0; i < 2; ++i) {
        const Matrix res = obs.y.middleRows(i * 8, 8).rowwise() - t.row(i);
        sum_sq += res.squaredNorm();
        count += res.size();
      }
    }
    CHECK(count >= 100'000);
    CHECK_THAT(sum_sq / count, WithinRel(1e-18, 0.05));
  }
  SECTION("invalid arguments") {
    CHECK_THROWS_AS(synth_observations(t, 0, 1e-9, rng), Error);
    CHECK_THROWS_AS(synth_observations(t, 1, -1.0, rng), Error);
    CHECK_THROWS_AS(synth_observations(t, 1, Matrix::Ones(3, 3), rng), Error);
  }
}

TEST_CASE("scene record round trip", "[channel]") {
  Rng rng(21, 0);
  Scene bi = random_scene(Topology::bistatic(3, 2), 10.0, rng);
  bi.delta = 2.5e-8;
  const Scene parsed = parse_scene(serialize_scene(bi));
  CHECK(parsed.topo == bi.topo);
  CHECK(parsed.delta == bi.delta);
  CHECK(parsed.tag_position == bi.tag_position);
  CHECK(parsed.tx_positions == bi.tx_positions);
  CHECK(parsed.rx_positions == bi.rx_positions);

  const Scene mono = random_scene(Topology::monostatic(4), 10.0, rng);
  const std::string text = serialize_scene(mono);
  CHECK(text.find("rx1") == std::string::npos);
  CHECK(parse_scene(text).tx_positions == mono.tx_positions);

  CHECK_THROWS_AS(parse_scene("topology=bi\nm=1\nn=1\ntag=0,0,0\ntx1=1,2\nrx1=0,0,0\n"), Error);
  CHECK_THROWS_AS(parse_scene("topology=bi\nm=1\nn=1\ntag=0,0,0\ntx1=1,2,3\n"), Error);
  CHECK_THROWS_AS(
      parse_scene("topology=bi\nm=1\nn=1\ntag=0,0,0\ntx1=1,2,3\nrx1=0,0,0\nbogus=1\n"), Error);
}
