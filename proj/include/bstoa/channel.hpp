// SPDX-License-Identifier: Apache-2.0
//
// Scene geometry, true backscatter delays and noisy pilot observations.
//
// A subchannel delay is T(i,j) = delta + (|tx_i - tag| + |rx_j - tag|) / c,
// i.e. T = delta + h (+) g^T with uplink h and downlink g. Observations follow
// Y = X T + W with X = I_M (x) 1_L: every transmitter sends L pilot slots and
// each slot is seen by all N receivers.

#pragma once

#include "bstoa/common.hpp"
#include "bstoa/rng.hpp"
#include "bstoa/topology.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace bstoa {

struct Scene {
  Topology topo = Topology::bistatic(1, 1);
  std::vector<Point3> tx_positions;
  /// Empty for monostatic scenes; use rx() to read receivers.
  std::vector<Point3> rx_positions;
  Point3 tag_position = Point3::Zero();
  double delta = 0.0;

  const std::vector<Point3>& tx() const { return tx_positions; }
  const std::vector<Point3>& rx() const {
    return topo.is_monostatic() ? tx_positions : rx_positions;
  }

  void validate() const {
    if (static_cast<int>(tx_positions.size()) != topo.m()) {
      throw Error(ErrorKind::DimensionMismatch, "scene has wrong number of tx positions");
    }
    if (topo.is_monostatic()) {
      if (!rx_positions.empty()) {
        throw Error(ErrorKind::InvalidArgument, "monostatic scene must not carry rx positions");
      }
    } else if (static_cast<int>(rx_positions.size()) != topo.n()) {
      throw Error(ErrorKind::DimensionMismatch, "scene has wrong number of rx positions");
    }
    if (!(delta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tag delay must be >= 0");
  }
};

/// Antennas and tag drawn uniformly in [0, cube_side]^3; delta = 0. Draw order
/// is tx, rx (bistatic only), tag.
inline Scene random_scene(const Topology& topo, double cube_side, Rng& rng) {
  if (!(cube_side > 0.0)) throw Error(ErrorKind::InvalidArgument, "cube_side must be > 0");
  auto draw = [&] {
    Point3 p;
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(0.0, cube_side);
    return p;
  };
  Scene scene;
  scene.topo = topo;
  scene.tx_positions.reserve(topo.m());
  for (int i = 0; i < topo.m(); ++i) scene.tx_positions.push_back(draw());
  if (!topo.is_monostatic()) {
    scene.rx_positions.reserve(topo.n());
    for (int j = 0; j < topo.n(); ++j) scene.rx_positions.push_back(draw());
  }
  scene.tag_position = draw();
  return scene;
}

/// One-way propagation delays from each antenna in `antennas` to the tag.
inline Vector one_way_delays(const std::vector<Point3>& antennas, const Point3& tag) {
  Vector d(static_cast<Eigen::Index>(antennas.size()));
  for (std::size_t i = 0; i < antennas.size(); ++i) {
    d[static_cast<Eigen::Index>(i)] = (antennas[i] - tag).norm() / kSpeedOfLight;
  }
  return d;
}

/// delta + h (+) g^T
inline DelayMatrix outer_sum(double delta, const Vector& h, const Vector& g) {
  return (h.replicate(1, g.size()) + g.transpose().replicate(h.size(), 1)).array() + delta;
}

inline DelayMatrix true_delays(const Scene& scene) {
  scene.validate();
  const Vector h = one_way_delays(scene.tx(), scene.tag_position);
  if (scene.topo.is_monostatic()) return outer_sum(scene.delta, h, h);
  return outer_sum(scene.delta, h, one_way_delays(scene.rx(), scene.tag_position));
}

/// Stacked pilot observations: rows i*L .. i*L+L-1 belong to transmitter i.
struct ObservationBlock {
  Matrix y;
  int pilot_len = 1;
  double sigma = 0.0;
};

inline ObservationBlock synth_observations(const DelayMatrix& t, int pilot_len, double sigma,
                                           Rng& rng) {
  if (pilot_len < 1) throw Error(ErrorKind::InvalidArgument, "pilot length must be >= 1");
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  const Eigen::Index m = t.rows();
  const Eigen::Index n = t.cols();
  ObservationBlock obs{Matrix(m * pilot_len, n), pilot_len, sigma};
  // Column-major fill so the noise for subchannel (i, j) is contiguous in the stream.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      for (int l = 0; l < pilot_len; ++l) {
        const double noise = sigma > 0.0 ? sigma * rng.normal() : 0.0;
        obs.y(i * pilot_len + l, j) = t(i, j) + noise;
      }
    }
  }
  return obs;
}

/// Independent but not identically distributed noise: subchannel (i, j)
/// gets standard deviation sigmas(i, j). `sigma` of the result is left at 0.
inline ObservationBlock synth_observations(const DelayMatrix& t, int pilot_len,
                                           const Matrix& sigmas, Rng& rng) {
  if (sigmas.rows() != t.rows() || sigmas.cols() != t.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "per-subchannel sigma matrix must match T");
  }
  if (pilot_len < 1) throw Error(ErrorKind::InvalidArgument, "pilot length must be >= 1");
  if ((sigmas.array() < 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "per-subchannel sigma must be >= 0");
  }
  const Eigen::Index m = t.rows();
  const Eigen::Index n = t.cols();
  ObservationBlock obs{Matrix(m * pilot_len, n), pilot_len, 0.0};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      for (int l = 0; l < pilot_len; ++l) {
        obs.y(i * pilot_len + l, j) = t(i, j) + sigmas(i, j) * rng.normal();
      }
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Scene text record: one key=value per line.
//
//   topology=bi|mono
//   m=<int>
//   n=<int>
//   delta=<seconds>
//   tag=x,y,z
//   tx1=x,y,z ... txM=x,y,z
//   rx1=x,y,z ... rxN=x,y,z      (bistatic only)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline double parse_double(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, "cannot parse number '" + s + "' for " + what);
  }
  return v;
}

inline long long parse_int(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, "cannot parse integer '" + s + "' for " + what);
  }
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline Point3 parse_point(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) {
    throw Error(ErrorKind::ParseError, what + " must be a comma-separated triple");
  }
  return {parse_double(parts[0], what), parse_double(parts[1], what),
          parse_double(parts[2], what)};
}

inline std::string format_point(const Point3& p) {
  return format_double(p.x()) + "," + format_double(p.y()) + "," + format_double(p.z());
}

/// Parses `key=value` lines; blank lines and lines starting with '#' are skipped.
inline std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                           char separator = '=') {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto pos = s.find(separator);
    if (pos == std::string::npos) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": missing '" +
                                             std::string(1, separator) + "'");
    }
    const std::string key = trim(s.substr(0, pos));
    if (key.empty()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": empty key");
    }
    if (!kv.emplace(key, trim(s.substr(pos + 1))).second) {
      throw Error(ErrorKind::ParseError, "duplicate key '" + key + "'");
    }
  }
  return kv;
}

}  // namespace detail

inline std::string serialize_scene(const Scene& scene) {
  scene.validate();
  std::ostringstream out;
  out << "topology=" << (scene.topo.is_monostatic() ? "mono" : "bi") << '\n';
  out << "m=" << scene.topo.m() << '\n';
  out << "n=" << scene.topo.n() << '\n';
  out << "delta=" << detail::format_double(scene.delta) << '\n';
  out << "tag=" << detail::format_point(scene.tag_position) << '\n';
  for (std::size_t i = 0; i < scene.tx_positions.size(); ++i) {
    out << "tx" << i + 1 << '=' << detail::format_point(scene.tx_positions[i]) << '\n';
  }
  for (std::size_t j = 0; j < scene.rx_positions.size(); ++j) {
    out << "rx" << j + 1 << '=' << detail::format_point(scene.rx_positions[j]) << '\n';
  }
  return out.str();
}

inline Scene parse_scene(const std::string& text) {
  auto kv = detail::parse_key_values(text);
  auto take = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::ParseError, "scene record lacks '" + key + "'");
    std::string value = it->second;
    kv.erase(it);
    return value;
  };

  const std::string kind = take("topology");
  const auto m = static_cast<int>(detail::parse_int(take("m"), "m"));
  const auto n = static_cast<int>(detail::parse_int(take("n"), "n"));
  Scene scene;
  if (kind == "bi") {
    scene.topo = Topology::bistatic(m, n);
  } else if (kind == "mono") {
    if (m != n) throw Error(ErrorKind::ParseError, "monostatic scene needs m == n");
    scene.topo = Topology::monostatic(m);
  } else {
    throw Error(ErrorKind::ParseError, "topology must be 'bi' or 'mono'");
  }
  scene.delta = kv.count("delta") ? detail::parse_double(take("delta"), "delta") : 0.0;
  scene.tag_position = detail::parse_point(take("tag"), "tag");
  for (int i = 1; i <= m; ++i) {
    const std::string key = "tx" + std::to_string(i);
    scene.tx_positions.push_back(detail::parse_point(take(key), key));
  }
  if (!scene.topo.is_monostatic()) {
    for (int j = 1; j <= n; ++j) {
      const std::string key = "rx" + std::to_string(j);
      scene.rx_positions.push_back(detail::parse_point(take(key), key));
    }
  }
  if (!kv.empty()) {
    throw Error(ErrorKind::ParseError, "unknown scene key '" + kv.begin()->first + "'");
  }
  scene.validate();
  return scene;
}

}  // namespace bstoa
