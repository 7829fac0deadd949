// SPDX-License-Identifier: Apache-2.0
//
// Monte-Carlo sweeps over (sigma, pilot length): estimator MSE against its
// closed form, localization RMSE for both estimators, and CRLB attainment.
//
// Trial k of every grid point draws from Rng(master_seed, k): first the scene
// geometry, then the pilot noise. Trials are grouped into fixed blocks that
// workers evaluate in any order; block partial sums are then reduced in block
// order, so the output does not depend on the worker count.

#pragma once

#include "bstoa/analysis.hpp"
#include "bstoa/channel.hpp"
#include "bstoa/estimator.hpp"
#include "bstoa/localization.hpp"
#include "bstoa/parallel.hpp"
#include "bstoa/rng.hpp"
#include "bstoa/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace bstoa {

enum class ExperimentKind { MseSweep, LocalizationSweep, CrlbCheck };

/// Trial count below which CRLB check rows are marked low-confidence.
inline constexpr long long kConfidentTrials = 10'000;

inline std::vector<double> default_sigma_grid() {
  std::vector<double> grid(10);
  for (int k = 0; k < 10; ++k) grid[k] = std::pow(10.0, -10.0 + 2.0 * k / 9.0);
  return grid;
}

struct SweepConfig {
  Topology topo = Topology::bistatic(4, 3);
  std::vector<int> pilot_lens = {8};
  std::vector<double> sigmas = default_sigma_grid();
  long long trials = 10'000;
  double cube_side = 10.0;
  std::uint64_t master_seed = 1;
  ExperimentKind experiment = ExperimentKind::MseSweep;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); };
    if (trials < 1) fail("trials must be >= 1");
    if (!(cube_side > 0.0)) fail("cube_side must be > 0");
    if (pilot_lens.empty()) fail("pilot_lens must not be empty");
    for (int l : pilot_lens) {
      if (l < 1) fail("pilot lengths must be >= 1");
    }
    if (sigmas.empty()) fail("sigmas must not be empty");
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
      if (!(sigmas[k] > 0.0) || !std::isfinite(sigmas[k])) fail("sigmas must be positive");
      if (k > 0 && !(sigmas[k] > sigmas[k - 1])) fail("sigmas must be strictly ascending");
    }
  }
};

inline const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::MseSweep: return "mse";
    case ExperimentKind::LocalizationSweep: return "localization";
    case ExperimentKind::CrlbCheck: return "crlb";
  }
  return "?";
}

/// Flat `key = value` config. Keys: experiment (mse|localization|crlb),
/// topology (bi|mono), m, n, pilot_lens, sigmas, trials, cube_side,
/// master_seed. Lists are comma-separated; '#' starts a comment line.
inline SweepConfig parse_sweep_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  try {
    kv = detail::parse_key_values(text);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto as_int = [](const std::string& v, const std::string& key) {
    try {
      return detail::parse_int(v, key);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigInvalid, e.what());
    }
  };
  auto as_double = [](const std::string& v, const std::string& key) {
    try {
      return detail::parse_double(v, key);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigInvalid, e.what());
    }
  };

  SweepConfig cfg;
  if (auto v = take("experiment")) {
    if (*v == "mse") cfg.experiment = ExperimentKind::MseSweep;
    else if (*v == "localization") cfg.experiment = ExperimentKind::LocalizationSweep;
    else if (*v == "crlb") cfg.experiment = ExperimentKind::CrlbCheck;
    else throw Error(ErrorKind::ConfigInvalid, "experiment must be mse, localization or crlb");
  }

  const std::string kind = take("topology").value_or("bi");
  const auto m_text = take("m");
  if (!m_text) throw Error(ErrorKind::ConfigInvalid, "config lacks 'm'");
  const auto m = static_cast<int>(as_int(*m_text, "m"));
  const auto n_text = take("n");
  try {
    if (kind == "bi") {
      if (!n_text) throw Error(ErrorKind::ConfigInvalid, "bistatic config lacks 'n'");
      cfg.topo = Topology::bistatic(m, static_cast<int>(as_int(*n_text, "n")));
    } else if (kind == "mono") {
      if (n_text && as_int(*n_text, "n") != m) {
        throw Error(ErrorKind::ConfigInvalid, "monostatic config needs n == m");
      }
      cfg.topo = Topology::monostatic(m);
    } else {
      throw Error(ErrorKind::ConfigInvalid, "topology must be 'bi' or 'mono'");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }

  if (auto v = take("pilot_lens")) {
    cfg.pilot_lens.clear();
    for (const auto& item : detail::split(*v, ',')) {
      cfg.pilot_lens.push_back(static_cast<int>(as_int(item, "pilot_lens")));
    }
  }
  if (auto v = take("sigmas")) {
    cfg.sigmas.clear();
    for (const auto& item : detail::split(*v, ',')) cfg.sigmas.push_back(as_double(item, "sigmas"));
  }
  if (auto v = take("trials")) cfg.trials = as_int(*v, "trials");
  if (auto v = take("cube_side")) cfg.cube_side = as_double(*v, "cube_side");
  if (auto v = take("master_seed")) {
    const auto s = as_int(*v, "master_seed");
    if (s < 0) throw Error(ErrorKind::ConfigInvalid, "master_seed must be >= 0");
    cfg.master_seed = static_cast<std::uint64_t>(s);
  }
  if (!kv.empty()) throw Error(ErrorKind::ConfigInvalid, "unknown config key '" + kv.begin()->first + "'");
  cfg.validate();
  return cfg;
}

struct SweepRow {
  double sigma = 0.0;
  int pilot_len = 0;
  std::string method;
  std::string metric;
  double value = 0.0;
  std::optional<double> theory;
};

struct SweepResult {
  ExperimentKind experiment = ExperimentKind::MseSweep;
  std::vector<SweepRow> rows;
  /// Set by the CRLB check when trials < kConfidentTrials; adds a
  /// `confidence` column to the CSV.
  std::optional<bool> low_confidence;

  void sort() {
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
      return std::tie(a.sigma, a.pilot_len, a.method, a.metric) <
             std::tie(b.sigma, b.pilot_len, b.method, b.metric);
    });
  }

  const SweepRow* find(double sigma, int pilot_len, const std::string& method,
                       const std::string& metric) const {
    for (const auto& r : rows) {
      if (r.sigma == sigma && r.pilot_len == pilot_len && r.method == method && r.metric == metric) {
        return &r;
      }
    }
    return nullptr;
  }

  /// Header `sigma,pilot_len,method,metric,value,theory`; numbers in %.16e,
  /// missing theory as `nan`.
  std::string to_csv() const {
    std::ostringstream out;
    out << "sigma,pilot_len,method,metric,value,theory";
    if (low_confidence) out << ",confidence";
    out << '\n';
    char buf[64];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%.16e", r.sigma);
      out << buf << ',' << r.pilot_len << ',' << r.method << ',' << r.metric << ',';
      std::snprintf(buf, sizeof buf, "%.16e", r.value);
      out << buf << ',';
      if (r.theory) {
        std::snprintf(buf, sizeof buf, "%.16e", *r.theory);
        out << buf;
      } else {
        out << "nan";
      }
      if (low_confidence) out << ',' << (*low_confidence ? "low" : "ok");
      out << '\n';
    }
    return out.str();
  }
};

namespace detail {

inline constexpr long long kTrialsPerBlock = 512;

struct TrialData {
  Scene scene;
  DelayMatrix truth;
  DelayMatrix t_hat;
  DelayMatrix t_tilde;
};

inline TrialData run_trial(const SweepConfig& cfg, const WeightMatrix& b, double sigma,
                           int pilot_len, long long trial) {
  Rng rng(cfg.master_seed, static_cast<std::uint64_t>(trial));
  TrialData d;
  d.scene = random_scene(cfg.topo, cfg.cube_side, rng);
  d.truth = true_delays(d.scene);
  const ObservationBlock obs = synth_observations(d.truth, pilot_len, sigma, rng);
  d.t_hat = estimate_ls(obs, cfg.topo);
  d.t_tilde = estimate_proposed(d.t_hat, b, cfg.topo);
  return d;
}

/// Runs `per_trial(trial, acc)` for every trial, one accumulator per block,
/// and folds the blocks in order with `merge(total, block)`.
template <typename Acc, typename MakeAcc, typename PerTrial, typename Merge>
Acc reduce_trials(long long trials, unsigned workers, MakeAcc make_acc, PerTrial per_trial,
                  Merge merge) {
  const auto blocks = static_cast<std::size_t>((trials + kTrialsPerBlock - 1) / kTrialsPerBlock);
  auto partials = parallel_map(blocks, workers, [&](std::size_t blk) {
    Acc acc = make_acc();
    const long long begin = static_cast<long long>(blk) * kTrialsPerBlock;
    const long long end = std::min(trials, begin + kTrialsPerBlock);
    for (long long k = begin; k < end; ++k) per_trial(k, acc);
    return acc;
  });
  Acc total = make_acc();
  for (const auto& p : partials) merge(total, p);
  return total;
}

}  // namespace detail

/// Empirical MSE of LS and the constrained estimator with a fresh scene per
/// trial. Bistatic reports the mean over all entries (`mse`); monostatic
/// reports `diag_mse` and `offdiag_mse` separately.
inline SweepResult run_mse_sweep(const SweepConfig& cfg, unsigned workers = default_workers()) {
  cfg.validate();
  if (cfg.experiment != ExperimentKind::MseSweep) {
    throw Error(ErrorKind::ConfigInvalid, "config is not an mse experiment");
  }
  const Topology& topo = cfg.topo;
  const WeightMatrix b = compute_b(topo);
  SweepResult result{ExperimentKind::MseSweep, {}, std::nullopt};

  struct Pair {
    ErrorAccumulator ls, proposed;
  };
  for (const double sigma : cfg.sigmas) {
    for (const int l : cfg.pilot_lens) {
      const Pair acc = detail::reduce_trials<Pair>(
          cfg.trials, workers,
          [&] { return Pair{{topo.m(), topo.n()}, {topo.m(), topo.n()}}; },
          [&](long long k, Pair& a) {
            const auto d = detail::run_trial(cfg, b, sigma, l, k);
            a.ls.add(d.truth, d.t_hat);
            a.proposed.add(d.truth, d.t_tilde);
          },
          [](Pair& total, const Pair& part) {
            total.ls.merge(part.ls);
            total.proposed.merge(part.proposed);
          });

      const double sigma0_sq = sigma * sigma / l;
      const MseReport theory_ls = theoretical_mse_ls(topo, sigma0_sq);
      const MseReport theory_prop = theoretical_mse_iid(topo, sigma0_sq);
      auto emit = [&](const char* method, const MseReport& emp, const MseReport& theory) {
        if (!topo.is_monostatic()) {
          result.rows.push_back({sigma, l, method, "mse", emp.mean(), theory.mean()});
          return;
        }
        result.rows.push_back({sigma, l, method, "diag_mse", emp.diagonal_mean(),
                               theory.diagonal_mean()});
        if (topo.m() > 1) {
          result.rows.push_back({sigma, l, method, "offdiag_mse", emp.off_diagonal_mean(),
                                 theory.off_diagonal_mean()});
        }
      };
      emit("ls", acc.ls.mse(), theory_ls);
      emit("proposed", acc.proposed.mse(), theory_prop);
    }
  }
  result.sort();
  return result;
}

/// Localization RMSE sqrt(mean |p_hat - p|^2) for both estimators. Each
/// trial localizes the same scene and noise twice, once per estimate.
inline SweepResult run_localization_sweep(const SweepConfig& cfg,
                                          unsigned workers = default_workers()) {
  cfg.validate();
  if (cfg.experiment != ExperimentKind::LocalizationSweep) {
    throw Error(ErrorKind::ConfigInvalid, "config is not a localization experiment");
  }
  const Topology& topo = cfg.topo;
  if (topo.is_monostatic() ? topo.m() < 4 : topo.subchannels() < 4) {
    throw Error(ErrorKind::UnderDetermined, "too few antennas for a 3D fix with " + topo.describe());
  }
  const WeightMatrix b = compute_b(topo);
  SweepResult result{ExperimentKind::LocalizationSweep, {}, std::nullopt};

  struct Sums {
    double ls = 0.0;
    double proposed = 0.0;
  };
  for (const double sigma : cfg.sigmas) {
    for (const int l : cfg.pilot_lens) {
      const Sums sums = detail::reduce_trials<Sums>(
          cfg.trials, workers, [] { return Sums{}; },
          [&](long long k, Sums& s) {
            const auto d = detail::run_trial(cfg, b, sigma, l, k);
            const Point3& tag = d.scene.tag_position;
            s.ls += (localize(d.scene, d.t_hat).position - tag).squaredNorm();
            s.proposed += (localize(d.scene, d.t_tilde).position - tag).squaredNorm();
          },
          [](Sums& total, const Sums& part) {
            total.ls += part.ls;
            total.proposed += part.proposed;
          });
      const auto n = static_cast<double>(cfg.trials);
      result.rows.push_back({sigma, l, "ls", "rmse", std::sqrt(sums.ls / n), std::nullopt});
      result.rows.push_back(
          {sigma, l, "proposed", "rmse", std::sqrt(sums.proposed / n), std::nullopt});
    }
  }
  result.sort();
  return result;
}

/// Compares the constrained estimator's empirical error covariance with the
/// CRLB. Bistatic: `cov_frobenius_rel_err` against (sigma^2/L) B (theory 0).
/// Monostatic: mean ratios of empirical subchannel MSE to the per-subchannel
/// bound, `diag_bound_ratio` and `offdiag_bound_ratio` (theory 1).
inline SweepResult run_crlb_check(const SweepConfig& cfg, unsigned workers = default_workers()) {
  cfg.validate();
  if (cfg.experiment != ExperimentKind::CrlbCheck) {
    throw Error(ErrorKind::ConfigInvalid, "config is not a crlb experiment");
  }
  const Topology& topo = cfg.topo;
  const WeightMatrix b = compute_b(topo);
  SweepResult result{ExperimentKind::CrlbCheck, {}, cfg.trials < kConfidentTrials};

  for (const double sigma : cfg.sigmas) {
    for (const int l : cfg.pilot_lens) {
      const bool track = !topo.is_monostatic();
      const ErrorAccumulator acc = detail::reduce_trials<ErrorAccumulator>(
          cfg.trials, workers, [&] { return ErrorAccumulator(topo.m(), topo.n(), track); },
          [&](long long k, ErrorAccumulator& a) {
            const auto d = detail::run_trial(cfg, b, sigma, l, k);
            a.add(d.truth, d.t_tilde);
          },
          [](ErrorAccumulator& total, const ErrorAccumulator& part) { total.merge(part); });

      const double sigma_sq = sigma * sigma;
      if (!topo.is_monostatic()) {
        const CrlbReport bound = crlb_bistatic(topo, sigma_sq, l);
        result.rows.push_back({sigma, l, "proposed", "cov_frobenius_rel_err",
                               frobenius_relative_error(acc.covariance(), bound.covariance_bound),
                               0.0});
        continue;
      }
      const CrlbReport bound = crlb_monostatic(topo, sigma_sq, l);
      const MseReport ratio{acc.mse().per_entry_mse.cwiseQuotient(bound.subchannel_bounds),
                            std::nullopt};
      result.rows.push_back({sigma, l, "proposed", "diag_bound_ratio", ratio.diagonal_mean(), 1.0});
      if (topo.m() > 1) {
        result.rows.push_back(
            {sigma, l, "proposed", "offdiag_bound_ratio", ratio.off_diagonal_mean(), 1.0});
      }
    }
  }
  result.sort();
  return result;
}

inline SweepResult run_sweep(const SweepConfig& cfg, unsigned workers = default_workers()) {
  switch (cfg.experiment) {
    case ExperimentKind::MseSweep: return run_mse_sweep(cfg, workers);
    case ExperimentKind::LocalizationSweep: return run_localization_sweep(cfg, workers);
    case ExperimentKind::CrlbCheck: return run_crlb_check(cfg, workers);
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown experiment");
}

}  // namespace bstoa
