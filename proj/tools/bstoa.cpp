// SPDX-License-Identifier: Apache-2.0
//
// bstoa command-line front end.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include "bstoa/bstoa.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bstoa::Error(bstoa::ErrorKind::ConfigInvalid, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bstoa::Error(bstoa::ErrorKind::ConfigInvalid, "cannot write " + path);
  out << content;
}

struct TopologyArgs {
  std::string kind = "bi";
  int m = 0;
  int n = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--topology", kind, "Channel topology")
        ->check(CLI::IsMember({"bi", "mono"}))
        ->required();
    cmd->add_option("--m", m, "Transmit antennas (transceivers for mono)")->required();
    cmd->add_option("--n", n, "Receive antennas (bistatic only; defaults to m)");
  }

  bstoa::Topology build() const {
    if (kind == "mono") {
      if (n != 0 && n != m) {
        throw bstoa::Error(bstoa::ErrorKind::InvalidArgument, "monostatic needs n == m");
      }
      return bstoa::Topology::monostatic(m);
    }
    return bstoa::Topology::bistatic(m, n == 0 ? m : n);
  }
};

bstoa::DelayMatrix estimate_from_block(const bstoa::Matrix& y, const bstoa::Topology& topo,
                                       const std::string& method) {
  if (y.rows() % topo.m() != 0 || y.cols() != topo.n()) {
    throw bstoa::Error(bstoa::ErrorKind::DimensionMismatch,
                       "input must have L*M rows and N columns for " + topo.describe());
  }
  const bstoa::ObservationBlock obs{y, static_cast<int>(y.rows() / topo.m()), 0.0};
  const bstoa::DelayMatrix t_hat = bstoa::estimate_ls(obs, topo);
  if (method == "ls") return t_hat;
  return bstoa::estimate_proposed(t_hat, bstoa::compute_b(topo), topo);
}

int exit_code_for(const bstoa::Error& e) {
  switch (e.kind()) {
    case bstoa::ErrorKind::SingularSystem:
    case bstoa::ErrorKind::SingularGeometry:
      return kExitNumerical;
    default:
      return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology-constrained TOA estimation for MIMO backscatter channels"};
  app.require_subcommand(1);

  // gen-matrix
  TopologyArgs gen_topo;
  std::string which = "a";
  auto* gen = app.add_subcommand("gen-matrix", "Print the correlation matrix A or weight matrix B");
  gen_topo.attach(gen);
  gen->add_option("--which", which, "Matrix to print")->check(CLI::IsMember({"a", "b"}));

  // estimate
  TopologyArgs est_topo;
  std::string est_input;
  std::string est_method = "proposed";
  auto* est = app.add_subcommand("estimate", "Estimate the delay matrix from pilot observations");
  est_topo.attach(est);
  est->add_option("--input", est_input, "Observations CSV (L*M rows, N columns, seconds)")
      ->required();
  est->add_option("--method", est_method)->check(CLI::IsMember({"ls", "proposed"}));

  // crlb
  TopologyArgs crlb_topo;
  double crlb_sigma = 0.0;
  int crlb_pilot_len = 1;
  bool crlb_subchannel = false;
  auto* crlb = app.add_subcommand("crlb", "Print the Cramer-Rao bound matrix");
  crlb_topo.attach(crlb);
  crlb->add_option("--sigma", crlb_sigma, "Noise standard deviation (seconds)")->required();
  crlb->add_option("--pilot-len", crlb_pilot_len, "Pilot length L")->required();
  crlb->add_flag("--subchannel", crlb_subchannel, "Print the M x N per-subchannel bounds instead");

  // localize
  std::string loc_scene;
  std::string loc_toa;
  std::string loc_method = "proposed";
  auto* loc = app.add_subcommand("localize", "Locate the tag from delays or observations");
  loc->add_option("--scene", loc_scene, "Scene record (anchor positions, delta)")->required();
  loc->add_option("--toa", loc_toa, "CSV with M x N delays or L*M x N observations")->required();
  loc->add_option("--method", loc_method)->check(CLI::IsMember({"ls", "proposed"}));

  // simulate
  TopologyArgs sim_topo;
  std::uint64_t sim_seed = 1;
  std::uint64_t sim_stream = 0;
  double sim_cube = 10.0;
  double sim_delta = 0.0;
  double sim_sigma = 0.0;
  int sim_pilot_len = 1;
  std::string sim_scene_out;
  std::string sim_delays_out;
  std::string sim_obs_out;
  auto* sim = app.add_subcommand("simulate", "Draw a random scene and its observations");
  sim_topo.attach(sim);
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--stream", sim_stream, "Stream index");
  sim->add_option("--cube-side", sim_cube, "Cube side in meters");
  sim->add_option("--delta", sim_delta, "Tag processing delay in seconds");
  sim->add_option("--sigma", sim_sigma, "Noise standard deviation (seconds)");
  sim->add_option("--pilot-len", sim_pilot_len, "Pilot length L");
  sim->add_option("--scene-out", sim_scene_out, "Write the scene record here")->required();
  sim->add_option("--delays-out", sim_delays_out, "Write the true delay matrix here");
  sim->add_option("--obs-out", sim_obs_out, "Write the noisy observations here");

  // sweep
  std::string sweep_config;
  std::string sweep_out;
  unsigned sweep_workers = bstoa::default_workers();
  std::optional<std::uint64_t> sweep_seed;
  auto* sweep = app.add_subcommand("sweep", "Run a Monte-Carlo experiment and write CSV");
  sweep->add_option("--config", sweep_config, "Config file")->required();
  sweep->add_option("--out", sweep_out, "Output CSV (stdout when omitted)");
  sweep->add_option("--workers", sweep_workers, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "Override master_seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*gen) {
      const bstoa::Topology topo = gen_topo.build();
      const bstoa::CorrelationMatrix a = bstoa::generate_a(topo);
      std::cout << (which == "a" ? bstoa::format_csv_matrix(a)
                                 : bstoa::format_csv_matrix(bstoa::compute_b(a)));
    } else if (*est) {
      const bstoa::Topology topo = est_topo.build();
      const bstoa::Matrix y = bstoa::parse_csv_matrix(read_file(est_input));
      std::cout << bstoa::format_csv_matrix(estimate_from_block(y, topo, est_method));
    } else if (*crlb) {
      const bstoa::Topology topo = crlb_topo.build();
      if (!(crlb_sigma > 0.0) || crlb_pilot_len < 1) {
        throw bstoa::Error(bstoa::ErrorKind::InvalidArgument, "need sigma > 0 and pilot-len >= 1");
      }
      const double s2 = crlb_sigma * crlb_sigma;
      const bstoa::CrlbReport report = topo.is_monostatic()
                                           ? bstoa::crlb_monostatic(topo, s2, crlb_pilot_len)
                                           : bstoa::crlb_bistatic(topo, s2, crlb_pilot_len);
      std::cout << bstoa::format_csv_matrix(crlb_subchannel ? report.subchannel_bounds
                                                            : report.covariance_bound);
    } else if (*loc) {
      const bstoa::Scene scene = bstoa::parse_scene(read_file(loc_scene));
      const bstoa::Matrix y = bstoa::parse_csv_matrix(read_file(loc_toa));
      const bstoa::DelayMatrix t = estimate_from_block(y, scene.topo, loc_method);
      const bstoa::PositionFix fix = bstoa::localize(scene, t);
      std::printf("%.17g,%.17g,%.17g,%.17g\n", fix.position.x(), fix.position.y(),
                  fix.position.z(), fix.residual_norm);
    } else if (*sim) {
      const bstoa::Topology topo = sim_topo.build();
      bstoa::Rng rng(sim_seed, sim_stream);
      bstoa::Scene scene = bstoa::random_scene(topo, sim_cube, rng);
      scene.delta = sim_delta;
      const bstoa::DelayMatrix t = bstoa::true_delays(scene);
      write_file(sim_scene_out, bstoa::serialize_scene(scene));
      if (!sim_delays_out.empty()) write_file(sim_delays_out, bstoa::format_csv_matrix(t));
      if (!sim_obs_out.empty()) {
        const auto obs = bstoa::synth_observations(t, sim_pilot_len, sim_sigma, rng);
        write_file(sim_obs_out, bstoa::format_csv_matrix(obs.y));
      }
    } else if (*sweep) {
      bstoa::SweepConfig cfg = bstoa::parse_sweep_config(read_file(sweep_config));
      if (sweep_seed) cfg.master_seed = *sweep_seed;
      const std::string csv = bstoa::run_sweep(cfg, sweep_workers).to_csv();
      if (sweep_out.empty()) {
        std::cout << csv;
      } else {
        write_file(sweep_out, csv);
      }
    }
  } catch (const bstoa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
