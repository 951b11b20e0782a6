// qvortex: command-line front end for the sextic Q-vortex solver.

#include "qvortex/commands.hpp"
#include "qvortex/config.hpp"

#include <CLI11.hpp>

#include <array>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option *n_opt = nullptr;
  CLI::Option *m_opt = nullptr;
  CLI::Option *seed_opt = nullptr;
  CLI::Option *out_opt = nullptr;
};

void add_common(CLI::App *sub, CommonOptions &opts) {
  sub->add_option("--config", opts.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--set", opts.overrides, "override one configuration key (key=value), repeatable");
  opts.n_opt = sub->add_option("--n", opts.n, "vortex winding number N");
  opts.m_opt = sub->add_option("--m", opts.m, "basis size");
  opts.seed_opt = sub->add_option("--seed", opts.seed, "restart RNG seed");
  opts.out_opt = sub->add_option("--out", opts.out, "output directory");
}

// File first, then --set overrides, then dedicated flags.
qvortex::RunConfig resolve(const CommonOptions &opts) {
  qvortex::RunConfig config;
  if (!opts.config_path.empty()) config = qvortex::load_config_file(opts.config_path);
  for (const std::string &assignment : opts.overrides) config.apply_override(assignment);
  if (*opts.n_opt) config.model.n = opts.n;
  if (*opts.m_opt) config.basis_size = opts.m;
  if (*opts.seed_opt) config.rng_seed = opts.seed;
  if (*opts.out_opt) config.output_dir = opts.out;
  return config;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Spinning Q-vortex ground states of the sextic model by spectral-Galerkin minimization"};
  app.set_version_flag("--version", std::string(qvortex::kVersion));
  app.require_subcommand(1);

  // One option set per subcommand; CLI11 binds options to the subcommand that owns them.
  std::array<CommonOptions, 6> opts;
  double q0 = 100.0;
  double q0_min = 10.0;
  double q0_max = 1000.0;
  int points = 25;

  auto *solve = app.add_subcommand("solve", "solve one (Q0, N) and write profile.csv, solution.json, bounds.json");
  add_common(solve, opts[0]);
  solve->add_option("--q0", q0, "prescribed reduced norm")->capture_default_str();

  auto *table1 = app.add_subcommand("table1", "Q0 sweep {10, 50, 100, 200, 500, 1000}, writes table1.csv");
  add_common(table1, opts[1]);

  auto *table2 = app.add_subcommand("table2", "N sweep 1..5 at Q0 = 100, writes table2.csv");
  add_common(table2, opts[2]);

  auto *dispersion = app.add_subcommand("dispersion", "log-spaced Q0 sweep, writes dispersion.csv");
  add_common(dispersion, opts[3]);
  dispersion->add_option("--q0-min", q0_min, "smallest Q0")->capture_default_str();
  dispersion->add_option("--q0-max", q0_max, "largest Q0")->capture_default_str();
  dispersion->add_option("--points", points, "number of Q0 values")->capture_default_str();

  auto *verify = app.add_subcommand("verify", "run the invariant suite and print a pass/fail report");
  add_common(verify, opts[4]);

  auto *oracle = app.add_subcommand("oracle-compare", "spectral vs finite-difference solution at one (Q0, N)");
  add_common(oracle, opts[5]);
  oracle->add_option("--q0", q0, "prescribed reduced norm")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const std::array<CLI::App *, 6> subs{solve, table1, table2, dispersion, verify, oracle};
  std::size_t chosen = 0;
  while (!*subs[chosen]) ++chosen;

  qvortex::RunConfig config;
  try {
    config = resolve(opts[chosen]);
  } catch (const qvortex::ConfigError &e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return qvortex::kExitConfig;
  }

  if (*solve) return qvortex::cmd_solve(config, q0, std::cout, std::cerr);
  if (*table1) return qvortex::cmd_table1(config, std::cout, std::cerr);
  if (*table2) return qvortex::cmd_table2(config, std::cout, std::cerr);
  if (*dispersion) return qvortex::cmd_dispersion(config, q0_min, q0_max, points, std::cout, std::cerr);
  if (*verify) return qvortex::cmd_verify(config, std::cout, std::cerr);
  return qvortex::cmd_oracle_compare(config, q0, std::cout, std::cerr);
}
