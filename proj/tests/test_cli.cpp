#include "qvortex/commands.hpp"
#include "qvortex/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using qvortex::RunConfig;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("qvortex_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig config_in(const fs::path &dir) {
  RunConfig config;
  config.output_dir = dir.string();
  return config;
}

std::string slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

/// Data lines of a CSV, comment preamble removed; first entry is the header.
std::vector<std::string> data_lines(const fs::path &path) {
  std::istringstream in(slurp(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string field; std::getline(in, field, ',');) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

} // namespace

TEST(RunConfig, Defaults) {
  const RunConfig config;
  EXPECT_EQ(config.basis_size, 60);
  EXPECT_EQ(config.quad_panels, 48);
  EXPECT_EQ(config.quad_order, 8);
  EXPECT_EQ(config.grad_tol, 1e-8);
  EXPECT_EQ(config.max_iter, 20000);
  EXPECT_EQ(config.restarts, 2);
  EXPECT_EQ(config.rng_seed, 0u);
  EXPECT_EQ(config.model.lambda, 1.0);
  EXPECT_EQ(config.model.a_pot, 2.0);
  EXPECT_EQ(config.model.b, 1.1);
  EXPECT_EQ(config.model.p, 20.0);
  EXPECT_NO_THROW(config.validate());
}

TEST(RunConfig, ParsesFileTextWithCommentsAndOverrides) {
  const RunConfig config = qvortex::parse_config_text("# sextic set\nlambda = 2\n\nb=3.5   # trailing\nn=-2\nbasis_size=40\n"
                                                      "descent = steepest\n");
  EXPECT_EQ(config.model.lambda, 2.0);
  EXPECT_EQ(config.model.b, 3.5);
  EXPECT_EQ(config.model.n, -2);
  EXPECT_EQ(config.basis_size, 40);
  EXPECT_EQ(config.descent, qvortex::Descent::steepest);
  RunConfig copy = config;
  copy.apply_override("basis_size=80");
  EXPECT_EQ(copy.basis_size, 80);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(qvortex::parse_config_text("foo=1\n"), qvortex::ConfigError);
  EXPECT_THROW(qvortex::parse_config_text("lambda=abc\n"), qvortex::ConfigError);
  EXPECT_THROW(qvortex::parse_config_text("n=1.5\n"), qvortex::ConfigError);
  EXPECT_THROW(qvortex::parse_config_text("lambda\n"), qvortex::ConfigError);
  try {
    qvortex::parse_config_text("b=1.2\nmax_iter=ten\n");
    FAIL();
  } catch (const qvortex::ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(qvortex::load_config_file("/nonexistent/qvortex.cfg"), qvortex::ConfigError);
}

TEST(RunConfig, EchoRoundTrips) {
  RunConfig config;
  config.model.b = 1.1;
  config.grad_tol = 3e-9;
  config.rng_seed = 17;
  std::string text;
  for (const auto &[key, value] : config.entries()) text += key + "=" + value + "\n";
  const RunConfig reparsed = qvortex::parse_config_text(text);
  EXPECT_EQ(reparsed.entries(), config.entries());
  EXPECT_EQ(config.entries().front().first, "lambda");
  EXPECT_EQ(config.entries()[2].second, "1.1");
}

TEST(RunConfig, ValidationNamesInvariant) {
  RunConfig config;
  config.model.b = 0.9;
  try {
    config.validate();
    FAIL();
  } catch (const qvortex::ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("b > a^2/4 violated"), std::string::npos);
  }
  config = RunConfig{};
  config.quad_order = 1;
  EXPECT_THROW(config.validate(), qvortex::ConfigError);
}

TEST(CmdSolve, WritesOutputs) {
  const auto dir = scratch("solve");
  std::ostringstream out, err;
  ASSERT_EQ(qvortex::cmd_solve(config_in(dir), 100.0, out, err), qvortex::kExitOk) << err.str();

  const auto profile = data_lines(dir / "profile.csv");
  ASSERT_EQ(profile.size(), 1u + qvortex::kProfilePoints);
  EXPECT_EQ(profile.front(), "rho,phi,phi_rho,phi_rhorho");
  EXPECT_NE(slurp(dir / "profile.csv").find("# qvortex 1.0.0"), std::string::npos);
  EXPECT_NE(slurp(dir / "profile.csv").find("# basis_size=60"), std::string::npos);

  const auto solution = nlohmann::json::parse(slurp(dir / "solution.json"));
  EXPECT_NEAR(solution["omega_sq"].get<double>(), 0.4287, 0.02);
  EXPECT_TRUE(solution["converged"].get<bool>());
  EXPECT_EQ(solution["version"], "qvortex 1.0.0");
  EXPECT_EQ(solution["config"]["b"], "1.1");
  EXPECT_EQ(solution["coeffs"].size(), 60u);

  const auto bounds = nlohmann::json::parse(slurp(dir / "bounds.json"));
  EXPECT_NEAR(bounds["omega_sq_min"].get<double>(), 0.2, 1e-14);
  ASSERT_FALSE(bounds["checks"].empty());
  for (const auto &check : bounds["checks"]) EXPECT_TRUE(check["pass"].get<bool>()) << check["name"];
}

TEST(CmdSolve, RejectsZeroNorm) {
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_solve(config_in(scratch("q0zero")), 0.0, out, err), qvortex::kExitConfig);
  EXPECT_NE(err.str().find("error [config]"), std::string::npos);
  EXPECT_NE(err.str().find("q0 > 0"), std::string::npos);
}

TEST(CmdSolve, RejectsSubcriticalQuadratic) {
  RunConfig config = config_in(scratch("bad_b"));
  config.model.b = 0.9;
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_solve(config, 100.0, out, err), qvortex::kExitConfig);
  EXPECT_NE(err.str().find("b > a^2/4 violated"), std::string::npos);
}

TEST(CmdSolve, NonConvergenceExitsNonZero) {
  RunConfig config = config_in(scratch("noconv"));
  config.max_iter = 2;
  config.restarts = 0;
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_solve(config, 100.0, out, err), qvortex::kExitFailure);
  EXPECT_NE(err.str().find("error [solve]"), std::string::npos);
}

TEST(CmdTable1, HeaderRowsAndDeterminism) {
  const auto dir = scratch("table1");
  std::ostringstream out, err;
  ASSERT_EQ(qvortex::cmd_table1(config_in(dir), out, err), qvortex::kExitOk) << err.str();
  const auto lines = data_lines(dir / "table1.csv");
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "q0,omega_sq,phi_max,residual_error,iterations,converged");
  const std::vector<double> omega{2.1755, 0.5663, 0.4287, 0.3517, 0.2904, 0.2618};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i]);
    ASSERT_EQ(fields.size(), 6u);
    EXPECT_NEAR(std::stod(fields[1]), omega[i - 1], std::max(0.02, 0.02 * omega[i - 1]));
    EXPECT_EQ(fields[5], "true");
  }

  const std::string first = slurp(dir / "table1.csv");
  ASSERT_EQ(qvortex::cmd_table1(config_in(dir), out, err), qvortex::kExitOk);
  EXPECT_EQ(slurp(dir / "table1.csv"), first);
}

TEST(CmdTable2, RowsIncreaseInFrequency) {
  const auto dir = scratch("table2");
  std::ostringstream out, err;
  ASSERT_EQ(qvortex::cmd_table2(config_in(dir), out, err), qvortex::kExitOk) << err.str();
  const auto lines = data_lines(dir / "table2.csv");
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "n,omega_sq,phi_max,residual_error,iterations,converged");
  double previous = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i]);
    EXPECT_EQ(fields[0], std::to_string(i));
    EXPECT_GT(std::stod(fields[1]), previous);
    previous = std::stod(fields[1]);
  }
}

TEST(CmdTable2, RejectsZeroWinding) {
  RunConfig config = config_in(scratch("table2_n0"));
  config.model.n = 0;
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_table2(config, out, err), qvortex::kExitConfig);
  EXPECT_NE(err.str().find("|N| >= 1"), std::string::npos);
}

TEST(CmdDispersion, MonotoneAboveCutoffAndMatchesSolve) {
  const auto dir = scratch("dispersion");
  std::ostringstream out, err;
  ASSERT_EQ(qvortex::cmd_dispersion(config_in(dir), 10.0, 1000.0, 25, out, err), qvortex::kExitOk) << err.str();
  const auto lines = data_lines(dir / "dispersion.csv");
  EXPECT_EQ(lines[0], "series,q0,omega_sq,phi_max,residual_error,iterations,converged");
  std::vector<double> q0, omega;
  int reference_rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i]);
    ASSERT_EQ(fields.size(), 7u) << lines[i];
    if (fields[0] == "solution") {
      q0.push_back(std::stod(fields[1]));
      omega.push_back(std::stod(fields[2]));
    } else {
      ++reference_rows;
    }
  }
  ASSERT_EQ(omega.size(), 25u);
  EXPECT_EQ(reference_rows, 4);
  for (std::size_t i = 1; i < omega.size(); ++i) {
    EXPECT_LT(omega[i], omega[i - 1]);
    EXPECT_NEAR(std::log(q0[i] / q0[i - 1]), std::log(100.0) / 24.0, 1e-12);
  }
  for (double w : omega) EXPECT_GT(w, 0.2);

  for (auto [index, norm] : {std::pair{std::size_t{0}, 10.0}, {std::size_t{24}, 1000.0}}) {
    const auto solve_dir = scratch("dispersion_end");
    ASSERT_EQ(qvortex::cmd_solve(config_in(solve_dir), norm, out, err), qvortex::kExitOk);
    const auto solution = nlohmann::json::parse(slurp(solve_dir / "solution.json"));
    EXPECT_NEAR(omega[index], solution["omega_sq"].get<double>(), 1e-6) << norm;
  }
}

TEST(CmdDispersion, RejectsBadRange) {
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_dispersion(config_in(scratch("disp_bad")), 100.0, 10.0, 5, out, err), qvortex::kExitConfig);
  EXPECT_EQ(qvortex::cmd_dispersion(config_in(scratch("disp_bad")), 10.0, 100.0, 1, out, err), qvortex::kExitConfig);
}

TEST(CmdVerify, DefaultConfigPasses) {
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_verify(config_in(scratch("verify")), out, err), qvortex::kExitOk) << out.str() << err.str();
  EXPECT_EQ(out.str().find("FAIL"), std::string::npos) << out.str();
  for (const char *name : {"orthonormality", "gradient", "boundary_decay", "oracle_frequency", "linear_limit"})
    EXPECT_NE(out.str().find(std::string("PASS ") + name), std::string::npos) << name;
}

TEST(CmdVerify, CoarseGridFailsOrthonormality) {
  RunConfig config = config_in(scratch("verify_coarse"));
  config.quad_panels = 2;
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_verify(config, out, err), qvortex::kExitFailure);
  EXPECT_NE(out.str().find("FAIL orthonormality"), std::string::npos) << out.str();
}

TEST(CmdVerify, TightenedDecayStillPasses) {
  RunConfig config = config_in(scratch("verify_decay"));
  config.decay_p0_fraction = 0.9;
  std::ostringstream out, err;
  EXPECT_EQ(qvortex::cmd_verify(config, out, err), qvortex::kExitOk) << out.str();
  EXPECT_NE(out.str().find("PASS boundary_decay: sigma = 1.33"), std::string::npos) << out.str();
  EXPECT_NE(out.str().find("P0 = 18"), std::string::npos);
}

TEST(CmdOracleCompare, WritesComparison) {
  const auto dir = scratch("oracle");
  RunConfig config = config_in(dir);
  config.model.n = 2;
  std::ostringstream out, err;
  ASSERT_EQ(qvortex::cmd_oracle_compare(config, 50.0, out, err), qvortex::kExitOk) << err.str();
  const auto doc = nlohmann::json::parse(slurp(dir / "oracle_compare.json"));
  EXPECT_TRUE(doc["within_tolerance"].get<bool>());
  EXPECT_LT(doc["omega_sq_difference"].get<double>(), 0.01);
  EXPECT_EQ(data_lines(dir / "oracle_profile.csv").size(), 2002u);
}

TEST(CmdSolve, BasisCacheIsReused) {
  const auto dir = scratch("cache");
  RunConfig config = config_in(dir);
  fs::create_directories(dir);
  config.basis_cache = (dir / "basis.json").string();
  std::ostringstream out, err;
  ASSERT_EQ(qvortex::cmd_solve(config, 100.0, out, err), qvortex::kExitOk);
  ASSERT_TRUE(fs::exists(config.basis_cache));
  const auto first = nlohmann::json::parse(slurp(dir / "solution.json"));
  ASSERT_EQ(qvortex::cmd_solve(config, 100.0, out, err), qvortex::kExitOk);
  const auto second = nlohmann::json::parse(slurp(dir / "solution.json"));
  EXPECT_EQ(first["omega_sq"], second["omega_sq"]);
}
