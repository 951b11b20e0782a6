#pragma once

// Commands behind the qvortex executable. Each returns a process exit status:
// 0 on success, 1 when a solve or check fails, 2 when the configuration is invalid.
// Diagnostics go to `err` as "error [stage]: message".

#include "qvortex/basis.hpp"
#include "qvortex/config.hpp"
#include "qvortex/model.hpp"
#include "qvortex/oracle.hpp"
#include "qvortex/solver.hpp"
#include "qvortex/sweep.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qvortex {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Failure attributed to a named pipeline stage (basis, solve, io, ...).
class CommandError : public std::runtime_error {
public:
  CommandError(std::string stage, const std::string &message)
      : std::runtime_error(message), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string &stage() const { return stage_; }

private:
  std::string stage_;
};

struct BoundCheck {
  std::string name;
  bool applicable = true;
  bool pass = true;
  std::string detail;
};

struct OracleComparison {
  VortexSolution spectral;
  FdSolution fd;
  std::vector<double> phi_spectral; ///< spectral profile at the fd grid points
  double omega_sq_difference = 0.0;
  double profile_difference = 0.0;  ///< max |phi_spectral - phi_fd| over the fd grid
};

namespace detail {

inline const std::vector<double> kTableOneNorms{10, 50, 100, 200, 500, 1000};
inline const std::vector<int> kTableTwoWindings{1, 2, 3, 4, 5};
inline constexpr double kTableTwoNorm = 100.0;

inline std::string csv_bool(bool value) { return value ? "true" : "false"; }

inline std::filesystem::path prepare_output(const RunConfig &config) {
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw CommandError("io", "cannot create output directory '" + config.output_dir + "': " + ec.message());
  return std::filesystem::path(config.output_dir);
}

inline void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError("io", "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw CommandError("io", "write to '" + path.string() + "' failed");
}

/// Comment block naming the version, the command and the resolved configuration.
inline std::string csv_preamble(const RunConfig &config, const std::string &command) {
  std::ostringstream out;
  out << "# " << kVersion << '\n' << "# command: " << command << '\n';
  for (const auto &[key, value] : config.entries()) out << "# " << key << '=' << value << '\n';
  return out.str();
}

inline nlohmann::ordered_json config_json(const RunConfig &config) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto &[key, value] : config.entries()) doc[key] = value;
  return doc;
}

inline nlohmann::ordered_json document(const RunConfig &config, const std::string &command) {
  nlohmann::ordered_json doc;
  doc["version"] = kVersion;
  doc["command"] = command;
  doc["config"] = config_json(config);
  return doc;
}

inline std::string record_csv(const SweepRecord &r, bool winding_key) {
  std::ostringstream out;
  out << (winding_key ? std::to_string(r.n) : format_double(r.q0)) << ',' << format_double(r.omega_sq) << ','
      << format_double(r.phi_max) << ',' << format_double(r.residual_error) << ',' << r.iterations << ','
      << csv_bool(r.converged) << '\n';
  return out.str();
}

inline double require_positive_norm(double q0) {
  if (!(std::isfinite(q0) && q0 > 0.0)) throw ConfigError("q0 > 0 violated (got " + format_double(q0) + ")");
  return q0;
}

/// Maps exceptions onto exit codes and "error [stage]: ..." lines.
inline int guarded(std::ostream &err, const std::function<int()> &body) {
  try {
    return body();
  } catch (const ConfigError &e) {
    err << "error [config]: " << e.what() << '\n';
    return kExitConfig;
  } catch (const BasisConstructionError &e) {
    err << "error [basis]: " << e.what() << '\n';
    return kExitFailure;
  } catch (const CommandError &e) {
    err << "error [" << e.stage() << "]: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception &e) {
    err << "error [run]: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline Eigen::VectorXd random_sphere_point(int m, double q0, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd a(m);
  for (int i = 0; i < m; ++i) a[i] = normal(rng) / (1.0 + 0.3 * i);
  return a * std::sqrt(q0) / a.norm();
}

} // namespace detail

/// Theorem-style checks on one solution. Checks whose hypotheses fail are
/// marked not applicable and count as passing.
inline std::vector<BoundCheck> bound_checks(const VortexSolution &sol, const SpectralBasis &basis,
                                            const ModelParams &params, double p0_fraction) {
  const TheoryBounds t = theory_bounds(params);
  const double edge = omega_sq_bound_applicability(params);
  std::vector<BoundCheck> checks;

  {
    BoundCheck c{"necessary_condition", true, sol.omega_sq > t.omega_sq_necessary, {}};
    c.detail = "omega_sq = " + format_double(sol.omega_sq) + " > " + format_double(t.omega_sq_necessary);
    checks.push_back(c);
  }
  {
    BoundCheck c{"amplitude_ceiling", sol.omega_sq < edge, true, {}};
    c.pass = !c.applicable || sol.phi_max < t.phi_max_ceiling;
    c.detail = "phi_max = " + format_double(sol.phi_max) + " < " + format_double(t.phi_max_ceiling);
    checks.push_back(c);
  }
  {
    BoundCheck c{"boundary_decay", sol.omega_sq < edge, true, {}};
    if (c.applicable) {
      const double sigma = decay_rate(sol.omega_sq, params);
      const double p0 = p0_fraction * params.p;
      const double ceiling_sq = t.phi_max_ceiling * t.phi_max_ceiling;
      const ProfileSamples samples = basis.sample(sol.coeffs, kProfilePoints);
      double worst = 0.0; // largest phi^2 / envelope
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples.rho[i] < p0) continue;
        const double envelope = ceiling_sq * std::exp(-sigma * (samples.rho[i] - p0));
        worst = std::max(worst, samples.phi[i] * samples.phi[i] / envelope);
      }
      c.pass = worst <= 1.0;
      c.detail = "sigma = " + format_double(sigma) + ", P0 = " + format_double(p0) +
                 ", max phi^2/envelope = " + format_double(worst);
    } else {
      c.detail = "omega_sq >= 2 lambda b + N^2/P^2";
    }
    checks.push_back(c);
  }
  {
    BoundCheck c{"norm_threshold", sol.omega_sq < t.omega_sq_max, true, {}};
    c.pass = !c.applicable || sol.q0 > t.q0_threshold;
    c.detail = "q0 = " + format_double(sol.q0) + " > " + format_double(t.q0_threshold);
    checks.push_back(c);
  }
  {
    BoundCheck c{"frequency_window", sol.q0 > 10.0 * t.q0_threshold, true, {}};
    c.pass = !c.applicable || (sol.omega_sq > t.omega_sq_min && sol.omega_sq < t.omega_sq_max);
    c.detail = format_double(t.omega_sq_min) + " < omega_sq = " + format_double(sol.omega_sq) + " < " +
               format_double(t.omega_sq_max);
    checks.push_back(c);
  }
  return checks;
}

/// Spectral and finite-difference solutions of the same problem, compared on the fd grid.
inline OracleComparison compare_with_oracle(const SpectralBasis &basis, const ModelParams &params,
                                            const SolveConfig &config, int fd_points) {
  OracleComparison out;
  out.spectral = minimize_on_sphere(basis, params, config);
  out.fd = fd_minimize(params, config.q0, fd_points);
  const ProfileSamples samples = basis.sample(out.spectral.coeffs, fd_points + 1);
  out.phi_spectral = samples.phi;
  out.omega_sq_difference = std::abs(out.spectral.omega_sq - out.fd.omega_sq);
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.profile_difference = std::max(out.profile_difference, std::abs(samples.phi[i] - out.fd.phi_values[i]));
  return out;
}

/// Largest |fd - g| / max|g| over `samples` random points of the q0 sphere.
inline double gradient_check(const SpectralBasis &basis, const ModelParams &params, double q0, int samples,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const double h = 1e-6;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd a = detail::random_sphere_point(basis.size(), q0, rng);
    const Eigen::VectorXd g = functional_gradient(a, basis, params);
    double diff = 0.0;
    for (int k = 0; k < basis.size(); ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(basis.size());
      e[k] = h;
      const double fd =
          (discrete_functional(a + e, basis, params, q0) - discrete_functional(a - e, basis, params, q0)) / (2 * h);
      diff = std::max(diff, std::abs(fd - g[k]));
    }
    worst = std::max(worst, diff / g.cwiseAbs().maxCoeff());
  }
  return worst;
}

inline int cmd_solve(const RunConfig &config, double q0, std::ostream &out, std::ostream &err) {
  return detail::guarded(err, [&] {
    config.validate();
    detail::require_positive_norm(q0);
    const auto dir = detail::prepare_output(config);
    const SpectralBasis basis = config.basis();
    const ModelParams &params = config.model;
    const VortexSolution sol = minimize_on_sphere(basis, params, config.solve_config(q0));
    const std::string command = "solve q0=" + format_double(q0);

    std::ostringstream profile;
    profile << detail::csv_preamble(config, command) << "rho,phi,phi_rho,phi_rhorho\n";
    const ProfileSamples samples = basis.sample(sol.coeffs, kProfilePoints);
    for (std::size_t i = 0; i < samples.size(); ++i)
      profile << format_double(samples.rho[i]) << ',' << format_double(samples.phi[i]) << ','
              << format_double(samples.phi_rho[i]) << ',' << format_double(samples.phi_rhorho[i]) << '\n';
    detail::write_file(dir / "profile.csv", profile.str());

    auto solution = detail::document(config, command);
    solution["q0"] = sol.q0;
    solution["n"] = sol.n;
    solution["omega_sq"] = sol.omega_sq;
    solution["phi_max"] = sol.phi_max;
    solution["peak_radius"] = sol.peak_radius;
    solution["residual_error"] = sol.residual_error;
    solution["residual_first_panel"] = sol.residual_first_panel;
    solution["f_value"] = sol.f_value;
    solution["iterations"] = sol.iterations;
    solution["converged"] = sol.converged;
    solution["tangent_grad_norm"] = sol.tangent_grad_norm;
    solution["coeffs"] = std::vector<double>(sol.coeffs.data(), sol.coeffs.data() + sol.coeffs.size());
    detail::write_file(dir / "solution.json", solution.dump(2) + "\n");

    const TheoryBounds t = theory_bounds(params);
    auto bounds = detail::document(config, command);
    bounds["omega_sq_min"] = t.omega_sq_min;
    bounds["omega_sq_max"] = t.omega_sq_max;
    bounds["omega_sq_necessary"] = t.omega_sq_necessary;
    bounds["phi_max_ceiling"] = t.phi_max_ceiling;
    bounds["q0_threshold"] = t.q0_threshold;
    bounds["p_star"] = t.p_star;
    bounds["p_star_omega_sq"] = t.p_star_omega_sq;
    bool all_pass = true;
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const BoundCheck &c : bound_checks(sol, basis, params, config.decay_p0_fraction)) {
      checks.push_back({{"name", c.name}, {"applicable", c.applicable}, {"pass", c.pass}, {"detail", c.detail}});
      all_pass = all_pass && c.pass;
    }
    bounds["checks"] = checks;
    detail::write_file(dir / "bounds.json", bounds.dump(2) + "\n");

    out << "omega_sq=" << format_double(sol.omega_sq) << " phi_max=" << format_double(sol.phi_max)
        << " residual_error=" << format_double(sol.residual_error) << " iterations=" << sol.iterations
        << " converged=" << detail::csv_bool(sol.converged) << '\n';
    if (!sol.converged) {
      err << "error [solve]: no convergence after " << sol.iterations << " iterations (tangent gradient norm "
          << format_double(sol.tangent_grad_norm) << ")\n";
      return kExitFailure;
    }
    if (!all_pass) {
      err << "error [bounds]: a theoretical bound check failed; see bounds.json\n";
      return kExitFailure;
    }
    return kExitOk;
  });
}

namespace detail {

inline int finish_table(const std::vector<SweepRecord> &rows, bool winding_key, const std::string &header,
                        const std::filesystem::path &path, const RunConfig &config, const std::string &command,
                        std::ostream &out, std::ostream &err) {
  std::ostringstream csv;
  csv << csv_preamble(config, command) << header << '\n';
  for (const SweepRecord &r : rows) csv << record_csv(r, winding_key);
  write_file(path, csv.str());
  out << "wrote " << path.string() << " (" << rows.size() << " rows)\n";
  int status = kExitOk;
  for (const SweepRecord &r : rows) {
    if (r.converged) continue;
    err << "error [solve]: row " << (winding_key ? "n=" + std::to_string(r.n) : "q0=" + format_double(r.q0))
        << " did not converge\n";
    status = kExitFailure;
  }
  return status;
}

} // namespace detail

inline int cmd_table1(const RunConfig &config, std::ostream &out, std::ostream &err) {
  return detail::guarded(err, [&] {
    config.validate();
    const auto dir = detail::prepare_output(config);
    const SpectralBasis basis = config.basis();
    const auto rows = sweep_q0(config.model, basis, detail::kTableOneNorms, config.solve_config(1.0));
    return detail::finish_table(rows, false, "q0,omega_sq,phi_max,residual_error,iterations,converged",
                                dir / "table1.csv", config, "table1", out, err);
  });
}

inline int cmd_table2(const RunConfig &config, std::ostream &out, std::ostream &err) {
  return detail::guarded(err, [&] {
    config.validate();
    const auto dir = detail::prepare_output(config);
    const SpectralBasis basis = config.basis();
    const auto rows = sweep_n(config.model, basis, detail::kTableTwoWindings, detail::kTableTwoNorm,
                              config.solve_config(detail::kTableTwoNorm));
    return detail::finish_table(rows, true, "n,omega_sq,phi_max,residual_error,iterations,converged",
                                dir / "table2.csv", config, "table2", out, err);
  });
}

/// Points spaced evenly in log q0, endpoints exact.
inline std::vector<double> log_spaced(double lo, double hi, int points) {
  std::vector<double> q(static_cast<std::size_t>(points));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < points; ++i) q[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
  q.front() = lo;
  q.back() = hi;
  return q;
}

inline int cmd_dispersion(const RunConfig &config, double q0_min, double q0_max, int points, std::ostream &out,
                          std::ostream &err) {
  return detail::guarded(err, [&] {
    config.validate();
    detail::require_positive_norm(q0_min);
    if (!(q0_max > q0_min)) throw ConfigError("q0_min < q0_max violated");
    if (points < 2) throw ConfigError("points >= 2 violated");
    const auto dir = detail::prepare_output(config);
    const SpectralBasis basis = config.basis();
    const auto rows = sweep_q0(config.model, basis, log_spaced(q0_min, q0_max, points), config.solve_config(q0_min));
    const TheoryBounds t = theory_bounds(config.model);

    std::ostringstream command;
    command << "dispersion q0_min=" << format_double(q0_min) << " q0_max=" << format_double(q0_max)
            << " points=" << points;
    std::ostringstream csv;
    csv << detail::csv_preamble(config, command.str())
        << "series,q0,omega_sq,phi_max,residual_error,iterations,converged\n";
    for (const SweepRecord &r : rows) csv << "solution," << detail::record_csv(r, false);
    for (const auto &[series, value] : {std::pair{"omega_sq_min", t.omega_sq_min}, {"omega_sq_max", t.omega_sq_max}})
      for (double q : {q0_min, q0_max}) csv << series << ',' << format_double(q) << ',' << format_double(value) << ",,,,\n";
    detail::write_file(dir / "dispersion.csv", csv.str());
    out << "wrote " << (dir / "dispersion.csv").string() << " (" << rows.size() << " points)\n";

    int status = kExitOk;
    for (const SweepRecord &r : rows) {
      if (r.converged) continue;
      err << "error [solve]: q0=" << format_double(r.q0) << " did not converge\n";
      status = kExitFailure;
    }
    return status;
  });
}

inline int cmd_verify(const RunConfig &config, std::ostream &out, std::ostream &err) {
  return detail::guarded(err, [&] {
    config.validate();
    int failures = 0;
    auto report = [&](const std::string &name, bool pass, const std::string &detail) {
      out << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
      if (!pass) ++failures;
    };

    std::optional<SpectralBasis> maybe_basis;
    try {
      maybe_basis.emplace(config.basis());
    } catch (const BasisConstructionError &e) {
      report("orthonormality", false, std::string("basis construction failed: ") + e.what());
      out << "summary: 1 check failed; remaining checks need a basis and were not run\n";
      return kExitFailure;
    }
    const SpectralBasis &basis = *maybe_basis;
    const ModelParams &params = config.model;

    const double ortho = basis.orthonormality_residual();
    report("orthonormality", ortho < 1e-8, "max |(psi_i, psi_j) - delta_ij| = " + format_double(ortho));

    const double grad = gradient_check(basis, params, 100.0, 10, config.rng_seed);
    report("gradient", grad < 1e-4, "max relative deviation from central differences = " + format_double(grad));

    SolveConfig solve = config.solve_config(100.0);
    double drift = 0.0, rise = -std::numeric_limits<double>::infinity();
    solve.observer = [&](const IterationInfo &info) {
      drift = std::max(drift, info.constraint_drift);
      rise = std::max(rise, info.f_change);
    };
    const VortexSolution sol = minimize_on_sphere(basis, params, solve);
    report("convergence", sol.converged,
           "Q0 = 100, N = " + std::to_string(params.n) + ", iterations = " + std::to_string(sol.iterations) +
               ", omega_sq = " + format_double(sol.omega_sq));
    report("constraint_drift", drift < 1e-12, "max per-iteration | |a|^2 - Q0 | / Q0 = " + format_double(drift));
    report("monotone_descent", rise <= 0.0, "largest accepted F change = " + format_double(rise));

    for (const BoundCheck &c : bound_checks(sol, basis, params, config.decay_p0_fraction)) {
      if (!c.applicable) {
        out << "SKIP " << c.name << ": not applicable (" << c.detail << ")\n";
        continue;
      }
      report(c.name, c.pass, c.detail);
    }

    const ModelParams unit_winding = params.with_n(1);
    const OracleComparison cmp =
        compare_with_oracle(basis, unit_winding, config.solve_config(100.0), config.fd_points);
    report("oracle_frequency", cmp.fd.converged && cmp.omega_sq_difference < 0.01,
           "|omega_sq spectral - fd| = " + format_double(cmp.omega_sq_difference) + " (N = 1, Q0 = 100)");
    report("oracle_profile", cmp.fd.converged && cmp.profile_difference < 0.02 * cmp.spectral.phi_max,
           "max |phi spectral - fd| = " + format_double(cmp.profile_difference) + ", phi_max = " +
               format_double(cmp.spectral.phi_max));

    SolveConfig tiny = config.solve_config(0.01);
    const VortexSolution linear = minimize_on_sphere(basis, params, tiny);
    const double limit = linear_limit_omega_sq(params);
    report("linear_limit", linear.converged && std::abs(linear.omega_sq - limit) < 1e-3,
           "omega_sq(Q0 = 0.01) = " + format_double(linear.omega_sq) + ", 2 lambda b + (j/P)^2 = " +
               format_double(limit));

    const TheoryBounds t = theory_bounds(params);
    report("domain_radius", params.p > t.p_star,
           "P = " + format_double(params.p) + " > p_star = " + format_double(t.p_star));

    out << "summary: " << failures << (failures == 1 ? " check" : " checks") << " failed\n";
    return failures == 0 ? kExitOk : kExitFailure;
  });
}

inline int cmd_oracle_compare(const RunConfig &config, double q0, std::ostream &out, std::ostream &err) {
  return detail::guarded(err, [&] {
    config.validate();
    detail::require_positive_norm(q0);
    const auto dir = detail::prepare_output(config);
    const SpectralBasis basis = config.basis();
    const OracleComparison cmp = compare_with_oracle(basis, config.model, config.solve_config(q0), config.fd_points);
    const std::string command = "oracle-compare q0=" + format_double(q0);

    std::ostringstream csv;
    csv << detail::csv_preamble(config, command) << "rho,phi_fd,phi_spectral\n";
    for (std::size_t i = 0; i < cmp.fd.grid_points.size(); ++i)
      csv << format_double(cmp.fd.grid_points[i]) << ',' << format_double(cmp.fd.phi_values[i]) << ','
          << format_double(cmp.phi_spectral[i]) << '\n';
    detail::write_file(dir / "oracle_profile.csv", csv.str());

    auto doc = detail::document(config, command);
    doc["q0"] = q0;
    doc["n"] = config.model.n;
    doc["omega_sq_spectral"] = cmp.spectral.omega_sq;
    doc["omega_sq_fd"] = cmp.fd.omega_sq;
    doc["omega_sq_difference"] = cmp.omega_sq_difference;
    doc["profile_difference"] = cmp.profile_difference;
    doc["phi_max_spectral"] = cmp.spectral.phi_max;
    doc["phi_max_fd"] = cmp.fd.phi_max();
    doc["spectral_converged"] = cmp.spectral.converged;
    doc["fd_converged"] = cmp.fd.converged;
    doc["fd_iterations"] = cmp.fd.iterations;
    doc["within_tolerance"] =
        cmp.omega_sq_difference < 0.01 && cmp.profile_difference < 0.02 * cmp.spectral.phi_max;
    detail::write_file(dir / "oracle_compare.json", doc.dump(2) + "\n");

    out << "omega_sq spectral=" << format_double(cmp.spectral.omega_sq) << " fd=" << format_double(cmp.fd.omega_sq)
        << " |diff|=" << format_double(cmp.omega_sq_difference)
        << " profile max diff=" << format_double(cmp.profile_difference) << '\n';
    if (!cmp.spectral.converged || !cmp.fd.converged) {
      err << "error [solve]: " << (cmp.spectral.converged ? "finite-difference" : "spectral")
          << " solve did not converge\n";
      return kExitFailure;
    }
    return kExitOk;
  });
}

} // namespace qvortex
