#pragma once

// Parameter sweeps over Q0 and N, and root finding for w^2(Q0) = target.

#include "qvortex/basis.hpp"
#include "qvortex/model.hpp"
#include "qvortex/oracle.hpp"
#include "qvortex/solver.hpp"

#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qvortex {

struct SweepRecord {
  double q0 = 0.0;
  int n = 0;
  double omega_sq = 0.0;
  double phi_max = 0.0;
  double residual_error = 0.0;
  int iterations = 0;
  bool converged = false;
  double peak_radius = 0.0;
};

inline SweepRecord to_record(const VortexSolution &sol) {
  return {sol.q0, sol.n, sol.omega_sq, sol.phi_max, sol.residual_error, sol.iterations, sol.converged,
          sol.peak_radius};
}

enum class SweepStart { warm, cold };

/// One solve per q0. In warm mode each solve starts from the previous
/// minimizer scaled by sqrt(q0_new / q0_old); cold mode uses config's guess
/// for every row. Non-converged rows are recorded and the sweep continues.
inline std::vector<SweepRecord> sweep_q0(const ModelParams &params, const SpectralBasis &basis,
                                         const std::vector<double> &q0_list, const SolveConfig &config,
                                         SweepStart start = SweepStart::warm) {
  params.validate();
  for (std::size_t i = 0; i < q0_list.size(); ++i) {
    if (!(q0_list[i] > 0.0)) throw std::invalid_argument("sweep_q0: q0 values must be positive");
    if (i > 0 && !(q0_list[i] > q0_list[i - 1]))
      throw std::invalid_argument("sweep_q0: q0 values must be strictly ascending");
  }

  std::vector<SweepRecord> rows;
  rows.reserve(q0_list.size());
  Eigen::VectorXd previous;
  double previous_q0 = 0.0;
  for (double q0 : q0_list) {
    SolveConfig row_config = config;
    row_config.q0 = q0;
    if (start == SweepStart::warm && previous.size() > 0) {
      row_config.initial_guess = InitialGuess::custom;
      row_config.custom_coeffs = previous * std::sqrt(q0 / previous_q0);
    }
    const VortexSolution sol = minimize_on_sphere(basis, params, row_config);
    rows.push_back(to_record(sol));
    previous = sol.coeffs;
    previous_q0 = q0;
  }
  return rows;
}

/// One solve per winding number at fixed q0, all on the same basis. Rows run
/// concurrently when `parallel` is set and no observer is attached.
inline std::vector<SweepRecord> sweep_n(const ModelParams &params, const SpectralBasis &basis,
                                        const std::vector<int> &n_list, double q0, const SolveConfig &config,
                                        bool parallel = true) {
  SolveConfig row_config = config;
  row_config.q0 = q0;
  row_config.validate();
  for (int n : n_list) params.with_n(n).validate();

  auto solve_row = [&](int n) { return to_record(minimize_on_sphere(basis, params.with_n(n), row_config)); };

  std::vector<SweepRecord> rows;
  rows.reserve(n_list.size());
  if (parallel && !config.observer) {
    std::vector<std::future<SweepRecord>> pending;
    pending.reserve(n_list.size());
    for (int n : n_list) pending.push_back(std::async(std::launch::async, solve_row, n));
    for (auto &f : pending) rows.push_back(f.get());
  } else {
    for (int n : n_list) rows.push_back(solve_row(n));
  }
  return rows;
}

/// Thrown when w^2(Q0) fails to decrease across a bracket.
class MonotonicityViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CrossingOptions {
  double q0_low = 1e-2;
  double q0_high = 100.0;
  double q0_limit = 1e7;      ///< give up growing the upper bracket beyond this
  double omega_tol = 1e-3;
  int max_bisections = 200;
};

/// Q0 at which w^2(Q0) = target, by geometric bisection on a decreasing w^2(Q0).
/// The target must lie in (omega_sq_min, linear limit).
inline double locate_omega_crossing(const ModelParams &params, const SpectralBasis &basis, double target_omega_sq,
                                    const SolveConfig &config, const CrossingOptions &opt = {}) {
  const TheoryBounds bounds = theory_bounds(params);
  const double linear = linear_limit_omega_sq(params);
  if (!(target_omega_sq > bounds.omega_sq_min && target_omega_sq < linear)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "locate_omega_crossing: target " << target_omega_sq << " outside (" << bounds.omega_sq_min << ", "
        << linear << ")";
    throw std::invalid_argument(msg.str());
  }

  auto omega_at = [&](double q0) {
    SolveConfig c = config;
    c.q0 = q0;
    return minimize_on_sphere(basis, params, c).omega_sq;
  };
  auto violation = [](double q_a, double w_a, double q_b, double w_b) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "omega^2 not decreasing in Q0: omega^2(" << q_a << ") = " << w_a << ", omega^2(" << q_b
        << ") = " << w_b;
    return MonotonicityViolation(msg.str());
  };

  double q_lo = opt.q0_low, q_hi = opt.q0_high;
  double w_lo = omega_at(q_lo), w_hi = omega_at(q_hi);
  if (std::abs(w_lo - target_omega_sq) < opt.omega_tol) return q_lo;
  if (w_lo < target_omega_sq) {
    std::ostringstream msg;
    msg << "locate_omega_crossing: omega^2(" << q_lo << ") = " << w_lo << " is already below the target";
    throw std::runtime_error(msg.str());
  }
  while (w_hi > target_omega_sq) {
    if (std::abs(w_hi - target_omega_sq) < opt.omega_tol) return q_hi;
    if (w_hi > w_lo) throw violation(q_lo, w_lo, q_hi, w_hi);
    if (q_hi * 2.0 > opt.q0_limit) throw std::runtime_error("locate_omega_crossing: no upper bracket found");
    q_lo = q_hi;
    w_lo = w_hi;
    q_hi *= 2.0;
    w_hi = omega_at(q_hi);
  }

  for (int i = 0; i < opt.max_bisections; ++i) {
    const double q_mid = std::sqrt(q_lo * q_hi);
    const double w_mid = omega_at(q_mid);
    if (w_mid > w_lo) throw violation(q_lo, w_lo, q_mid, w_mid);
    if (w_mid < w_hi) throw violation(q_mid, w_mid, q_hi, w_hi);
    if (std::abs(w_mid - target_omega_sq) < opt.omega_tol) return q_mid;
    if (w_mid > target_omega_sq) {
      q_lo = q_mid;
      w_lo = w_mid;
    } else {
      q_hi = q_mid;
      w_hi = w_mid;
    }
  }
  throw std::runtime_error("locate_omega_crossing: bisection did not reach the tolerance");
}

} // namespace qvortex
