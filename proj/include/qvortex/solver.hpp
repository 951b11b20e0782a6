#pragma once

/**
 * @brief Ground-state Q-vortex by minimization on the sphere |a|^2 = Q0.
 *
 * With phi = sum_j a_j psi_j the action becomes
 *
 *   F(a) = 1/2 a^T (K + N^2 C) a + lambda b Q0 / (4 pi) + lambda \int rho (phi^6 - a phi^4),
 *
 * and the frequency w^2 is the Lagrange multiplier of the constraint. The
 * optimizer is a projected gradient method with Armijo backtracking and a
 * rescaling retraction back onto the sphere.
 */

#include "qvortex/basis.hpp"
#include "qvortex/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qvortex {

enum class InitialGuess { ring_bump, trapezoid, custom };

/// Search direction of the projected gradient iteration.
///  - preconditioned: tangent gradient in the metric K + N^2 C + shift + nonlinear curvature
///  - steepest: plain Euclidean tangent gradient with a Barzilai-Borwein trial step
enum class Descent { preconditioned, steepest };

struct IterationInfo {
  int run = 0;                   ///< 0 for the primary run, r for the r-th restart
  int iteration = 0;
  double f_change = 0.0;         ///< F(a_new) - F(a_old), never positive on accepted steps
  double step = 0.0;
  double constraint_drift = 0.0; ///< | |a|^2 - Q0 | / Q0 after the retraction
  double tangent_grad_norm = 0.0;
};

struct SolveConfig {
  double q0 = 100.0;
  double grad_tol = 1e-8;
  int max_iter = 20000;
  InitialGuess initial_guess = InitialGuess::ring_bump;
  Eigen::VectorXd custom_coeffs;
  int restarts = 2;
  std::uint64_t seed = 0;
  Descent descent = Descent::preconditioned;
  std::function<void(const IterationInfo &)> observer;

  void validate() const {
    if (!(std::isfinite(q0) && q0 > 0.0)) throw std::invalid_argument("solve config: q0 > 0 violated");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("solve config: grad_tol > 0 violated");
    if (max_iter < 1) throw std::invalid_argument("solve config: max_iter >= 1 violated");
    if (restarts < 0) throw std::invalid_argument("solve config: restarts >= 0 violated");
    if (initial_guess == InitialGuess::custom && custom_coeffs.size() == 0)
      throw std::invalid_argument("solve config: custom initial guess needs coefficients");
  }
};

struct VortexSolution {
  Eigen::VectorXd coeffs;
  double q0 = 0.0;
  int n = 0;
  double omega_sq = 0.0;
  double residual_error = 0.0;
  double residual_first_panel = 0.0; ///< part of RE^2 P^2 collected on the panel touching rho = 0
  double phi_max = 0.0;
  double peak_radius = 0.0;
  double f_value = 0.0;
  int iterations = 0;
  bool converged = false;
  double tangent_grad_norm = 0.0;
  double grad_norm = 0.0;
};

/// Output grid for phi_max, decay checks and profile files.
inline constexpr int kProfilePoints = 2001;

namespace detail {

inline Eigen::MatrixXd quadratic_operator(const SpectralBasis &basis, const ModelParams &params) {
  return basis.stiffness() + params.n_squared() * basis.centrifugal();
}

inline void check_size(const Eigen::VectorXd &coeffs, const SpectralBasis &basis) {
  if (coeffs.size() != basis.size()) {
    std::ostringstream msg;
    msg << "dimension mismatch: " << coeffs.size() << " coefficients for a basis of size "
        << basis.size();
    throw std::invalid_argument(msg.str());
  }
}

/// lambda (6 phi^5 - 4 a phi^3), the non-quadratic part of U'(phi).
inline Eigen::VectorXd nonlinear_force(const Eigen::VectorXd &phi, const ModelParams &params) {
  return params.lambda * phi.unaryExpr([a = params.a_pot](double v) {
    const double v2 = v * v;
    return v * v2 * (6.0 * v2 - 4.0 * a);
  });
}

/// F without its constant term, for a precomputed L = K + N^2 C.
inline double functional_core(const Eigen::VectorXd &coeffs, const Eigen::MatrixXd &l,
                              const SpectralBasis &basis, const ModelParams &params) {
  const Eigen::VectorXd phi = basis.values_at_nodes() * coeffs;
  const Eigen::VectorXd density = phi.unaryExpr([a = params.a_pot](double v) {
    const double v2 = v * v;
    return v2 * v2 * (v2 - a);
  });
  return 0.5 * coeffs.dot(l * coeffs) + params.lambda * basis.rho_weights().dot(density);
}

inline Eigen::VectorXd gradient(const Eigen::VectorXd &coeffs, const Eigen::MatrixXd &l,
                                const SpectralBasis &basis, const ModelParams &params) {
  const Eigen::VectorXd phi = basis.values_at_nodes() * coeffs;
  const Eigen::VectorXd force = nonlinear_force(phi, params);
  return l * coeffs +
         basis.values_at_nodes().transpose() * basis.rho_weights().cwiseProduct(force);
}

/// F(a + delta) - F(a) without subtracting two nearly equal totals:
/// x^6 - y^6 and x^4 - y^4 are expanded as (x - y) times their cofactor sums.
inline double functional_difference(const Eigen::VectorXd &coeffs, const Eigen::VectorXd &delta,
                                    const Eigen::MatrixXd &l, const SpectralBasis &basis,
                                    const ModelParams &params) {
  const Eigen::VectorXd phi0 = basis.values_at_nodes() * coeffs;
  const Eigen::VectorXd dphi = basis.values_at_nodes() * delta;
  double nonlinear = 0.0;
  for (Eigen::Index k = 0; k < phi0.size(); ++k) {
    const double y = phi0[k];
    const double x = y + dphi[k];
    const double x2 = x * x, y2 = y * y;
    const double quartic_cofactor = (x + y) * (x2 + y2);                  // (x^4 - y^4)/(x - y)
    const double sextic_cofactor = (x + y) * (x2 * x2 + x2 * y2 + y2 * y2); // (x^6 - y^6)/(x - y)
    nonlinear += basis.rho_weights()[k] * dphi[k] * (sextic_cofactor - params.a_pot * quartic_cofactor);
  }
  return 0.5 * delta.dot(l * (2.0 * coeffs + delta)) + params.lambda * nonlinear;
}

/// a_new - a for a_new = sqrt(Q0) (a + eta d) / |a + eta d|, evaluated so that
/// tiny steps keep full relative precision.
inline Eigen::VectorXd retraction_displacement(const Eigen::VectorXd &a, const Eigen::VectorXd &d,
                                               double eta, double q0) {
  const double aa = a.squaredNorm();
  const double norm_a = std::sqrt(aa);
  const double t = (2.0 * eta * a.dot(d) + eta * eta * d.squaredNorm()) / aa;
  const double root = std::sqrt(1.0 + t);
  const double kappa_m1 = (q0 - aa) / (norm_a * (std::sqrt(q0) + norm_a));
  const double scale = (1.0 + kappa_m1) / root;
  const double scale_m1 = (kappa_m1 - t / (1.0 + root)) / root;
  return scale_m1 * a + (scale * eta) * d;
}

inline Eigen::VectorXd project_coefficients(const SpectralBasis &basis,
                                            const Eigen::VectorXd &profile_at_nodes) {
  return 4.0 * std::numbers::pi * basis.values_at_nodes().transpose() *
         basis.rho_weights().cwiseProduct(profile_at_nodes);
}

struct RunResult {
  Eigen::VectorXd coeffs;
  int iterations = 0;
  bool converged = false;
  double tangent_grad_norm = 0.0;
  double grad_norm = 0.0;
};

/// Metric used by the preconditioned direction. Positive definite: L is, the
/// shift is positive and the sextic curvature term is non-negative.
inline Eigen::LLT<Eigen::MatrixXd> build_metric(const Eigen::VectorXd &coeffs, const Eigen::MatrixXd &l,
                                                const SpectralBasis &basis,
                                                const ModelParams &params) {
  const Eigen::VectorXd phi = basis.values_at_nodes() * coeffs;
  const Eigen::VectorXd curvature =
      basis.rho_weights().cwiseProduct(phi.unaryExpr([](double v) { return v * v * v * v; })) *
      (30.0 * params.lambda);
  Eigen::MatrixXd metric = l;
  metric.diagonal().array() += params.lambda * params.b / (4.0 * std::numbers::pi);
  metric.noalias() += basis.values_at_nodes().transpose() * curvature.asDiagonal() *
                      basis.values_at_nodes();
  return Eigen::LLT<Eigen::MatrixXd>(metric);
}

inline RunResult run_projected_gradient(Eigen::VectorXd a, const Eigen::MatrixXd &l,
                                        const SpectralBasis &basis, const ModelParams &params,
                                        const SolveConfig &config, int run_index) {
  constexpr double armijo_c = 1e-4;
  constexpr double backtrack = 0.5;
  constexpr int max_backtracks = 60;
  constexpr int metric_refresh = 20;

  const double q0 = config.q0;
  a *= std::sqrt(q0) / a.norm();

  RunResult out;
  Eigen::LLT<Eigen::MatrixXd> metric;
  Eigen::VectorXd prev_a, prev_gt;
  double eta = 1.0;

  int it = 0;
  for (; it < config.max_iter; ++it) {
    const Eigen::VectorXd g = gradient(a, l, basis, params);
    const Eigen::VectorXd unit = a / a.norm();
    const Eigen::VectorXd gt = g - g.dot(unit) * unit;
    out.tangent_grad_norm = gt.norm();
    out.grad_norm = g.norm();
    if (out.tangent_grad_norm < config.grad_tol * std::max(1.0, out.grad_norm)) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd d;
    double slope = 0.0;
    if (config.descent == Descent::preconditioned) {
      if (it % metric_refresh == 0) metric = build_metric(a, l, basis, params);
      const Eigen::VectorXd z = metric.solve(g);
      const Eigen::VectorXd y = metric.solve(a);
      d = -(z - (a.dot(z) / a.dot(y)) * y);
      d -= d.dot(unit) * unit;
      slope = g.dot(d);
      eta = 1.0;
    }
    if (config.descent == Descent::steepest || !(slope < 0.0)) {
      d = -gt;
      slope = -gt.squaredNorm();
      if (config.descent == Descent::steepest) {
        if (prev_a.size() == a.size()) {
          const Eigen::VectorXd s = a - prev_a;
          const Eigen::VectorXd yv = gt - prev_gt;
          const double sy = s.dot(yv);
          eta = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * eta;
        }
      } else {
        eta = 1.0;
      }
    }

    Eigen::VectorXd delta;
    double change = 0.0;
    bool accepted = false;
    // Trial points keep the current radius; the rounding-level gap to sqrt(Q0)
    // is closed after acceptance so it never enters the sufficient-decrease test.
    const double radius_sq = a.squaredNorm();
    for (int k = 0; k < max_backtracks; ++k) {
      delta = retraction_displacement(a, d, eta, radius_sq);
      change = functional_difference(a, delta, l, basis, params);
      if (change <= armijo_c * eta * slope) {
        accepted = true;
        break;
      }
      eta *= backtrack;
    }
    if (!accepted) break; // line search stalled; reported as not converged

    prev_a = a;
    prev_gt = gt;
    a += delta;
    a *= std::sqrt(q0) / a.norm();

    if (config.observer) {
      IterationInfo info;
      info.run = run_index;
      info.iteration = it;
      info.f_change = change;
      info.step = eta;
      info.constraint_drift = std::abs(a.squaredNorm() - q0) / q0;
      info.tangent_grad_norm = out.tangent_grad_norm;
      config.observer(info);
    }
  }
  out.iterations = it;
  out.coeffs = std::move(a);
  return out;
}

} // namespace detail

/// F(a) including the constant lambda b Q0 / (4 pi).
inline double discrete_functional(const Eigen::VectorXd &coeffs, const SpectralBasis &basis,
                                  const ModelParams &params, double q0) {
  detail::check_size(coeffs, basis);
  return detail::functional_core(coeffs, detail::quadratic_operator(basis, params), basis, params) +
         params.lambda * params.b * q0 / (4.0 * std::numbers::pi);
}

/// Euclidean gradient (K + N^2 C) a + lambda Psi^T [w rho (6 phi^5 - 4 a phi^3)].
inline Eigen::VectorXd functional_gradient(const Eigen::VectorXd &coeffs, const SpectralBasis &basis,
                                           const ModelParams &params) {
  detail::check_size(coeffs, basis);
  return detail::gradient(coeffs, detail::quadratic_operator(basis, params), basis, params);
}

/// F(a + delta) - F(a), accurate even when the change is far below F's rounding.
inline double functional_difference(const Eigen::VectorXd &coeffs, const Eigen::VectorXd &delta,
                                    const SpectralBasis &basis, const ModelParams &params) {
  detail::check_size(coeffs, basis);
  detail::check_size(delta, basis);
  return detail::functional_difference(coeffs, delta, detail::quadratic_operator(basis, params),
                                       basis, params);
}

/// w^2 = (4 pi / Q0) ( \int rho phi'^2 + N^2 \int phi^2/rho + \int rho phi U'(phi) ).
inline double recover_omega_sq(const Eigen::VectorXd &coeffs, const SpectralBasis &basis,
                               const ModelParams &params, double q0) {
  detail::check_size(coeffs, basis);
  if (!(q0 > 0.0)) throw std::invalid_argument("recover_omega_sq: q0 must be positive");
  if (std::abs(coeffs.squaredNorm() - q0) > 1e-6 * q0) {
    std::ostringstream msg;
    msg << "recover_omega_sq: |a|^2 = " << coeffs.squaredNorm() << " does not match Q0 = " << q0;
    throw std::invalid_argument(msg.str());
  }
  const Eigen::VectorXd phi = basis.values_at_nodes() * coeffs;
  const Eigen::VectorXd dphi = basis.derivatives_at_nodes() * coeffs;
  double kinetic = 0.0, centrifugal = 0.0, potential_part = 0.0;
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    kinetic += basis.rho_weights()[k] * dphi[k] * dphi[k];
    centrifugal += basis.inverse_rho_weights()[k] * phi[k] * phi[k];
    potential_part += basis.rho_weights()[k] * phi[k] * potential_derivative(phi[k], params);
  }
  return 4.0 * std::numbers::pi / q0 *
         (kinetic + params.n_squared() * centrifugal + potential_part);
}

struct ResidualBreakdown {
  double residual_error = 0.0; ///< (1/P) (\int r^2)^{1/2}
  double total_integral = 0.0; ///< \int r^2
  double first_panel_integral = 0.0;
};

/// Residual of the radial equation on the quadrature nodes,
/// r = phi'' + phi'/rho - N^2 phi/rho^2 + w^2 phi - U'(phi).
inline ResidualBreakdown residual_breakdown(const Eigen::VectorXd &coeffs, double omega_sq,
                                            const SpectralBasis &basis, const ModelParams &params) {
  detail::check_size(coeffs, basis);
  const Eigen::VectorXd phi = basis.values_at_nodes() * coeffs;
  const Eigen::VectorXd d1 = basis.derivatives_at_nodes() * coeffs;
  const Eigen::VectorXd d2 = basis.second_derivatives_at_nodes() * coeffs;
  const QuadratureGrid &grid = basis.grid();
  const auto first_panel = static_cast<Eigen::Index>(grid.order_per_panel);
  const double n2 = params.n_squared();

  ResidualBreakdown out;
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    const double rho = basis.nodes()[k];
    const double r = d2[k] + d1[k] / rho - n2 * phi[k] / (rho * rho) + omega_sq * phi[k] -
                     potential_derivative(phi[k], params);
    const double contribution = grid.weights[static_cast<std::size_t>(k)] * r * r;
    out.total_integral += contribution;
    if (k < first_panel) out.first_panel_integral += contribution;
  }
  out.residual_error = std::sqrt(out.total_integral) / basis.radius();
  return out;
}

inline double residual_error(const Eigen::VectorXd &coeffs, double omega_sq, const SpectralBasis &basis,
                             const ModelParams &params) {
  return residual_breakdown(coeffs, omega_sq, basis, params).residual_error;
}

/// Starting coefficients (not yet rescaled onto the sphere).
inline Eigen::VectorXd initial_coefficients(const SpectralBasis &basis, const ModelParams &params,
                                            const SolveConfig &config) {
  const double p = basis.radius();
  const Eigen::VectorXd &rho = basis.nodes();
  Eigen::VectorXd guess(rho.size());
  switch (config.initial_guess) {
  case InitialGuess::ring_bump: {
    const double centre = 0.25 * p;
    const double width = 0.25 * p;
    for (Eigen::Index k = 0; k < rho.size(); ++k) {
      const double x = (rho[k] - centre) / width;
      guess[k] = std::pow(rho[k] / p, std::abs(params.n)) * (p - rho[k]) * std::exp(-x * x);
    }
    break;
  }
  case InitialGuess::trapezoid: {
    if (!(p > 2.0)) throw std::invalid_argument("trapezoid initial guess needs P > 2");
    for (Eigen::Index k = 0; k < rho.size(); ++k)
      guess[k] = std::min({rho[k], 1.0, p - rho[k]});
    break;
  }
  case InitialGuess::custom:
    detail::check_size(config.custom_coeffs, basis);
    if (!(config.custom_coeffs.norm() > 0.0))
      throw std::invalid_argument("custom initial guess must be nonzero");
    return config.custom_coeffs;
  }
  return detail::project_coefficients(basis, guess);
}

/// Minimizes F on |a|^2 = Q0, then recovers w^2, RE and the sampled amplitude.
inline VortexSolution minimize_on_sphere(const SpectralBasis &basis, const ModelParams &params,
                                         const SolveConfig &config) {
  config.validate();
  if (config.initial_guess == InitialGuess::custom) detail::check_size(config.custom_coeffs, basis);
  const Eigen::MatrixXd l = detail::quadratic_operator(basis, params);

  detail::RunResult best =
      detail::run_projected_gradient(initial_coefficients(basis, params, config), l, basis, params, config, 0);
  int total_iterations = best.iterations;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 1; r <= config.restarts; ++r) {
    Eigen::VectorXd noise(best.coeffs.size());
    for (Eigen::Index k = 0; k < noise.size(); ++k) noise[k] = normal(rng);
    const Eigen::VectorXd start = best.coeffs + 0.01 * best.coeffs.norm() / noise.norm() * noise;
    detail::RunResult trial = detail::run_projected_gradient(start, l, basis, params, config, r);
    total_iterations += trial.iterations;
    const Eigen::VectorXd delta = trial.coeffs - best.coeffs;
    if (detail::functional_difference(best.coeffs, delta, l, basis, params) < 0.0 &&
        (trial.converged || !best.converged)) {
      best = std::move(trial);
    }
  }

  VortexSolution sol;
  sol.q0 = config.q0;
  sol.n = params.n;
  sol.coeffs = std::move(best.coeffs);
  sol.iterations = total_iterations;
  sol.converged = best.converged;
  sol.tangent_grad_norm = best.tangent_grad_norm;
  sol.grad_norm = best.grad_norm;

  // Fix the sign so the largest excursion is positive.
  ProfileSamples profile = basis.sample(sol.coeffs, kProfilePoints);
  std::size_t peak = profile.argmax_abs();
  if (profile.phi[peak] < 0.0) {
    sol.coeffs = -sol.coeffs;
    for (double &v : profile.phi) v = -v;
  }
  sol.phi_max = std::abs(profile.phi[peak]);
  sol.peak_radius = profile.rho[peak];

  sol.f_value = discrete_functional(sol.coeffs, basis, params, config.q0);
  sol.omega_sq = recover_omega_sq(sol.coeffs, basis, params, config.q0);
  const ResidualBreakdown res = residual_breakdown(sol.coeffs, sol.omega_sq, basis, params);
  sol.residual_error = res.residual_error;
  sol.residual_first_panel = res.first_panel_integral;
  return sol;
}

} // namespace qvortex
