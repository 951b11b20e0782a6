#pragma once

// Independent checks for the spectral solver: a second-order finite-difference
// discretization of the same constrained problem, and Bessel zeros for the
// small-norm (linear) limit.

#include "qvortex/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qvortex {

struct FdSolution {
  std::vector<double> grid_points; ///< uniform, n_fd + 1 points, both endpoints included
  std::vector<double> phi_values;  ///< zero at both endpoints
  double q0 = 0.0;
  double omega_sq = 0.0;
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] std::size_t peak_index() const {
    return static_cast<std::size_t>(
        std::max_element(phi_values.begin(), phi_values.end(),
                         [](double x, double y) { return std::abs(x) < std::abs(y); }) -
        phi_values.begin());
  }
  [[nodiscard]] double phi_max() const { return std::abs(phi_values[peak_index()]); }
  [[nodiscard]] double peak_radius() const { return grid_points[peak_index()]; }
};

struct FdOptions {
  double time_step = 5.0;
  double tol = 1e-10;       ///< stop when max |phi_new - phi| < tol * max |phi|
  int max_iter = 200000;
};

namespace detail {

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
/// `diag` and `rhs` are overwritten; `off` holds the n-1 off-diagonal entries.
inline void solve_tridiagonal(std::vector<double> &diag, const std::vector<double> &off,
                              std::vector<double> &rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double factor = off[i - 1] / diag[i - 1];
    diag[i] -= factor * off[i - 1];
    rhs[i] -= factor * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - off[i] * rhs[i + 1]) / diag[i];
}

} // namespace detail

/// Minimizes the trapezoid-discretized action
///   I_h = 1/2 sum_{i+1/2} rho_{i+1/2} (phi_{i+1} - phi_i)^2 / h
///       + sum_i h [ N^2 phi_i^2 / (2 rho_i) + lambda rho_i (phi_i^6 - a phi_i^4 + b phi_i^2) ]
/// subject to 4 pi sum_i h rho_i phi_i^2 = Q0.
///
/// Each step is a backward-Euler normalized gradient flow: one SPD tridiagonal
/// solve with the U'(phi)/phi coefficient lagged, then a rescale onto the
/// constraint. Fixed points satisfy the discrete Euler-Lagrange equation exactly.
inline FdSolution fd_minimize(const ModelParams &params, double q0, int n_fd, const FdOptions &opt = {}) {
  params.validate();
  if (!(q0 > 0.0)) throw std::invalid_argument("fd_minimize: q0 must be positive");
  if (n_fd < 100) throw std::invalid_argument("fd_minimize: n_fd must be >= 100");

  const double p = params.p;
  const double h = p / n_fd;
  const double n2 = params.n_squared();
  const auto interior = static_cast<std::size_t>(n_fd - 1);
  const double four_pi = 4.0 * std::numbers::pi;

  std::vector<double> rho(interior), mass(interior), stiff_diag(interior), stiff_off(interior - 1);
  for (std::size_t i = 0; i < interior; ++i) {
    rho[i] = h * static_cast<double>(i + 1);
    mass[i] = h * rho[i];
    const double left = rho[i] - 0.5 * h;
    const double right = rho[i] + 0.5 * h;
    stiff_diag[i] = (left + right) / h + n2 * h / rho[i];
    if (i + 1 < interior) stiff_off[i] = -right / h;
  }

  auto normalize = [&](std::vector<double> &phi) {
    double norm = 0.0;
    for (std::size_t i = 0; i < interior; ++i) norm += mass[i] * phi[i] * phi[i];
    const double scale = std::sqrt(q0 / (four_pi * norm));
    for (double &v : phi) v *= scale;
  };

  std::vector<double> phi(interior);
  for (std::size_t i = 0; i < interior; ++i) {
    const double x = (rho[i] - 0.25 * p) / (0.25 * p);
    phi[i] = std::pow(rho[i] / p, std::abs(params.n)) * (p - rho[i]) * std::exp(-x * x);
  }
  normalize(phi);

  FdSolution out;
  out.q0 = q0;
  const double tau = opt.time_step;
  std::vector<double> diag(interior), rhs(interior), coeff(interior);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    double shift = 0.0;
    for (std::size_t i = 0; i < interior; ++i) {
      const double u = phi[i] * phi[i];
      coeff[i] = params.lambda * (6.0 * u * u - 4.0 * params.a_pot * u + 2.0 * params.b);
      shift = std::max(shift, -coeff[i]);
    }
    for (std::size_t i = 0; i < interior; ++i) {
      diag[i] = (1.0 + tau * shift) * mass[i] + tau * (stiff_diag[i] + mass[i] * coeff[i]);
      rhs[i] = (1.0 + tau * shift) * mass[i] * phi[i];
    }
    std::vector<double> off(stiff_off);
    for (double &v : off) v *= tau;
    detail::solve_tridiagonal(diag, off, rhs);
    normalize(rhs);

    double change = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < interior; ++i) {
      change = std::max(change, std::abs(rhs[i] - phi[i]));
      peak = std::max(peak, std::abs(rhs[i]));
    }
    phi.swap(rhs);
    if (change < opt.tol * peak) {
      out.converged = true;
      break;
    }
  }
  out.iterations = it;

  // Discrete Rayleigh identity: w^2 = (4 pi / Q0) (phi^T A phi + sum h rho phi U'(phi)).
  double quadratic = 0.0, potential_part = 0.0;
  for (std::size_t i = 0; i < interior; ++i) {
    double a_phi = stiff_diag[i] * phi[i];
    if (i > 0) a_phi += stiff_off[i - 1] * phi[i - 1];
    if (i + 1 < interior) a_phi += stiff_off[i] * phi[i + 1];
    quadratic += phi[i] * a_phi;
    potential_part += mass[i] * phi[i] * potential_derivative(phi[i], params);
  }
  out.omega_sq = four_pi / q0 * (quadratic + potential_part);

  if (!phi.empty()) {
    const double sign = *std::max_element(phi.begin(), phi.end(), [](double x, double y) {
      return std::abs(x) < std::abs(y);
    }) < 0.0 ? -1.0 : 1.0;
    for (double &v : phi) v *= sign;
  }
  out.grid_points.resize(interior + 2);
  out.phi_values.assign(interior + 2, 0.0);
  for (std::size_t i = 0; i <= interior + 1; ++i) out.grid_points[i] = h * static_cast<double>(i);
  out.grid_points.back() = p;
  std::copy(phi.begin(), phi.end(), out.phi_values.begin() + 1);
  return out;
}

/// J_order(x) from its ascending series.
inline double bessel_j_series(int order, double x) {
  if (order < 0) throw std::invalid_argument("bessel_j_series: order must be >= 0");
  const double half = 0.5 * x;
  double term = 1.0;
  for (int k = 1; k <= order; ++k) term *= half / k;
  double sum = term;
  const double q = half * half;
  for (int k = 0; k < 500; ++k) {
    term *= -q / ((k + 1.0) * (k + 1.0 + order));
    sum += term;
    if (k > half && std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

/// First positive zero of J_order, order in [0, 10], by bracketing and bisection.
inline double bessel_first_zero(int order) {
  if (order < 0 || order > 10) throw std::invalid_argument("bessel_first_zero: order must be in [0, 10]");
  // J_order > 0 on (0, j_{order,1}) and j_{order,1} > order.
  constexpr double step = 0.05;
  double lo = order > 0 ? static_cast<double>(order) : step;
  double hi = lo + step;
  while (bessel_j_series(order, hi) > 0.0) {
    lo = hi;
    hi += step;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (bessel_j_series(order, mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Small-norm limit of the frequency: 2 lambda b + (j_{|N|,1} / P)^2.
inline double linear_limit_omega_sq(const ModelParams &params) {
  const double j = bessel_first_zero(std::abs(params.n));
  return 2.0 * params.lambda * params.b + (j / params.p) * (j / params.p);
}

} // namespace qvortex
