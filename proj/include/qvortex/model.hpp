#pragma once

/**
 * @brief Sextic Q-vortex model: parameters, potential, and the closed-form
 * bounds that every admissible solution must respect.
 *
 * The radial profile phi(rho) of a spinning vortex Phi = phi(rho) e^{i w t + i N theta}
 * obeys
 *
 *   phi'' + phi'/rho - N^2 phi / rho^2 - U'(phi) + w^2 phi = 0,  phi(0) = phi(P) = 0,
 *
 * with U(phi) = lambda (phi^6 - a phi^4 + b phi^2).
 */

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qvortex {

/// Physical constants of the sextic model on the disk of radius p.
///
/// Plain aggregate; call validate() (or use make()) before handing a
/// parameter set to anything that relies on the standing assumptions.
struct ModelParams {
  double lambda = 1.0;
  double a_pot = 2.0;
  double b = 1.1;
  int n = 1;
  double p = 20.0;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const {
    auto fail = [](const std::string &what) {
      throw std::invalid_argument("invalid model parameters: " + what);
    };
    if (!(std::isfinite(lambda) && lambda > 0.0)) fail("lambda > 0 violated");
    if (!(std::isfinite(a_pot) && a_pot > 0.0)) fail("a_pot > 0 violated");
    if (!(std::isfinite(b) && b > 0.0)) fail("b > 0 violated");
    if (!(b > 0.25 * a_pot * a_pot)) fail("b > a^2/4 violated");
    if (n == 0) fail("|N| >= 1 violated");
    if (!(std::isfinite(p) && p > 0.0)) fail("p > 0 violated");
  }

  static ModelParams make(double lambda, double a_pot, double b, int n, double p) {
    ModelParams params{lambda, a_pot, b, n, p};
    params.validate();
    return params;
  }

  [[nodiscard]] ModelParams with_n(int winding) const {
    ModelParams copy = *this;
    copy.n = winding;
    return copy;
  }

  [[nodiscard]] double n_squared() const { return static_cast<double>(n) * n; }
};

/// Closed-form quantities derived from ModelParams.
struct TheoryBounds {
  double omega_sq_min = 0.0;       ///< 2 lambda (b - a^2/4): lower edge of the existence window
  double omega_sq_max = 0.0;       ///< 2 lambda b: upper edge of the existence window
  double omega_sq_necessary = 0.0; ///< 2 lambda (b - a^2/3) + N^2/P^2: any nontrivial solution lies above
  double phi_max_ceiling = 0.0;    ///< sqrt(2a/3): amplitude ceiling when w^2 < 2 lambda b + N^2/P^2
  double q0_threshold = 0.0;       ///< pi |N| / (a lambda): prescribed norm needed for w^2 < 2 lambda b
  double p_star = 0.0;             ///< domain radius beyond which a negative-action test function exists
  double p_star_omega_sq = 0.0;    ///< frequency at which p_star was evaluated
};

inline double potential(double phi, const ModelParams &params) {
  const double phi2 = phi * phi;
  return params.lambda * phi2 * (phi2 * phi2 - params.a_pot * phi2 + params.b);
}

inline double potential_derivative(double phi, const ModelParams &params) {
  const double phi2 = phi * phi;
  return params.lambda * phi * (6.0 * phi2 * phi2 - 4.0 * params.a_pot * phi2 + 2.0 * params.b);
}

/// Coefficients of the trapezoidal test-function estimate
///   I(phi_0) <= -A P^2 + B P + C ln P
/// with plateau height t, t^2 = a/2.
struct PStarCoefficients {
  double a_quad = 0.0;
  double b_lin = 0.0;
  double c_log = 0.0;
};

inline PStarCoefficients p_star_coefficients(const ModelParams &params, double omega_sq) {
  const double lambda = params.lambda;
  const double a = params.a_pot;
  const double t2 = 0.5 * a;
  const double t4 = t2 * t2;
  const double t6 = t4 * t2;
  const double shifted_b = params.b - omega_sq / (2.0 * lambda);
  const double bracket = t6 - a * t4 + shifted_b * t2;

  PStarCoefficients c;
  c.a_quad = -0.5 * lambda * bracket;
  c.b_lin = 0.5 * t2 + lambda * bracket +
            lambda * (a * t4 / 5.0 - t6 / 7.0 - shifted_b * t2 / 3.0);
  c.c_log = 0.5 * params.n_squared() * t2;
  return c;
}

/// Sufficient domain radius (B + C)/A, with ln P bounded by P.
/// Requires omega_sq above the window floor 2 lambda (b - a^2/4) so that A > 0.
inline double p_star(const ModelParams &params, double omega_sq) {
  const PStarCoefficients c = p_star_coefficients(params, omega_sq);
  if (!(c.a_quad > 0.0)) {
    std::ostringstream msg;
    msg << "p_star undefined: omega^2 = " << omega_sq
        << " is not above 2 lambda (b - a^2/4)";
    throw std::domain_error(msg.str());
  }
  return (c.b_lin + c.c_log) / c.a_quad;
}

/// All closed-form bounds. p_star is evaluated at `p_star_omega_sq` when
/// given, otherwise at the midpoint of the existence window.
inline TheoryBounds theory_bounds(const ModelParams &params,
                                  std::optional<double> p_star_omega_sq = std::nullopt) {
  params.validate();
  const double lambda = params.lambda;
  const double a = params.a_pot;
  const double n2 = params.n_squared();

  TheoryBounds t;
  t.omega_sq_min = 2.0 * lambda * (params.b - 0.25 * a * a);
  t.omega_sq_max = 2.0 * lambda * params.b;
  t.omega_sq_necessary = 2.0 * lambda * (params.b - a * a / 3.0) + n2 / (params.p * params.p);
  t.phi_max_ceiling = std::sqrt(2.0 * a / 3.0);
  t.q0_threshold = std::numbers::pi * std::abs(params.n) / (a * lambda);
  t.p_star_omega_sq = p_star_omega_sq.value_or(0.5 * (t.omega_sq_min + t.omega_sq_max));
  t.p_star = p_star(params, t.p_star_omega_sq);
  return t;
}

/// Boundary decay rate sigma = sqrt(N^2/P^2 + 2 lambda b - w^2).
inline double decay_rate(double omega_sq, const ModelParams &params) {
  const double radicand =
      params.n_squared() / (params.p * params.p) + 2.0 * params.lambda * params.b - omega_sq;
  if (!(radicand > 0.0)) {
    std::ostringstream msg;
    msg << "decay estimate inapplicable: N^2/P^2 + 2 lambda b - omega^2 = " << radicand
        << " is not positive";
    throw std::domain_error(msg.str());
  }
  return std::sqrt(radicand);
}

/// Upper edge of the frequency range on which the amplitude ceiling and the
/// decay estimate hold: 2 lambda b + N^2/P^2.
inline double omega_sq_bound_applicability(const ModelParams &params) {
  return 2.0 * params.lambda * params.b + params.n_squared() / (params.p * params.p);
}

} // namespace qvortex
