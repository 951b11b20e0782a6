#pragma once

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qvortex {

/// Raised when an integrand returns a non-finite value at a quadrature node.
class NonFiniteIntegrand : public std::runtime_error {
public:
  NonFiniteIntegrand(std::size_t index, double rho, double value)
      : std::runtime_error(describe(index, rho, value)), index_(index), rho_(rho) {}

  [[nodiscard]] std::size_t node_index() const { return index_; }
  [[nodiscard]] double node() const { return rho_; }

private:
  static std::string describe(std::size_t index, double rho, double value) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "non-finite integrand value " << value << " at node " << index << " (rho = " << rho
        << ")";
    return msg.str();
  }

  std::size_t index_;
  double rho_;
};

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  std::vector<double> x(order), w(order);
  // Returns (P_order(z), P'_order(z)) via the three-term recurrence.
  auto legendre = [order](double z) {
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= order; ++k) {
      const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    return std::pair{p1, order * (z * p1 - p0) / (z * z - 1.0)};
  };
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, dpn] = legendre(z);
      const double dz = pn / dpn;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double dpn = legendre(z).second;
    const double weight = 2.0 / ((1.0 - z * z) * dpn * dpn);
    x[i] = -z;
    x[order - 1 - i] = z;
    w[i] = weight;
    w[order - 1 - i] = weight;
  }
  if (order % 2 == 1) x[order / 2] = 0.0;
  return {std::move(x), std::move(w)};
}

/// Composite Gauss-Legendre rule over uniform panels of [0, P].
/// No node touches 0 or P, so integrands carrying 1/rho factors stay finite.
struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
  int panels = 0;
  int order_per_panel = 0;
  double p = 0.0;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }

  [[nodiscard]] std::string signature() const {
    std::ostringstream s;
    s.precision(17);
    s << "gauss-legendre;p=" << p << ";panels=" << panels << ";order=" << order_per_panel;
    return s.str();
  }
};

inline QuadratureGrid build_grid(double p, int panels, int order_per_panel) {
  if (!(std::isfinite(p) && p > 0.0)) throw std::invalid_argument("build_grid: p must be positive");
  if (panels < 1) throw std::invalid_argument("build_grid: panels must be >= 1");
  if (order_per_panel < 2) throw std::invalid_argument("build_grid: order_per_panel must be >= 2");

  const auto [x, w] = gauss_legendre(order_per_panel);
  QuadratureGrid grid;
  grid.p = p;
  grid.panels = panels;
  grid.order_per_panel = order_per_panel;
  grid.nodes.reserve(static_cast<std::size_t>(panels) * order_per_panel);
  grid.weights.reserve(grid.nodes.capacity());

  const double h = p / panels;
  for (int k = 0; k < panels; ++k) {
    const double left = k * h;
    for (int i = 0; i < order_per_panel; ++i) {
      grid.nodes.push_back(left + 0.5 * h * (x[i] + 1.0));
      grid.weights.push_back(0.5 * h * w[i]);
    }
  }
  return grid;
}

/// Sum_k w_k f(rho_k). Throws NonFiniteIntegrand on the first bad node.
template <class Integrand>
double integrate(const QuadratureGrid &grid, Integrand &&integrand) {
  double sum = 0.0;
  for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
    const double rho = grid.nodes[k];
    const double value = integrand(rho);
    if (!std::isfinite(value)) throw NonFiniteIntegrand(k, rho, value);
    sum += grid.weights[k] * value;
  }
  return sum;
}

} // namespace qvortex
