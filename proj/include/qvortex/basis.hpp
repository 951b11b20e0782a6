#pragma once

/**
 * @brief Orthonormal Dirichlet sine basis on (0, P) for the weighted product
 *
 *   (u, v) = 4 pi \int_0^P rho u(rho) v(rho) d rho,
 *
 * built by modified Gram-Schmidt from s_k(rho) = sin(k pi rho / P). Each basis
 * function is stored through its row of the lower-triangular matrix G,
 * psi_j = sum_{k<=j} G_jk s_k, so first and second derivatives are analytic.
 *
 * Under this product the reduced norm 4 pi \int rho phi^2 of phi = sum a_j psi_j
 * is simply |a|^2.
 */

#include "qvortex/model.hpp"
#include "qvortex/quadrature.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace qvortex {

class BasisConstructionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Profile sampled on a uniform grid of [0, P], endpoints included.
struct ProfileSamples {
  std::vector<double> rho, phi, phi_rho, phi_rhorho;

  [[nodiscard]] std::size_t size() const { return rho.size(); }
  [[nodiscard]] std::size_t argmax_abs() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < phi.size(); ++i)
      if (std::abs(phi[i]) > std::abs(phi[best])) best = i;
    return best;
  }
};

class SpectralBasis {
public:
  [[nodiscard]] int size() const { return static_cast<int>(gs_.rows()); }
  [[nodiscard]] double radius() const { return p_; }
  [[nodiscard]] const QuadratureGrid &grid() const { return grid_; }

  /// Row j holds the raw-sine coefficients of psi_{j+1}; lower triangular.
  [[nodiscard]] const Eigen::MatrixXd &gs_matrix() const { return gs_; }
  /// K_ij = \int rho psi_i' psi_j'.
  [[nodiscard]] const Eigen::MatrixXd &stiffness() const { return k_; }
  /// C_ij = \int psi_i psi_j / rho.
  [[nodiscard]] const Eigen::MatrixXd &centrifugal() const { return c_; }

  /// psi_j at the quadrature nodes (nodes x m), and its first/second derivatives.
  [[nodiscard]] const Eigen::MatrixXd &values_at_nodes() const { return psi_; }
  [[nodiscard]] const Eigen::MatrixXd &derivatives_at_nodes() const { return dpsi_; }
  [[nodiscard]] const Eigen::MatrixXd &second_derivatives_at_nodes() const { return ddpsi_; }

  /// Quadrature weights times rho, and weights over rho, aligned with the nodes.
  [[nodiscard]] const Eigen::VectorXd &rho_weights() const { return w_rho_; }
  [[nodiscard]] const Eigen::VectorXd &inverse_rho_weights() const { return w_inv_rho_; }
  [[nodiscard]] const Eigen::VectorXd &nodes() const { return nodes_; }

  /// phi(rho) = sum_j coeffs_j psi_j(rho), rho in [0, P].
  [[nodiscard]] double evaluate(const Eigen::VectorXd &coeffs, double rho) const {
    check_coeffs(coeffs);
    if (!(rho >= 0.0 && rho <= p_)) throw std::out_of_range(out_of_range_message(rho, "[0, P]"));
    if (rho == 0.0 || rho == p_) return 0.0;
    const Eigen::VectorXd sine_coeffs = gs_.transpose() * coeffs;
    double sum = 0.0;
    for (int k = 0; k < sine_coeffs.size(); ++k) sum += sine_coeffs[k] * std::sin(wavenumber(k) * rho);
    return sum;
  }

  /// (phi', phi'') at rho in the open interval (0, P).
  [[nodiscard]] std::pair<double, double> evaluate_derivatives(const Eigen::VectorXd &coeffs,
                                                               double rho) const {
    check_coeffs(coeffs);
    if (!(rho > 0.0 && rho < p_)) throw std::out_of_range(out_of_range_message(rho, "(0, P)"));
    const auto [value, d1, d2] = evaluate_all(coeffs, rho);
    (void)value;
    return {d1, d2};
  }

  /// (phi, phi', phi'') anywhere on the closed interval, no range check.
  [[nodiscard]] std::tuple<double, double, double> evaluate_all(const Eigen::VectorXd &coeffs,
                                                                double rho) const {
    const Eigen::VectorXd sine_coeffs = gs_.transpose() * coeffs;
    double v = 0.0, d1 = 0.0, d2 = 0.0;
    for (int k = 0; k < sine_coeffs.size(); ++k) {
      const double kk = wavenumber(k);
      const double s = std::sin(kk * rho);
      const double c = std::cos(kk * rho);
      v += sine_coeffs[k] * s;
      d1 += sine_coeffs[k] * kk * c;
      d2 -= sine_coeffs[k] * kk * kk * s;
    }
    return {v, d1, d2};
  }

  /// phi, phi', phi'' at `points` uniform radii on [0, P]; phi is exactly 0 at both ends.
  [[nodiscard]] ProfileSamples sample(const Eigen::VectorXd &coeffs, int points) const {
    check_coeffs(coeffs);
    if (points < 2) throw std::invalid_argument("sample: need at least 2 points");
    const Eigen::VectorXd sine_coeffs = gs_.transpose() * coeffs;
    ProfileSamples out;
    out.rho.resize(points);
    out.phi.resize(points);
    out.phi_rho.resize(points);
    out.phi_rhorho.resize(points);
    for (int i = 0; i < points; ++i) {
      const double rho = (i == points - 1) ? p_ : p_ * i / (points - 1);
      double v = 0.0, d1 = 0.0, d2 = 0.0;
      for (int k = 0; k < sine_coeffs.size(); ++k) {
        const double kk = wavenumber(k);
        const double sv = std::sin(kk * rho);
        v += sine_coeffs[k] * sv;
        d1 += sine_coeffs[k] * kk * std::cos(kk * rho);
        d2 -= sine_coeffs[k] * kk * kk * sv;
      }
      out.rho[i] = rho;
      out.phi[i] = (i == 0 || i == points - 1) ? 0.0 : v;
      out.phi_rho[i] = d1;
      out.phi_rhorho[i] = d2;
    }
    return out;
  }

  /// Gram matrix of the basis under the weighted product, by quadrature.
  [[nodiscard]] Eigen::MatrixXd gram() const {
    return 4.0 * std::numbers::pi * psi_.transpose() * w_rho_.asDiagonal() * psi_;
  }

  /// max_ij |(psi_i, psi_j) - delta_ij|.
  [[nodiscard]] double orthonormality_residual() const {
    const Eigen::MatrixXd g = gram();
    return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  }

  /// Reduced norm 4 pi \int rho phi^2 by quadrature.
  [[nodiscard]] double reduced_norm(const Eigen::VectorXd &coeffs) const {
    const Eigen::VectorXd phi = psi_ * coeffs;
    return 4.0 * std::numbers::pi * w_rho_.dot(phi.cwiseProduct(phi));
  }

  /// Assembles the node tables and K, C from a Gram-Schmidt matrix.
  static SpectralBasis from_gs_matrix(Eigen::MatrixXd gs, const QuadratureGrid &grid) {
    SpectralBasis basis;
    basis.p_ = grid.p;
    basis.grid_ = grid;
    basis.gs_ = std::move(gs);
    basis.build_tables();
    return basis;
  }

private:
  friend SpectralBasis build_basis(double p, int m, const QuadratureGrid &grid);

  [[nodiscard]] double wavenumber(int k) const { return (k + 1) * std::numbers::pi / p_; }

  void check_coeffs(const Eigen::VectorXd &coeffs) const {
    if (coeffs.size() != gs_.rows()) {
      std::ostringstream msg;
      msg << "coefficient vector has length " << coeffs.size() << ", basis size is " << gs_.rows();
      throw std::invalid_argument(msg.str());
    }
  }

  [[nodiscard]] std::string out_of_range_message(double rho, const char *interval) const {
    std::ostringstream msg;
    msg << "rho = " << rho << " outside " << interval << " with P = " << p_;
    return msg.str();
  }

  /// Raw sines and derivatives at the nodes (nodes x m).
  void raw_tables(Eigen::MatrixXd &s, Eigen::MatrixXd &ds, Eigen::MatrixXd &dds) const {
    const int m = static_cast<int>(gs_.rows());
    const auto n_nodes = static_cast<Eigen::Index>(grid_.size());
    s.resize(n_nodes, m);
    ds.resize(n_nodes, m);
    dds.resize(n_nodes, m);
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
      const double rho = grid_.nodes[static_cast<std::size_t>(i)];
      for (int k = 0; k < m; ++k) {
        const double kk = wavenumber(k);
        const double sv = std::sin(kk * rho);
        s(i, k) = sv;
        ds(i, k) = kk * std::cos(kk * rho);
        dds(i, k) = -kk * kk * sv;
      }
    }
  }

  void build_weights() {
    const auto n_nodes = static_cast<Eigen::Index>(grid_.size());
    nodes_.resize(n_nodes);
    w_rho_.resize(n_nodes);
    w_inv_rho_.resize(n_nodes);
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
      const double rho = grid_.nodes[static_cast<std::size_t>(i)];
      const double w = grid_.weights[static_cast<std::size_t>(i)];
      nodes_[i] = rho;
      w_rho_[i] = w * rho;
      w_inv_rho_[i] = w / rho;
    }
  }

  void build_tables() {
    build_weights();
    Eigen::MatrixXd s, ds, dds;
    raw_tables(s, ds, dds);
    psi_ = s * gs_.transpose();
    dpsi_ = ds * gs_.transpose();
    ddpsi_ = dds * gs_.transpose();
    k_ = dpsi_.transpose() * w_rho_.asDiagonal() * dpsi_;
    c_ = psi_.transpose() * w_inv_rho_.asDiagonal() * psi_;
    // Symmetrize away rounding in the triple products.
    k_ = 0.5 * (k_ + k_.transpose()).eval();
    c_ = 0.5 * (c_ + c_.transpose()).eval();
  }

  double p_ = 0.0;
  QuadratureGrid grid_;
  Eigen::MatrixXd gs_, k_, c_;
  Eigen::MatrixXd psi_, dpsi_, ddpsi_;
  Eigen::VectorXd nodes_, w_rho_, w_inv_rho_;
};

namespace detail {

/// One modified Gram-Schmidt sweep over the columns of `values` (node samples)
/// under the rho-weighted product, mirrored on the rows of `gs`.
inline void mgs_sweep(Eigen::MatrixXd &values, Eigen::MatrixXd &gs, const Eigen::VectorXd &w_rho,
                      double pivot_floor) {
  const double four_pi = 4.0 * std::numbers::pi;
  const Eigen::Index m = values.cols();
  for (Eigen::Index j = 0; j < m; ++j) {
    const double initial = std::sqrt(four_pi * w_rho.dot(values.col(j).cwiseAbs2()));
    for (Eigen::Index i = 0; i < j; ++i) {
      const double c = four_pi * w_rho.dot(values.col(i).cwiseProduct(values.col(j)));
      values.col(j) -= c * values.col(i);
      gs.row(j) -= c * gs.row(i);
    }
    const double norm = std::sqrt(four_pi * w_rho.dot(values.col(j).cwiseAbs2()));
    if (!(norm > pivot_floor * initial)) {
      std::ostringstream msg;
      msg << "Gram-Schmidt pivot " << (initial > 0.0 ? norm / initial : 0.0) << " below "
          << pivot_floor << " at basis function " << (j + 1)
          << ": quadrature grid too coarse to keep the sines independent";
      throw BasisConstructionError(msg.str());
    }
    values.col(j) /= norm;
    gs.row(j) /= norm;
  }
}

} // namespace detail

inline SpectralBasis build_basis(double p, int m, const QuadratureGrid &grid) {
  if (m < 1) throw std::invalid_argument("build_basis: m must be >= 1");
  if (grid.p != p) {
    std::ostringstream msg;
    msg << "build_basis: grid spans (0, " << grid.p << ") but P = " << p;
    throw std::invalid_argument(msg.str());
  }

  SpectralBasis basis;
  basis.p_ = p;
  basis.grid_ = grid;
  basis.gs_ = Eigen::MatrixXd::Identity(m, m);
  basis.build_weights();

  Eigen::MatrixXd s, ds, dds;
  basis.raw_tables(s, ds, dds);

  constexpr double pivot_floor = 1e-12;
  Eigen::MatrixXd values = s;
  detail::mgs_sweep(values, basis.gs_, basis.w_rho_, pivot_floor);

  basis.psi_ = values;
  if (basis.orthonormality_residual() > 1e-10) {
    detail::mgs_sweep(values, basis.gs_, basis.w_rho_, pivot_floor);
  }
  // The sweeps only combine earlier rows into later ones, so G stays lower
  // triangular; clear rounding noise above the diagonal anyway.
  basis.gs_ = basis.gs_.triangularView<Eigen::Lower>();
  basis.build_tables();
  return basis;
}

inline SpectralBasis build_basis(const ModelParams &params, int m, const QuadratureGrid &grid) {
  return build_basis(params.p, m, grid);
}

// ---------------------------------------------------------------------------
// Basis cache: JSON with row-major matrices, keyed by (P, m, grid signature).

inline constexpr int kBasisCacheVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd &mat) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < mat.rows(); ++i)
    for (Eigen::Index j = 0; j < mat.cols(); ++j) data.push_back(mat(i, j));
  return data;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json &data, int rows, int cols) {
  if (!data.is_array() || data.size() != static_cast<std::size_t>(rows) * cols)
    throw std::runtime_error("basis cache: matrix has wrong shape");
  Eigen::MatrixXd mat(rows, cols);
  std::size_t idx = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) mat(i, j) = data[idx++].get<double>();
  return mat;
}

} // namespace detail

inline nlohmann::json basis_cache_json(const SpectralBasis &basis) {
  nlohmann::json doc;
  doc["format"] = "qvortex-basis-cache";
  doc["version"] = kBasisCacheVersion;
  doc["p"] = basis.radius();
  doc["m"] = basis.size();
  doc["grid"] = {{"panels", basis.grid().panels},
                 {"order_per_panel", basis.grid().order_per_panel},
                 {"signature", basis.grid().signature()}};
  doc["layout"] = "row-major";
  doc["gs_matrix"] = detail::matrix_to_json(basis.gs_matrix());
  doc["k_matrix"] = detail::matrix_to_json(basis.stiffness());
  doc["c_matrix"] = detail::matrix_to_json(basis.centrifugal());
  return doc;
}

inline void save_basis_cache(const std::string &path, const SpectralBasis &basis) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("basis cache: cannot write " + path);
  out << basis_cache_json(basis).dump(1) << '\n';
}

/// Restores a basis from `doc` if its key matches (p, m, grid); K and C are
/// taken from the cache, node tables are rebuilt from G.
inline std::optional<SpectralBasis> basis_from_cache_json(const nlohmann::json &doc, double p, int m,
                                                          const QuadratureGrid &grid) {
  if (doc.value("format", "") != "qvortex-basis-cache") return std::nullopt;
  if (doc.value("version", -1) != kBasisCacheVersion) return std::nullopt;
  if (doc.value("p", -1.0) != p || doc.value("m", -1) != m) return std::nullopt;
  if (!doc.contains("grid") || doc["grid"].value("signature", "") != grid.signature())
    return std::nullopt;

  SpectralBasis basis = SpectralBasis::from_gs_matrix(detail::matrix_from_json(doc["gs_matrix"], m, m), grid);
  const Eigen::MatrixXd k = detail::matrix_from_json(doc["k_matrix"], m, m);
  const Eigen::MatrixXd c = detail::matrix_from_json(doc["c_matrix"], m, m);
  if ((k - basis.stiffness()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + k.cwiseAbs().maxCoeff()) ||
      (c - basis.centrifugal()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + c.cwiseAbs().maxCoeff()))
    throw std::runtime_error("basis cache: stored K/C inconsistent with stored G");
  return basis;
}

/// Loads the cache at `path` when it exists and matches; otherwise builds the
/// basis and (re)writes the cache.
inline SpectralBasis load_or_build_basis(const std::string &path, double p, int m,
                                         const QuadratureGrid &grid) {
  if (std::ifstream in(path); in) {
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception &) {
      doc = nullptr;
    }
    if (doc.is_object()) {
      if (auto cached = basis_from_cache_json(doc, p, m, grid)) return std::move(*cached);
    }
  }
  SpectralBasis basis = build_basis(p, m, grid);
  save_basis_cache(path, basis);
  return basis;
}

} // namespace qvortex
