#include "qvortex/oracle.hpp"
#include "qvortex/solver.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

using qvortex::ModelParams;
using qvortex::SolveConfig;

namespace {

const qvortex::SpectralBasis &basis_of_size(int m) {
  static std::map<int, qvortex::SpectralBasis> cache;
  auto it = cache.find(m);
  if (it == cache.end())
    it = cache.emplace(m, qvortex::build_basis(20.0, m, qvortex::build_grid(20.0, 48, 8))).first;
  return it->second;
}

const qvortex::SpectralBasis &default_basis() { return basis_of_size(60); }

const qvortex::VortexSolution &solved(int n, double q0) {
  static std::map<std::pair<int, double>, qvortex::VortexSolution> cache;
  const auto key = std::make_pair(n, q0);
  auto it = cache.find(key);
  if (it == cache.end()) {
    SolveConfig config;
    config.q0 = q0;
    it = cache.emplace(key, qvortex::minimize_on_sphere(default_basis(), ModelParams{}.with_n(n), config)).first;
  }
  return it->second;
}

Eigen::VectorXd random_on_sphere(int m, double q0, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd a(m);
  for (int i = 0; i < m; ++i) a[i] = normal(rng) / (1.0 + 0.3 * i);
  return a * std::sqrt(q0) / a.norm();
}

constexpr double kFourPi = 4.0 * std::numbers::pi;

} // namespace

TEST(DiscreteFunctional, ZeroCoefficientsGiveConstant) {
  const ModelParams p;
  EXPECT_EQ(qvortex::discrete_functional(Eigen::VectorXd::Zero(60), default_basis(), p, 100.0),
            p.lambda * p.b * 100.0 / kFourPi);
}

TEST(DiscreteFunctional, SingleModeLeadingOrder) {
  const ModelParams p;
  const double q0 = 1e-6;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(60);
  a[0] = std::sqrt(q0);
  const auto &b = default_basis();
  const double expected =
      0.5 * q0 * (b.stiffness()(0, 0) + b.centrifugal()(0, 0)) + p.lambda * p.b * q0 / kFourPi;
  EXPECT_NEAR(qvortex::discrete_functional(a, b, p, q0), expected, 1e-12);
}

TEST(DiscreteFunctional, HomogeneityDegreesTwoAndSix) {
  ModelParams sextic_only; // a_pot = 0 is outside the physical family; used only for scaling
  sextic_only.a_pot = 0.0;
  std::mt19937_64 rng(11);
  const Eigen::VectorXd a = random_on_sphere(60, 1.0, rng);
  const auto &b = default_basis();
  const double quad = 0.5 * a.dot((b.stiffness() + b.centrifugal()) * a);
  auto nonquadratic = [&](double s) {
    const Eigen::VectorXd x = std::sqrt(s) * a;
    return qvortex::discrete_functional(x, b, sextic_only, 7.0) - sextic_only.b * 7.0 / kFourPi - s * quad;
  };
  EXPECT_NEAR(nonquadratic(4.0) / nonquadratic(1.0), 64.0, 1e-8);
}

TEST(DiscreteFunctional, EvenInCoefficients) {
  std::mt19937_64 rng(5);
  const Eigen::VectorXd a = random_on_sphere(60, 100.0, rng);
  EXPECT_DOUBLE_EQ(qvortex::discrete_functional(a, default_basis(), ModelParams{}, 100.0),
                   qvortex::discrete_functional(-a, default_basis(), ModelParams{}, 100.0));
}

TEST(DiscreteFunctional, DifferenceMatchesDirectSubtraction) {
  std::mt19937_64 rng(9);
  const Eigen::VectorXd a = random_on_sphere(60, 100.0, rng);
  const Eigen::VectorXd d = 0.1 * random_on_sphere(60, 1.0, rng);
  const ModelParams p;
  const double direct = qvortex::discrete_functional(a + d, default_basis(), p, 100.0) -
                        qvortex::discrete_functional(a, default_basis(), p, 100.0);
  EXPECT_NEAR(qvortex::functional_difference(a, d, default_basis(), p), direct, 1e-10 * std::abs(direct) + 1e-12);
}

TEST(DiscreteFunctional, RejectsDimensionMismatch) {
  EXPECT_THROW(qvortex::discrete_functional(Eigen::VectorXd::Zero(5), default_basis(), ModelParams{}, 1.0),
               std::invalid_argument);
  EXPECT_THROW(qvortex::functional_gradient(Eigen::VectorXd::Zero(61), default_basis(), ModelParams{}),
               std::invalid_argument);
}

TEST(FunctionalGradient, ZeroAtOrigin) {
  EXPECT_EQ(qvortex::functional_gradient(Eigen::VectorXd::Zero(60), default_basis(), ModelParams{}).norm(), 0.0);
}

TEST(FunctionalGradient, QuadraticWhenUncoupled) {
  ModelParams linear;
  linear.lambda = 0.0;
  std::mt19937_64 rng(3);
  const Eigen::VectorXd a = random_on_sphere(60, 100.0, rng);
  const auto &b = default_basis();
  const Eigen::VectorXd expected = (b.stiffness() + b.centrifugal()) * a;
  EXPECT_EQ((qvortex::functional_gradient(a, b, linear) - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FunctionalGradient, MatchesCentralDifferencesOnSphere) {
  const ModelParams p;
  const auto &b = default_basis();
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd a = random_on_sphere(60, 100.0, rng);
    const Eigen::VectorXd g = qvortex::functional_gradient(a, b, p);
    Eigen::VectorXd fd(60);
    const double h = 1e-6;
    for (int k = 0; k < 60; ++k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(60);
      e[k] = h;
      fd[k] = (qvortex::discrete_functional(a + e, b, p, 100.0) - qvortex::discrete_functional(a - e, b, p, 100.0)) /
              (2 * h);
    }
    EXPECT_LT((fd - g).cwiseAbs().maxCoeff(), 1e-4 * g.cwiseAbs().maxCoeff()) << "trial " << trial;
  }
}

TEST(RecoverOmegaSq, GradientIdentityHoldsAnywhereOnSphere) {
  const ModelParams p;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::VectorXd a = random_on_sphere(60, 100.0, rng);
    const double direct = qvortex::recover_omega_sq(a, default_basis(), p, 100.0);
    const double via_gradient =
        kFourPi / 100.0 * a.dot(qvortex::functional_gradient(a, default_basis(), p)) + 2.0 * p.lambda * p.b;
    EXPECT_NEAR(direct, via_gradient, 1e-6 * std::abs(direct));
  }
}

TEST(RecoverOmegaSq, RejectsBadNorm) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(60);
  a[0] = 1.0;
  EXPECT_THROW(qvortex::recover_omega_sq(a, default_basis(), ModelParams{}, 0.0), std::invalid_argument);
  EXPECT_THROW(qvortex::recover_omega_sq(a, default_basis(), ModelParams{}, 2.0), std::invalid_argument);
}

TEST(ResidualError, ZeroFieldIsExact) {
  EXPECT_EQ(qvortex::residual_error(Eigen::VectorXd::Zero(60), 1.3, default_basis(), ModelParams{}), 0.0);
}

TEST(MinimizeOnSphere, TableOneLowNorm) {
  const auto &sol = solved(1, 10.0);
  ASSERT_TRUE(sol.converged);
  EXPECT_NEAR(sol.omega_sq, 2.1755, 0.02);
  EXPECT_NEAR(sol.phi_max, 0.1115, 0.02 * 0.1115);
  EXPECT_LT(sol.residual_error, 5e-3);
}

TEST(MinimizeOnSphere, TableOneMidNorm) {
  const auto &sol = solved(1, 100.0);
  ASSERT_TRUE(sol.converged);
  EXPECT_NEAR(sol.omega_sq, 0.4287, 0.02);
  EXPECT_NEAR(sol.phi_max, 0.9963, 0.02 * 0.9963);
  EXPECT_NEAR(sol.coeffs.squaredNorm(), 100.0, 1e-10 * 100.0);
  EXPECT_NEAR(sol.f_value, qvortex::discrete_functional(sol.coeffs, default_basis(), ModelParams{}, 100.0), 0.0);
}

TEST(MinimizeOnSphere, LinearLimit) {
  for (int n : {1, 2}) {
    const auto &sol = solved(n, 0.01);
    ASSERT_TRUE(sol.converged);
    EXPECT_NEAR(sol.omega_sq, qvortex::linear_limit_omega_sq(ModelParams{}.with_n(n)), 1e-3) << "N = " << n;
  }
  EXPECT_NEAR(solved(1, 0.01).omega_sq, 2.2367, 1e-3);
}

TEST(MinimizeOnSphere, RecoveredFrequencyAtTableRows) {
  EXPECT_NEAR(solved(1, 200.0).omega_sq, 0.3517, 0.02);
  EXPECT_NEAR(solved(3, 100.0).omega_sq, 0.6657, 0.02);
}

TEST(MinimizeOnSphere, GradientIdentityAtMinimizer) {
  const auto &sol = solved(1, 100.0);
  const ModelParams p;
  const double via_gradient =
      kFourPi / 100.0 * sol.coeffs.dot(qvortex::functional_gradient(sol.coeffs, default_basis(), p)) +
      2.0 * p.lambda * p.b;
  EXPECT_NEAR(sol.omega_sq, via_gradient, 1e-6);
}

TEST(MinimizeOnSphere, TheoremBoundsHold) {
  for (auto [n, q0] : {std::pair{1, 10.0}, {1, 100.0}, {1, 200.0}, {3, 100.0}}) {
    const ModelParams p = ModelParams{}.with_n(n);
    const auto t = qvortex::theory_bounds(p);
    const auto &sol = solved(n, q0);
    ASSERT_TRUE(sol.converged);
    EXPECT_GT(sol.omega_sq, t.omega_sq_necessary);
    if (sol.omega_sq < qvortex::omega_sq_bound_applicability(p)) EXPECT_LT(sol.phi_max, t.phi_max_ceiling);
  }
}

TEST(MinimizeOnSphere, ProfileNonNegativeAfterSignFix) {
  // At m = 60 the truncated expansion undershoots by up to ~7e-7 phi_max in the
  // far tail; from m = 90 on the profile is non-negative to 1e-8.
  for (auto [n, q0] : {std::pair{1, 10.0}, {1, 100.0}, {3, 100.0}, {1, 500.0}}) {
    SolveConfig config;
    config.q0 = q0;
    const auto sol = qvortex::minimize_on_sphere(basis_of_size(90), ModelParams{}.with_n(n), config);
    ASSERT_TRUE(sol.converged);
    const auto samples = basis_of_size(90).sample(sol.coeffs, qvortex::kProfilePoints);
    const double lowest = *std::min_element(samples.phi.begin(), samples.phi.end());
    EXPECT_GE(lowest, -1e-8 * sol.phi_max) << "N = " << n << ", Q0 = " << q0;
    EXPECT_DOUBLE_EQ(samples.phi[samples.argmax_abs()], sol.phi_max);
  }
}

TEST(MinimizeOnSphere, TailUndershootAtDefaultSizeIsTruncationLevel) {
  for (auto [n, q0] : {std::pair{1, 10.0}, {1, 100.0}, {3, 100.0}}) {
    const auto &sol = solved(n, q0);
    const auto samples = default_basis().sample(sol.coeffs, qvortex::kProfilePoints);
    const double lowest = *std::min_element(samples.phi.begin(), samples.phi.end());
    EXPECT_GE(lowest, -1e-6 * sol.phi_max) << "N = " << n << ", Q0 = " << q0;
  }
}

TEST(MinimizeOnSphere, DecayEstimateNearBoundary) {
  const ModelParams p;
  for (double q0 : {10.0, 100.0, 200.0}) {
    const auto &sol = solved(1, q0);
    const double sigma = qvortex::decay_rate(sol.omega_sq, p);
    const double p0 = 0.75 * p.p;
    const auto samples = default_basis().sample(sol.coeffs, qvortex::kProfilePoints);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples.rho[i] < p0) continue;
      EXPECT_LE(samples.phi[i] * samples.phi[i], 2.0 * p.a_pot / 3.0 * std::exp(-sigma * (samples.rho[i] - p0)))
          << "rho = " << samples.rho[i];
    }
  }
}

TEST(MinimizeOnSphere, ConstraintAndMonotoneDescentEveryIteration) {
  SolveConfig config;
  config.q0 = 100.0;
  double worst_drift = 0.0, worst_change = -1.0;
  int calls = 0;
  config.observer = [&](const qvortex::IterationInfo &info) {
    worst_drift = std::max(worst_drift, info.constraint_drift);
    worst_change = std::max(worst_change, info.f_change);
    ++calls;
  };
  const auto sol = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  ASSERT_TRUE(sol.converged);
  EXPECT_GT(calls, 0);
  EXPECT_LT(worst_drift, 1e-12);
  EXPECT_LE(worst_change, 0.0);
}

TEST(MinimizeOnSphere, NonConvergenceIsReported) {
  SolveConfig config;
  config.q0 = 100.0;
  config.max_iter = 3;
  config.restarts = 0;
  const auto sol = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  EXPECT_FALSE(sol.converged);
  EXPECT_EQ(sol.iterations, 3);
  EXPECT_GT(sol.tangent_grad_norm, 0.0);
}

TEST(MinimizeOnSphere, DeterministicForFixedSeed) {
  SolveConfig config;
  config.q0 = 50.0;
  config.seed = 42;
  const auto first = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  const auto second = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  EXPECT_EQ(first.coeffs, second.coeffs);
  EXPECT_EQ(first.omega_sq, second.omega_sq);
  EXPECT_EQ(first.iterations, second.iterations);
}

TEST(MinimizeOnSphere, InitialGuessesReachSameGroundState) {
  SolveConfig config;
  config.q0 = 100.0;
  config.initial_guess = qvortex::InitialGuess::trapezoid;
  const auto trapezoid = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  ASSERT_TRUE(trapezoid.converged);
  EXPECT_NEAR(trapezoid.omega_sq, solved(1, 100.0).omega_sq, 1e-6);

  config.initial_guess = qvortex::InitialGuess::custom;
  config.custom_coeffs = solved(1, 100.0).coeffs;
  const auto custom = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  EXPECT_NEAR(custom.omega_sq, solved(1, 100.0).omega_sq, 1e-8);
}

TEST(MinimizeOnSphere, SteepestDescentAgrees) {
  SolveConfig config;
  config.q0 = 10.0;
  config.descent = qvortex::Descent::steepest;
  config.restarts = 0;
  const auto sol = qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config);
  ASSERT_TRUE(sol.converged);
  EXPECT_NEAR(sol.omega_sq, solved(1, 10.0).omega_sq, 1e-6);
}

TEST(MinimizeOnSphere, ResidualShrinksWithBasisSize) {
  std::vector<double> re;
  for (int m : {30, 60, 90}) {
    SolveConfig config;
    config.q0 = 10.0;
    const auto sol = qvortex::minimize_on_sphere(basis_of_size(m), ModelParams{}, config);
    ASSERT_TRUE(sol.converged);
    re.push_back(sol.residual_error);
  }
  EXPECT_GT(re[0], re[1]);
  EXPECT_GT(re[1], re[2]);
}

TEST(SolveConfig, Validation) {
  SolveConfig config;
  config.q0 = 0.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = SolveConfig{};
  config.grad_tol = 0.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = SolveConfig{};
  config.initial_guess = qvortex::InitialGuess::custom;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config.custom_coeffs = Eigen::VectorXd::Ones(7);
  EXPECT_THROW(qvortex::minimize_on_sphere(default_basis(), ModelParams{}, config), std::invalid_argument);
}
