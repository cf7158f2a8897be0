#include "fraclap/errors.hpp"
#include "fraclap/hum_control.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fraclap;

namespace {

InteriorProblem problem(double s) {
  return {FractionalOrder(s), UniformMesh1D::with_step(-1, 1, 0.05), ControlRegion(-0.3, 0.8), TimeGrid(0.3, 30)};
}

NodalVector sine(const UniformMesh1D& mesh) {
  return interpolate(mesh, [](double x) { return std::sin(M_PI * x); });
}

NodalVector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  NodalVector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

TEST(PenaltyRule, SwitchesAtOneHalf) {
  EXPECT_DOUBLE_EQ(penalty_rule(0.1, FractionalOrder(0.8)), 0.01);
  EXPECT_NEAR(penalty_rule(0.1, FractionalOrder(0.25)), 0.1, 1e-15);
  EXPECT_THROW(penalty_rule(0.0, FractionalOrder(0.5)), InvalidArgument);
}

TEST(Hum, GramianIsSymmetric) {
  const LinearHeatControl sys = make_interior_system(problem(0.7));
  std::mt19937_64 rng(3);
  auto gram = [&](const NodalVector& q) {
    const Trajectory u = sys.adjoint_control(q);
    return sys.terminal(NodalVector::Zero(q.size()), &u);
  };
  for (int k = 0; k < 5; ++k) {
    const NodalVector a = random_vector(sys.size(), rng), b = random_vector(sys.size(), rng);
    const double ab = sys.state_inner(gram(a), b), ba = sys.state_inner(a, gram(b));
    EXPECT_NEAR(ab, ba, 1e-11 * std::abs(ab));
    EXPECT_GE(sys.state_inner(gram(a), a), 0.0);
  }
}

TEST(Hum, AdjointControlIsTransposeOfForwardMap) {
  const LinearHeatControl sys = make_interior_system(problem(0.4));
  std::mt19937_64 rng(4);
  Trajectory u = sys.zero_control();
  for (std::size_t m = 2; m <= sys.grid().M(); ++m) u.at(m) = random_vector(sys.size(), rng).cwiseProduct(sys.mask());
  const NodalVector q = random_vector(sys.size(), rng);
  const NodalVector Lu = sys.terminal(NodalVector::Zero(sys.size()), &u);
  const double lhs = sys.state_inner(Lu, q), rhs = sys.control_inner(u, sys.adjoint_control(q));
  EXPECT_NEAR(lhs, rhs, 1e-11 * std::abs(lhs));
}

TEST(Hum, ModalRouteMatchesFactorization) {
  const InteriorProblem p = problem(0.6);
  const LinearHeatControl direct = make_interior_system(p, false), modal = make_interior_system(p, true);
  ASSERT_TRUE(modal.is_modal());
  HumSettings settings;
  settings.beta = 1e-3;
  const NodalVector y0 = sine(p.mesh);
  const HumResult a = cg_minimize(direct, y0, settings), b = cg_minimize(modal, y0, settings);
  EXPECT_NEAR(a.cost, b.cost, 1e-8 * a.cost);
  EXPECT_NEAR(a.terminal_norm, b.terminal_norm, 1e-7 * a.terminal_norm);
}

TEST(Hum, DualOptimumSolvesPrimalProblem) {
  const InteriorProblem p = problem(0.8);
  const LinearHeatControl sys = make_interior_system(p);
  HumSettings settings;
  settings.beta = 1e-3;
  settings.cg_tol = 1e-12;
  const NodalVector y0 = sine(p.mesh);
  const HumResult r = cg_minimize(sys, y0, settings);
  ASSERT_TRUE(r.converged);

  const Trajectory g = primal_gradient(sys, r.control, y0, settings.beta);
  EXPECT_LT(std::sqrt(sys.control_inner(g, g)), 1e-8 * r.cost);
  // no duality gap: min primal = -min dual
  EXPECT_NEAR(primal_functional(sys, r.control, y0, settings.beta), r.optimal_energy, 1e-10 * r.optimal_energy);
  EXPECT_NEAR(dual_functional(sys, r.p_T, y0, settings.beta), -r.optimal_energy, 1e-9 * r.optimal_energy);
  for (std::size_t i = 1; i < r.j_history.size(); ++i) EXPECT_LE(r.j_history[i], r.j_history[i - 1] + 1e-14);
}

TEST(Hum, SmallerPenaltyCostsMoreAndReachesCloser) {
  const InteriorProblem p = problem(0.8);
  const LinearHeatControl sys = make_interior_system(p, true);
  const NodalVector y0 = sine(p.mesh);
  HumSettings loose, tight;
  loose.beta = 1e-2;
  tight.beta = 1e-4;
  const HumResult a = cg_minimize(sys, y0, loose), b = cg_minimize(sys, y0, tight);
  EXPECT_LT(a.cost, b.cost);
  EXPECT_GT(a.terminal_norm, b.terminal_norm);
}

TEST(Hum, RejectsBadSettings) {
  const InteriorProblem p = problem(0.5);
  const LinearHeatControl sys = make_interior_system(p);
  HumSettings settings;
  settings.beta = 0.0;
  EXPECT_THROW(cg_minimize(sys, sine(p.mesh), settings), InvalidArgument);
  settings.beta = 1e-3;
  EXPECT_THROW(cg_minimize(sys, NodalVector::Zero(3), settings), DimensionError);
  settings.cg_max_iter = 1;
  settings.cg_tol = 1e-14;
  EXPECT_THROW(cg_minimize(sys, sine(p.mesh), settings), NonConvergence);
}

TEST(Hum, DiagnosticsSweepRowsPerMesh) {
  const auto rows = diagnostics_sweep(FractionalOrder(0.8), {0.1, 0.05}, -1, 1, ControlRegion(-0.3, 0.8), 0.3, 30,
                                      [](double x) { return std::sin(M_PI * x); }, HumSettings{});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[1].beta, 0.05 * 0.05);
  EXPECT_GT(rows[1].cost, rows[0].cost);
  EXPECT_LT(rows[1].terminal_norm, rows[0].terminal_norm);
}
