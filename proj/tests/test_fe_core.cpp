#include "oracles.hpp"

#include "fraclap/errors.hpp"
#include "fraclap/fe_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace fraclap;

TEST(FractionalOrder, RejectsClosedEnds) {
  EXPECT_THROW(FractionalOrder(0.0), InvalidArgument);
  EXPECT_THROW(FractionalOrder(1.0), InvalidArgument);
  EXPECT_NO_THROW(FractionalOrder(0.5));
}

TEST(Mesh, WithStepNeedsIntegerCellCount) {
  const UniformMesh1D m = UniformMesh1D::with_step(-1, 1, 0.25);
  EXPECT_EQ(m.n_interior(), 7u);
  EXPECT_DOUBLE_EQ(m.interior_node(0), -0.75);
  EXPECT_THROW(UniformMesh1D::with_step(-1, 1, 0.3), InvalidArgument);
}

TEST(Normalization, HalfLaplacianConstant) {
  EXPECT_NEAR(normalization_constant(1, FractionalOrder(0.5)), 1.0 / std::numbers::pi, 1e-15);
  for (double s : {0.1, 0.25, 0.75, 0.9}) {
    EXPECT_NEAR(normalization_constant(1, FractionalOrder(s)), oracle::normalization(s),
                1e-13 * oracle::normalization(s));
  }
}

TEST(Getoor, CentreValueAtHalf) {
  EXPECT_NEAR(exact_getoor_solution(FractionalOrder(0.5), 0.0), 1.0, 1e-14);
  EXPECT_NEAR(oracle::getoor(0.5, 0.0), 1.0, 1e-14);
  EXPECT_EQ(exact_getoor_solution(FractionalOrder(0.3), 1.5), 0.0);
}

TEST(Mass, RowSumsEqualHatIntegrals) {
  const UniformMesh1D m(-1, 1, 9);
  const SymTridiagonalMatrix M = assemble_mass(m);
  const NodalVector sums = M.apply(NodalVector::Ones(9));
  // interior rows integrate the hat, boundary rows lose the outer neighbour
  EXPECT_NEAR(sums(4), m.h(), 1e-15);
  EXPECT_NEAR(sums(0), m.h() * 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(M(3, 3), 2.0 * m.h() / 3.0, 1e-15);
  EXPECT_NEAR(M(3, 4), m.h() / 6.0, 1e-15);
}

class StiffnessOracle : public ::testing::TestWithParam<double> {};

TEST_P(StiffnessOracle, BandsMatchQuadrature) {
  const double s = GetParam();
  const auto bands = stiffness_bands(FractionalOrder(s), 10);
  for (int k = 0; k < 10; ++k) {
    const double ref = oracle::stiffness_band(s, k);
    EXPECT_NEAR(bands[k], ref, 1e-10 * std::abs(ref)) << "k=" << k;
  }
}

TEST_P(StiffnessOracle, AssembledMatrixScalesWithMesh) {
  const double s = GetParam();
  for (std::size_t N = 1; N <= 9; ++N) {
    const UniformMesh1D m(-1, 1, N);
    const SymDenseMatrix A = assemble_stiffness(m, FractionalOrder(s));
    const double scale = std::pow(m.h(), 1.0 - 2.0 * s);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        const double ref = scale * oracle::stiffness_band(s, static_cast<int>(i > j ? i - j : j - i));
        EXPECT_NEAR(A(i, j), ref, 1e-8 * std::abs(ref));
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Orders, StiffnessOracle, ::testing::Values(0.25, 0.5, 0.75));

TEST(Stiffness, ToeplitzSymmetricWithSignPattern) {
  const UniformMesh1D m(-1, 1, 12);
  const SymDenseMatrix A = assemble_stiffness(m, FractionalOrder(0.4));
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_GT(A(i, i), 0.0);
    for (std::size_t j = 0; j < 12; ++j) {
      EXPECT_EQ(A(i, j), A(j, i));
      if (i != j) EXPECT_LT(A(i, j), 0.0);
      if (i + 1 < 12 && j + 1 < 12) EXPECT_EQ(A(i, j), A(i + 1, j + 1));
    }
  }
}

TEST(Elliptic, ConvergesToGetoorProfile) {
  const auto rows = convergence_study(FractionalOrder(0.5), {1.0 / 8, 1.0 / 16, 1.0 / 32});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(std::isnan(rows[0].rate_energy));
  EXPECT_LT(rows[2].err_energy, rows[0].err_energy);
  EXPECT_NEAR(rows[2].rate_energy, 0.5, 0.1);
  EXPECT_NEAR(rows[2].rate_l2, 1.0, 0.2);
}

TEST(Elliptic, FittedSlopeOfPowerLaw) {
  EXPECT_NEAR(fitted_slope({0.1, 0.05, 0.025}, {0.3 * 0.01, 0.3 * 0.0025, 0.3 * 0.000625}), 2.0, 1e-12);
  EXPECT_NEAR(oracle::loglog_slope({0.1, 0.05}, {1.0, 0.5}), 1.0, 1e-12);
}

TEST(Prolong, ReproducesLinearFunctions) {
  const UniformMesh1D coarse(-1, 1, 3), fine(-1, 1, 7);
  auto f = [](double x) { return 1.0 - std::abs(x); };
  const NodalVector u = prolong(coarse, interpolate(coarse, f), fine);
  for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(u(j), f(fine.interior_node(j)), 1e-15);
  EXPECT_THROW(prolong(coarse, interpolate(coarse, f), UniformMesh1D(-1, 1, 6)), DimensionError);
}
