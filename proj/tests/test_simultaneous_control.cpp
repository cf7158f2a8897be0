#include "fraclap/errors.hpp"
#include "fraclap/simultaneous_control.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fraclap;

namespace {

const UniformMesh1D kMesh = UniformMesh1D::with_step(-1, 1, 0.125);
const ControlRegion kRegion(-0.5, 0.8);
const TimeGrid kGrid(0.4, 20);

NodalVector sine() {
  return interpolate(kMesh, [](double x) { return std::sin(M_PI * x); });
}

Trajectory random_control(const OperatorCache& cache, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Trajectory u = cache.zero_control();
  const NodalVector& mask = cache.system(0).mask();
  for (std::size_t m = 2; m <= kGrid.M(); ++m) {
    for (Eigen::Index j = 0; j < mask.size(); ++j) u.at(m)[j] = mask[j] * normal(rng);
  }
  return u;
}

double distance(const OperatorCache& cache, Trajectory a, const Trajectory& b) {
  a.axpy(-1.0, b);
  return std::sqrt(cache.control_inner(a, a));
}

}  // namespace

TEST(ParameterSet, UniformMidpointsAndValidation) {
  const ParameterSet p = ParameterSet::uniform(3, 0.6, 0.9);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_NEAR(p.values[0], 0.65, 1e-15);
  EXPECT_NEAR(p.values[2], 0.85, 1e-15);
  EXPECT_THROW(ParameterSet({0.4}), InvalidArgument);
  EXPECT_THROW(ParameterSet({0.7, 0.7}), InvalidArgument);
  EXPECT_THROW(ParameterSet({}), InvalidArgument);
}

TEST(Simultaneous, FunctionalIsMeanOfPerParameterFunctionals) {
  const OperatorCache cache(ParameterSet::uniform(3, 0.6, 0.9), kMesh, kRegion, kGrid);
  const Trajectory u = random_control(cache, 1);
  double mean = 0.0;
  for (std::size_t i = 0; i < 3; ++i) mean += primal_functional(cache.system(i), u, sine(), 0.02) / 3.0;
  SolveCounter counter;
  EXPECT_NEAR(expected_terminal_functional(u, cache, sine(), 0.02, &counter), mean, 1e-12 * mean);
  EXPECT_EQ(counter.pairs, 3u);
}

TEST(Simultaneous, StochasticGradientIsUnbiased) {
  const OperatorCache cache(ParameterSet::uniform(5, 0.6, 0.9), kMesh, kRegion, kGrid);
  const Trajectory u = random_control(cache, 2);
  SolveCounter full_count, sample_count;
  const Trajectory full = full_gradient(u, cache, sine(), 0.02, &full_count);
  Trajectory mean = cache.zero_control();
  for (std::size_t i = 0; i < cache.size(); ++i) {
    mean.axpy(1.0 / 5.0, stochastic_gradient(u, cache, i, sine(), 0.02, &sample_count));
  }
  EXPECT_LT(distance(cache, mean, full), 1e-12 * std::sqrt(cache.control_inner(full, full)));
  EXPECT_EQ(full_count.pairs, 5u);
  EXPECT_EQ(sample_count.pairs, 5u);
}

TEST(Simultaneous, SingleParameterMatchesHum) {
  const ParameterSet one({0.75});
  const OperatorCache cache(one, kMesh, kRegion, kGrid);
  CgSettings cg;
  cg.tol = 1e-10;
  const SimultaneousResult a = cg_minimize_simultaneous(cache, sine(), cg);
  HumSettings hum;
  hum.beta = cg.beta;
  hum.cg_tol = 1e-12;
  const HumResult b = cg_minimize(cache.system(0), sine(), hum);
  EXPECT_LT(distance(cache, a.control, b.control), 1e-7 * b.cost);
  EXPECT_NEAR(a.trace.final_functional, b.optimal_energy, 1e-9 * b.optimal_energy);
}

TEST(Simultaneous, SolveCountsFollowTheAlgorithms) {
  const OperatorCache cache(ParameterSet::uniform(4, 0.6, 0.9), kMesh, kRegion, kGrid);
  GdSettings gd;
  gd.tol = 1e-3;
  CgSettings cg;
  cg.tol = 1e-3;
  AdamSettings adam;
  adam.tol = 1e-3;
  adam.seed = 3;
  const OptimizerTrace g = gd_minimize(cache, sine(), gd).trace;
  const OptimizerTrace c = cg_minimize_simultaneous(cache, sine(), cg).trace;
  const OptimizerTrace s = sgd_adam_minimize(cache, sine(), adam).trace;
  EXPECT_TRUE(g.converged && c.converged && s.converged);
  EXPECT_EQ(g.pde_solve_count, g.iterations * 4);
  EXPECT_EQ(c.pde_solve_count, (c.iterations + 1) * 4);
  EXPECT_EQ(s.pde_solve_count, s.iterations);
  EXPECT_GT(g.iterations, c.iterations);
  EXPECT_NEAR(g.final_functional, c.final_functional, 5e-3 * c.final_functional);
  EXPECT_NEAR(s.final_functional, c.final_functional, 5e-3 * c.final_functional);
}

TEST(Simultaneous, AdamIsDeterministicPerSeed) {
  const OperatorCache cache(ParameterSet::uniform(6, 0.6, 0.9), kMesh, kRegion, kGrid);
  AdamSettings adam;
  adam.tol = 1e-3;
  adam.seed = 42;
  const SimultaneousResult a = sgd_adam_minimize(cache, sine(), adam);
  const SimultaneousResult b = sgd_adam_minimize(cache, sine(), adam);
  EXPECT_EQ(a.trace.iterations, b.trace.iterations);
  EXPECT_EQ(a.trace.final_functional, b.trace.final_functional);
  EXPECT_EQ(distance(cache, a.control, b.control), 0.0);
  adam.seed = 43;
  const SimultaneousResult c = sgd_adam_minimize(cache, sine(), adam);
  EXPECT_NE(a.trace.final_functional, c.trace.final_functional);
}

TEST(Simultaneous, ConditioningAboveOne) {
  const OperatorCache cache(ParameterSet::uniform(3, 0.6, 0.9), kMesh, kRegion, kGrid);
  const Conditioning c = estimate_conditioning(cache, 0.02);
  EXPECT_GT(c.lambda_max, 1.0);
  EXPECT_DOUBLE_EQ(c.rho, c.lambda_max);
  EXPECT_GT(c.c_gd, 0.0);
  EXPECT_GT(c.c_cg, c.c_gd);
}

TEST(Simultaneous, ComparisonRowsPerSizeAndSeed) {
  ComparisonSettings settings;
  settings.sizes = {2, 3};
  settings.run_gd = false;
  settings.sgd_seeds = 2;
  settings.cg.tol = settings.adam.tol = 1e-3;
  settings.adam.seed = 9;
  const auto rows = run_comparison(kMesh, kRegion, kGrid, [](double x) { return std::sin(M_PI * x); }, settings);
  ASSERT_EQ(rows.size(), 6u);  // per size: cg, sgd seed 9, sgd seed 10
  EXPECT_EQ(rows[0].K, 2u);
  EXPECT_EQ(rows[0].trace.algorithm, "cg");
  EXPECT_EQ(rows[2].seed, 10u);
  EXPECT_EQ(rows[5].K, 3u);
}
