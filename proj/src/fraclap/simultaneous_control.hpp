#pragma once

// One control for a whole family of fractional heat equations indexed by s.
// The functional is
//   F(u) = 1/2 ||u||_U^2 + 1/(2 beta) * mean_s |y_s(T)|_M^2
// and is minimized by gradient descent, conjugate gradients on the normal
// equations (I + Lambda) u = b, or Adam driven by one sampled s per step.
// Cost is counted in forward+adjoint solve pairs.

#include "fraclap/hum_control.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fraclap {

struct ParameterSet {
  std::vector<double> values;

  // Throws InvalidArgument unless all values are distinct and in (1/2, 1).
  explicit ParameterSet(std::vector<double> v);
  // Midpoints of `count` equal cells of (lo, hi).
  static ParameterSet uniform(std::size_t count, double lo, double hi);
  std::size_t size() const noexcept { return values.size(); }
};

// Per-s systems on one mesh, region and time grid. Immutable after
// construction.
class OperatorCache {
 public:
  OperatorCache(const ParameterSet& params, const UniformMesh1D& mesh, const ControlRegion& region,
                const TimeGrid& grid, bool modal = true);

  std::size_t size() const noexcept { return systems_.size(); }
  const LinearHeatControl& system(std::size_t i) const { return systems_.at(i); }
  const ParameterSet& parameters() const noexcept { return params_; }
  const UniformMesh1D& mesh() const noexcept { return mesh_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  Trajectory zero_control() const { return systems_.front().zero_control(); }
  double control_inner(const Trajectory& u, const Trajectory& v) const {
    return systems_.front().control_inner(u, v);
  }

 private:
  ParameterSet params_;
  UniformMesh1D mesh_;
  TimeGrid grid_;
  std::vector<LinearHeatControl> systems_;
};

struct OptimizerTrace {
  std::string algorithm;
  std::size_t iterations = 0;
  std::size_t pde_solve_count = 0;      // forward+adjoint pairs spent by the method
  std::size_t monitor_solve_count = 0;  // pairs spent only on stopping tests
  double final_functional = 0.0;
  double terminal_expectation = 0.0;  // mean_s |y_s(T)|_M^2
  double max_terminal_norm = 0.0;
  double wall_time = 0.0;  // seconds
  bool converged = false;
  double step = 0.0;  // GD step actually used
  std::vector<double> history;  // functional per iteration (GD, CG) or per window (SGD)
};

struct SimultaneousResult {
  Trajectory control;
  OptimizerTrace trace;
};

// Running count of forward+adjoint pairs.
struct SolveCounter {
  std::size_t pairs = 0;
};

double expected_terminal_functional(const Trajectory& u, const OperatorCache& cache, const NodalVector& y0,
                                    double beta, SolveCounter* counter = nullptr);

// u + (1 / (beta |K|)) sum_s L_s^* y_s(T); `value` receives F(u) when given.
Trajectory full_gradient(const Trajectory& u, const OperatorCache& cache, const NodalVector& y0, double beta,
                         SolveCounter* counter = nullptr, double* value = nullptr);

// u + (1 / beta) L_s^* y_s(T) for the single parameter with index i.
Trajectory stochastic_gradient(const Trajectory& u, const OperatorCache& cache, std::size_t i, const NodalVector& y0,
                               double beta, SolveCounter* counter = nullptr);

struct GdSettings {
  double beta = 0.02;
  double eta = 0.0;  // 0 selects 0.5 / (1 + 1/beta)
  double tol = 1e-4;  // on |grad F(u)| / |grad F(0)|
  std::size_t max_iter = 100000;
};

struct CgSettings {
  double beta = 0.02;
  double tol = 1e-4;  // on |r| / |b|
  std::size_t max_iter = 1000;
};

struct AdamSettings {
  double beta = 0.02;
  double eta = 1e-3;
  double gamma1 = 0.9;
  double gamma2 = 0.999;
  double delta = 1e-8;
  double tol = 1e-4;  // stop once |grad F(avg)|^2 / 2 <= tol * F(avg), avg = window mean
  std::size_t window = 50;
  std::size_t max_iter = 200000;
  std::uint64_t seed = 0;
  bool standard = false;  // textbook moment updates and bias corrections
};

SimultaneousResult gd_minimize(const OperatorCache& cache, const NodalVector& y0, const GdSettings& settings);
SimultaneousResult cg_minimize_simultaneous(const OperatorCache& cache, const NodalVector& y0,
                                            const CgSettings& settings);
SimultaneousResult sgd_adam_minimize(const OperatorCache& cache, const NodalVector& y0,
                                     const AdamSettings& settings);

// Largest eigenvalue of I + Lambda by power iteration (the smallest is 1
// whenever the control space is larger than the state space), with the
// rate constants ln((rho+1)/(rho-1)) and ln((sqrt(rho)+1)/(sqrt(rho)-1)).
struct Conditioning {
  double lambda_max = 0.0;
  double rho = 0.0;
  double c_gd = 0.0;
  double c_cg = 0.0;
};
Conditioning estimate_conditioning(const OperatorCache& cache, double beta, std::size_t iterations = 30);

struct ComparisonSettings {
  std::vector<std::size_t> sizes{2, 10, 50};
  double s_lo = 0.6;
  double s_hi = 0.9;
  bool run_gd = true;
  bool run_cg = true;
  bool run_sgd = true;
  std::size_t sgd_seeds = 1;  // SGD rows per size, seeds seed, seed+1, ...
  GdSettings gd;
  CgSettings cg;
  AdamSettings adam;
};

struct ComparisonRow {
  std::size_t K = 0;
  std::uint64_t seed = 0;
  OptimizerTrace trace;
};

std::vector<ComparisonRow> run_comparison(const UniformMesh1D& mesh, const ControlRegion& region,
                                          const TimeGrid& grid, const std::function<double(double)>& y0,
                                          const ComparisonSettings& settings);

}  // namespace fraclap
