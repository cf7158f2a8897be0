#pragma once

// Non-negative control to trajectories with an L-infinity cost. For a fixed
// bound t the best control in 0 <= u <= t is a bounded least-squares problem
// on the terminal map (solved exactly by an active-set method); the cost
// t/2 + gap(t)^2/(2 beta) is convex in t and minimized by Brent's method.
// Feasibility at a horizon T means the terminal gap |y(T) - y_hat(T)|_{L2}
// falls below a tolerance.

#include "fraclap/hum_control.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace fraclap {

// Reference trajectory driven by a constant positive control on omega.
struct TrajectoryTarget {
  NodalVector y_hat0;
  Trajectory u_hat;
  NodalVector y_hat_T;
};

// Throws InvalidArgument unless u_level > 0.
TrajectoryTarget make_trajectory_target(const LinearHeatControl& sys, NodalVector y_hat0, double u_level);

struct ConstrainedSettings {
  double beta = 1e-10;
  double gap_rel = 1e-3;  // feasible iff gap <= gap_rel * |y_hat(T)|
  int bits = 40;          // precision of the bound search
  std::size_t max_iter = 200;
};

struct ConstrainedResult {
  Trajectory control;
  Trajectory y;
  NodalVector target_T;  // y_hat(T)
  bool feasible = false;
  double terminal_gap = 0.0;
  double gap_tol = 0.0;
  double min_gap = 0.0;  // smallest gap any u >= 0 can reach
  double T_used = 0.0;
  double objective = 0.0;
  double control_max = 0.0;
  double state_min = 0.0;  // most negative state value, reported only
  std::size_t iterations = 0;
  bool converged = false;
};

// min |A x - b| over 0 <= x <= upper (upper may be infinite).
Eigen::VectorXd bounded_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double upper);

// Minimizes 1/2 max|u| + |y(T) - y_hat(T)|^2 / (2 beta) over u >= 0.
ConstrainedResult constrained_tracking(const LinearHeatControl& sys, const NodalVector& y0,
                                       const TrajectoryTarget& target, const ConstrainedSettings& settings);

// Everything needed to rebuild the problem on a new horizon.
struct ConstrainedProblem {
  FractionalOrder s;
  UniformMesh1D mesh;
  ControlRegion region;
  std::size_t M;
  std::function<double(double)> y0;
  std::function<double(double)> y_hat0;
  double u_hat = 0.02;
};

ConstrainedResult solve_constrained(const ConstrainedProblem& problem, double T, const ConstrainedSettings& settings);

struct BisectionStep {
  double T = 0.0;
  double gap = 0.0;
  double gap_tol = 0.0;
  bool feasible = false;
};

struct MinTimeResult {
  double T_min = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<BisectionStep> trace;
  std::optional<ConstrainedResult> at_hi;  // solve at the feasible end of the final bracket
};

// Bisection on T until the bracket is at most `width` wide; returns its
// midpoint. Throws BracketError when the ends do not differ in feasibility.
MinTimeResult min_time_estimate(const ConstrainedProblem& problem, double T_lo, double T_hi,
                                const ConstrainedSettings& settings, double width = 0.02);

// Fraction of control cells (node, level) that carry `share` of the total
// mass when cells are taken largest first.
double mass_support_fraction(const Trajectory& control, const NodalVector& mask, double share = 0.95);

}  // namespace fraclap
