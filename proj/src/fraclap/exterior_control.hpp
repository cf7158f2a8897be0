#pragma once

// Exterior control through the Robin approximation
//   y_t + (-Delta)^s y = 0 in (-1, 1),  N_s y + n kappa y = n kappa g chi_O outside,
// discretized with P1 elements on an extended interval (a_ext, b_ext) that
// has -1 and 1 as nodes. Functions vanish outside the extended interval.

#include "fraclap/hum_control.hpp"

namespace fraclap {

struct ExteriorGeometry {
  double a_ext = -2.0;
  double b_ext = 2.0;
  ControlRegion control{1.7, 1.9};
  double robin_n = 1e9;
  double kappa = 1.0;
};

// Matrices of the semi-discrete Robin system
//   M_in y' + (F + n kappa K) y = n kappa G g.
struct RobinSystem {
  UniformMesh1D mesh;
  SymDenseMatrix F;         // form over R^2 minus (complement of (-1,1))^2
  SymTridiagonalMatrix K;   // mass over (a_ext, -1) and (1, b_ext)
  SymTridiagonalMatrix G;   // mass over the control region
  SymTridiagonalMatrix M_in;  // mass over (-1, 1)
  double n_kappa = 0.0;
};

// Throws MeshAlignmentError when -1 or 1 is not a node, InvalidArgument for a
// control region that meets [-1, 1] or leaves the extended interval.
RobinSystem assemble_robin_system(const ExteriorGeometry& geom, const UniformMesh1D& mesh, FractionalOrder s);

// Sum of the same element-pair integrals over every pair, tails included.
// Equals the closed-form stiffness on the same mesh; used as a cross-check.
SymDenseMatrix assemble_full_line_form(const UniformMesh1D& mesh, FractionalOrder s);

// N_s u(x) = C_{1,s} * integral over (-1, 1) of (u(x) - u(y)) / |x - y|^{1+2s} dy
// for the P1 function u on the extended mesh and |x| > 1.
double nonlocal_normal_derivative(const NodalVector& u, const UniformMesh1D& mesh, FractionalOrder s, double x);

// Controlled Robin system ready for HUM. Control nodes are those meeting O;
// the control norm is the L2(O x (0, T)) norm.
LinearHeatControl make_robin_control(const RobinSystem& sys, const ExteriorGeometry& geom, const TimeGrid& grid);

// Interior part (nodes in [-1, 1]) of an extended nodal vector.
NodalVector interior_restriction(const NodalVector& u, const UniformMesh1D& mesh);

// Implicit Euler for the Robin system; g may be null.
Trajectory robin_forward_solve(const LinearHeatControl& sys, const NodalVector& y0, const Trajectory* g);

// sqrt(sum_m dt |y^m - z^m|_{M_in}^2), the discrete L2((-1,1) x (0,T)) distance.
double interior_distance(const LinearHeatControl& sys, const Trajectory& y, const Trajectory& z);

// G_beta^ext minimized through the dual (HUM) formulation.
HumResult exterior_optimize(const LinearHeatControl& sys, const NodalVector& y0, const HumSettings& settings);

// Distances d(n) = |y_n - y_2n| and d(2n) = |y_2n - y_4n| on (-1, 1) x (0, T)
// for the unit datum g = 1 on O. First-order convergence in 1/n makes
// d(2n) / d(n) tend to 1/2.
struct RobinConsistency {
  double n = 0.0;
  double d_n = 0.0;
  double d_2n = 0.0;
};
RobinConsistency robin_consistency(FractionalOrder s, const UniformMesh1D& mesh, ExteriorGeometry geom,
                                   const TimeGrid& grid, const std::function<double(double)>& y0, double n);

std::vector<SweepRow> exterior_sweep(FractionalOrder s, const std::vector<double>& h_sequence,
                                     const ExteriorGeometry& geom, double T, std::size_t M,
                                     const std::function<double(double)>& y0, HumSettings settings);

}  // namespace fraclap
