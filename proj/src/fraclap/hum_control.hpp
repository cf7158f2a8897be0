#pragma once

// Penalized HUM: minimize the dual functional
//   J(pT) = 1/2 ||L* pT||_U^2 + beta/2 |pT|_M^2 + <pT, xi^M>_M
// by conjugate gradients, where L maps controls to terminal states and xi^M
// is the free evolution of y0. The control is recovered as u = L* pT.

#include "fraclap/heat_solver.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace fraclap {

// Eigenpairs of A phi = lambda M phi with M-orthonormal modes. With them an
// implicit Euler step is the diagonal map c -> c / (1 + dt lambda).
struct ModalBasis {
  Eigen::MatrixXd phi;
  Eigen::VectorXd lambda;
};

// Controlled implicit Euler system whose forward load is scale * G u and whose
// control norm is sum_m dt u^m' G u^m. The adjoint control of a terminal
// datum q is u^{m+1} = scale * mask .* p^m with p the adjoint trajectory; this
// is the exact transpose of the forward map.
//
// When a modal basis is supplied, forward and adjoint sweeps run in modal
// coordinates (same scheme, batched products) instead of through the
// Cholesky factor. The mask must then be one contiguous block of nodes.
class LinearHeatControl {
 public:
  LinearHeatControl(std::shared_ptr<const EulerPropagator> prop, SymTridiagonalMatrix gram, NodalVector mask,
                    double scale, std::shared_ptr<const ModalBasis> modal = nullptr);

  const EulerPropagator& propagator() const noexcept { return *prop_; }
  const TimeGrid& grid() const noexcept { return prop_->grid(); }
  std::size_t size() const noexcept { return prop_->size(); }
  const NodalVector& mask() const noexcept { return mask_; }

  bool is_modal() const noexcept { return modal_ != nullptr; }

  Trajectory trajectory(const NodalVector& y0, const Trajectory* u) const;
  NodalVector terminal(const NodalVector& y0, const Trajectory* u) const;
  Trajectory adjoint_control(const NodalVector& q) const;

  double state_inner(const NodalVector& a, const NodalVector& b) const { return prop_->mass().inner(a, b); }
  double control_inner(const Trajectory& u, const Trajectory& v) const;
  Trajectory zero_control() const { return Trajectory(grid(), size()); }

 private:
  std::shared_ptr<const EulerPropagator> prop_;
  SymTridiagonalMatrix gram_;
  NodalVector mask_;
  double scale_;
  std::shared_ptr<const ModalBasis> modal_;
  Eigen::Index first_active_ = 0;
  Eigen::Index n_active_ = 0;

  // modal coordinates of every level, columns 1..M
  Eigen::MatrixXd modal_sweep(const NodalVector& y0, const Trajectory* u) const;
};

// Interior control of (-Delta)^s on (a, b) acting on omega.
struct InteriorProblem {
  FractionalOrder s;
  UniformMesh1D mesh;
  ControlRegion region;
  TimeGrid grid;
};

// `modal` selects the eigenbasis route for the sweeps.
LinearHeatControl make_interior_system(const InteriorProblem& problem, bool modal = false);
std::shared_ptr<const ModalBasis> make_modal_basis(const SymDenseMatrix& A, const SymTridiagonalMatrix& M);

// beta = h^{4s} for s < 1/2 and h^2 otherwise.
double penalty_rule(double h, FractionalOrder s);

struct HumSettings {
  double beta = 1e-4;
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 2000;
  bool require_convergence = true;  // throw NonConvergence on stall
};

struct HumResult {
  NodalVector p_T;
  Trajectory control;
  Trajectory y;
  double cost = 0.0;
  double optimal_energy = 0.0;
  double terminal_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
  std::vector<double> j_history;  // J at the start and after every iteration
};

double dual_functional(const LinearHeatControl& sys, const NodalVector& pT, const NodalVector& y0, double beta);

// Representation of the gradient in the M inner product: y^M + beta pT.
NodalVector dual_gradient(const LinearHeatControl& sys, const NodalVector& pT, const NodalVector& y0, double beta);

HumResult cg_minimize(const LinearHeatControl& sys, const NodalVector& y0, const HumSettings& settings);

// Primal penalized functional 1/2 ||u||_U^2 + |y^M|_M^2 / (2 beta) and its
// gradient u + L*(y^M) / beta in the control inner product.
double primal_functional(const LinearHeatControl& sys, const Trajectory& u, const NodalVector& y0, double beta);
Trajectory primal_gradient(const LinearHeatControl& sys, const Trajectory& u, const NodalVector& y0, double beta);

struct SweepRow {
  double h = 0.0;
  double beta = 0.0;
  double cost = 0.0;
  double optimal_energy = 0.0;
  double terminal_norm = 0.0;
  std::size_t iterations = 0;
};

// For each h: beta from penalty_rule, CG solve, record the three diagnostics.
std::vector<SweepRow> diagnostics_sweep(FractionalOrder s, const std::vector<double>& h_sequence, double a,
                                        double b, const ControlRegion& region, double T, std::size_t M,
                                        const std::function<double(double)>& y0, HumSettings settings,
                                        bool modal = true);

}  // namespace fraclap
