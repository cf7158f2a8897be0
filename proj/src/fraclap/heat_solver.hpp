#pragma once

// Implicit Euler for M y' + A y = B u and its exact discrete adjoint.
//
// Time levels are numbered 1..M as in the scheme: level 1 holds the initial
// datum, level m sits at t = (m - 1) dt with dt = T / M, and the control at
// level 1 is never used.

#include "fraclap/fe_core.hpp"

#include <Eigen/Cholesky>

#include <iosfwd>
#include <vector>

namespace fraclap {

class TimeGrid {
 public:
  TimeGrid(double T, std::size_t M);
  double T() const noexcept { return T_; }
  std::size_t M() const noexcept { return M_; }
  double dt() const noexcept { return T_ / static_cast<double>(M_); }
  double time(std::size_t level) const noexcept { return static_cast<double>(level - 1) * dt(); }
  double terminal_time() const noexcept { return time(M_); }

 private:
  double T_;
  std::size_t M_;
};

struct ControlRegion {
  ControlRegion(double lo, double hi);
  double lo;
  double hi;
};

// Nodal vectors at levels 1..M.
class Trajectory {
 public:
  Trajectory(const TimeGrid& grid, std::size_t n);
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return n_; }
  NodalVector& at(std::size_t level) { return levels_.at(level - 1); }
  const NodalVector& at(std::size_t level) const { return levels_.at(level - 1); }
  const NodalVector& terminal() const { return levels_.back(); }

  Trajectory& operator+=(const Trajectory& other);
  Trajectory& operator*=(double c);
  void axpy(double c, const Trajectory& x);

 private:
  TimeGrid grid_;
  std::size_t n_;
  std::vector<NodalVector> levels_;
};

// b_ij = integral over region of phi_i phi_j, exact.
SymTridiagonalMatrix assemble_control_matrix(const UniformMesh1D& mesh, const ControlRegion& region);

// 1 on nodes whose hat support meets the region in a set of positive length.
NodalVector control_mask(const UniformMesh1D& mesh, const ControlRegion& region);

// One factorization of (mass + dt * op) shared by every forward and adjoint
// step on a fixed grid. `control` maps nodal controls to loads.
class EulerPropagator {
 public:
  EulerPropagator(const SymTridiagonalMatrix& mass, const Eigen::MatrixXd& op,
                  const SymTridiagonalMatrix& control, const TimeGrid& grid);

  const TimeGrid& grid() const noexcept { return grid_; }
  const SymTridiagonalMatrix& mass() const noexcept { return mass_; }
  const SymTridiagonalMatrix& control() const noexcept { return control_; }
  std::size_t size() const noexcept { return mass_.order(); }

  // (mass + dt op)^{-1} rhs
  NodalVector solve(const NodalVector& rhs) const;

 private:
  SymTridiagonalMatrix mass_;
  SymTridiagonalMatrix control_;
  TimeGrid grid_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

// Forward scheme M (y^{m+1} - y^m)/dt + A y^{m+1} = B u^{m+1}, y^1 = y0.
// `u` may be null for the free evolution.
Trajectory forward_solve(const EulerPropagator& prop, const NodalVector& y0, const Trajectory* u);
NodalVector forward_terminal(const EulerPropagator& prop, const NodalVector& y0, const Trajectory* u);

// Backward scheme M (p^m - p^{m+1})/dt + A p^m = 0, p^M = pT.
Trajectory adjoint_solve(const EulerPropagator& prop, const NodalVector& pT);

// Exact solution of M y' + A y = 0 through A phi = lambda M phi.
class SpectralOracle {
 public:
  SpectralOracle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M);
  NodalVector solve(const NodalVector& y0, double t) const;
  const Eigen::VectorXd& eigenvalues() const noexcept { return lambda_; }
  // M-orthonormal eigenvectors
  const Eigen::MatrixXd& modes() const noexcept { return phi_; }

 private:
  Eigen::MatrixXd M_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd phi_;
};

NodalVector spectral_oracle_solve(const SymDenseMatrix& A, const SymTridiagonalMatrix& M,
                                  const NodalVector& y0, double t);

// Long-format CSV rows "t,x,value" for the interior nodes of `mesh`.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const UniformMesh1D& mesh,
                          std::size_t first_level = 1);

}  // namespace fraclap
