#include "fraclap/heat_solver.hpp"

#include "fraclap/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace fraclap {

TimeGrid::TimeGrid(double T, std::size_t M) : T_(T), M_(M) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("heat_solver", "time horizon must be positive");
  if (M < 2) throw InvalidArgument("heat_solver", "time grid needs at least two levels");
}

ControlRegion::ControlRegion(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo < hi)) throw InvalidArgument("heat_solver", "control region must satisfy lo < hi");
}

Trajectory::Trajectory(const TimeGrid& grid, std::size_t n)
    : grid_(grid), n_(n), levels_(grid.M(), NodalVector::Zero(static_cast<Eigen::Index>(n))) {}

Trajectory& Trajectory::operator+=(const Trajectory& other) {
  axpy(1.0, other);
  return *this;
}

Trajectory& Trajectory::operator*=(double c) {
  for (auto& v : levels_) v *= c;
  return *this;
}

void Trajectory::axpy(double c, const Trajectory& x) {
  if (x.levels_.size() != levels_.size() || x.n_ != n_) throw DimensionError("heat_solver", "trajectory shapes differ");
  for (std::size_t m = 0; m < levels_.size(); ++m) levels_[m] += c * x.levels_[m];
}

SymTridiagonalMatrix assemble_control_matrix(const UniformMesh1D& mesh, const ControlRegion& region) {
  if (region.lo < mesh.a() - 1e-12 || region.hi > mesh.b() + 1e-12) {
    throw InvalidArgument("heat_solver", "control region leaves the mesh interval");
  }
  const std::size_t n = mesh.n_interior();
  const double h = mesh.h();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(n - 1);

  // On element [x_e, x_e + h] with t = (x - x_e)/h the hats are 1 - t and t;
  // integrate the three products over the clipped range [t0, t1].
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const double x0 = mesh.node(e);
    const double t0 = std::clamp((region.lo - x0) / h, 0.0, 1.0);
    const double t1 = std::clamp((region.hi - x0) / h, 0.0, 1.0);
    if (!(t1 > t0)) continue;
    auto cube = [](double t) { return t * t * t; };
    const double right_right = h * (cube(t1) - cube(t0)) / 3.0;                 // t^2
    const double left_left = h * (cube(1.0 - t0) - cube(1.0 - t1)) / 3.0;       // (1-t)^2
    const double left_right = h * ((t1 * t1 - t0 * t0) / 2.0 - (cube(t1) - cube(t0)) / 3.0);
    // local node e has interior index e - 1, node e + 1 has index e
    if (e >= 1) diag[e - 1] += left_left;
    if (e + 1 <= n) diag[e] += right_right;
    if (e >= 1 && e + 1 <= n) off[e - 1] += left_right;
  }
  return SymTridiagonalMatrix(std::move(diag), std::move(off));
}

NodalVector control_mask(const UniformMesh1D& mesh, const ControlRegion& region) {
  NodalVector mask = NodalVector::Zero(mesh.n_interior());
  for (std::size_t j = 0; j < mesh.n_interior(); ++j) {
    const double x = mesh.interior_node(j);
    const double lo = std::max(x - mesh.h(), region.lo);
    const double hi = std::min(x + mesh.h(), region.hi);
    if (hi - lo > 1e-12 * mesh.h()) mask[j] = 1.0;
  }
  return mask;
}

EulerPropagator::EulerPropagator(const SymTridiagonalMatrix& mass, const Eigen::MatrixXd& op,
                                 const SymTridiagonalMatrix& control, const TimeGrid& grid)
    : mass_(mass), control_(control), grid_(grid) {
  const auto n = static_cast<Eigen::Index>(mass.order());
  if (op.rows() != n || op.cols() != n || control.order() != mass.order()) {
    throw DimensionError("heat_solver", "propagator matrices are not conformable");
  }
  Eigen::MatrixXd system = grid.dt() * op;
  system += mass.to_dense();
  factor_.compute(system);
  if (factor_.info() != Eigen::Success) throw SolveError("heat_solver", "implicit Euler matrix is not positive definite");

  // one residual probe per factorization
  const NodalVector probe = NodalVector::LinSpaced(n, 1.0, 2.0);
  const NodalVector x = factor_.solve(probe);
  const double residual = (system * x - probe).norm() / probe.norm();
  if (!(residual <= 1e-10)) {
    throw SolveError("heat_solver", "implicit Euler residual " + std::to_string(residual) + " above 1e-10");
  }
}

NodalVector EulerPropagator::solve(const NodalVector& rhs) const { return factor_.solve(rhs); }

namespace {

void check_control(const EulerPropagator& prop, const Trajectory* u) {
  if (u && (u->size() != prop.size() || u->grid().M() != prop.grid().M())) {
    throw DimensionError("heat_solver", "control trajectory does not match the propagator");
  }
}

NodalVector step(const EulerPropagator& prop, const NodalVector& y, const Trajectory* u, std::size_t next) {
  NodalVector rhs = prop.mass().apply(y);
  if (u) rhs += prop.grid().dt() * prop.control().apply(u->at(next));
  return prop.solve(rhs);
}

}  // namespace

Trajectory forward_solve(const EulerPropagator& prop, const NodalVector& y0, const Trajectory* u) {
  if (static_cast<std::size_t>(y0.size()) != prop.size()) throw DimensionError("heat_solver", "initial datum size");
  check_control(prop, u);
  Trajectory y(prop.grid(), prop.size());
  y.at(1) = y0;
  for (std::size_t m = 1; m < prop.grid().M(); ++m) y.at(m + 1) = step(prop, y.at(m), u, m + 1);
  return y;
}

NodalVector forward_terminal(const EulerPropagator& prop, const NodalVector& y0, const Trajectory* u) {
  if (static_cast<std::size_t>(y0.size()) != prop.size()) throw DimensionError("heat_solver", "initial datum size");
  check_control(prop, u);
  NodalVector y = y0;
  for (std::size_t m = 1; m < prop.grid().M(); ++m) y = step(prop, y, u, m + 1);
  return y;
}

Trajectory adjoint_solve(const EulerPropagator& prop, const NodalVector& pT) {
  if (static_cast<std::size_t>(pT.size()) != prop.size()) throw DimensionError("heat_solver", "terminal datum size");
  Trajectory p(prop.grid(), prop.size());
  const std::size_t M = prop.grid().M();
  p.at(M) = pT;
  for (std::size_t m = M - 1; m >= 1; --m) p.at(m) = prop.solve(prop.mass().apply(p.at(m + 1)));
  return p;
}

SpectralOracle::SpectralOracle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M) : M_(M) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, M);
  if (solver.info() != Eigen::Success) throw OracleError("generalized eigensolver failed");
  lambda_ = solver.eigenvalues();
  phi_ = solver.eigenvectors();
  if (!(lambda_.minCoeff() > 0.0)) throw OracleError("generalized eigenvalues are not positive");
}

NodalVector SpectralOracle::solve(const NodalVector& y0, double t) const {
  const Eigen::VectorXd coeffs = phi_.transpose() * (M_ * y0);
  const Eigen::VectorXd decay = (-t * lambda_.array()).exp().matrix();
  return phi_ * coeffs.cwiseProduct(decay);
}

NodalVector spectral_oracle_solve(const SymDenseMatrix& A, const SymTridiagonalMatrix& M, const NodalVector& y0,
                                  double t) {
  return SpectralOracle(A.dense(), M.to_dense()).solve(y0, t);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const UniformMesh1D& mesh,
                          std::size_t first_level) {
  if (traj.size() != mesh.n_interior()) throw DimensionError("heat_solver", "trajectory does not match mesh");
  for (std::size_t m = first_level; m <= traj.grid().M(); ++m) {
    const double t = traj.grid().time(m);
    const NodalVector& v = traj.at(m);
    for (std::size_t j = 0; j < mesh.n_interior(); ++j) {
      os << t << ',' << mesh.interior_node(j) << ',' << v[static_cast<Eigen::Index>(j)] << '\n';
    }
  }
}

}  // namespace fraclap
