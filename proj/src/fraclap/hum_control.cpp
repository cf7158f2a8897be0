#include "fraclap/hum_control.hpp"

#include "fraclap/errors.hpp"

#include <cmath>

namespace fraclap {

LinearHeatControl::LinearHeatControl(std::shared_ptr<const EulerPropagator> prop, SymTridiagonalMatrix gram,
                                     NodalVector mask, double scale, std::shared_ptr<const ModalBasis> modal)
    : prop_(std::move(prop)), gram_(std::move(gram)), mask_(std::move(mask)), scale_(scale), modal_(std::move(modal)) {
  if (!prop_) throw InvalidArgument("hum_control", "missing propagator");
  if (gram_.order() != prop_->size() || static_cast<std::size_t>(mask_.size()) != prop_->size()) {
    throw DimensionError("hum_control", "control data does not match the state size");
  }
  if (modal_) {
    const auto n = static_cast<Eigen::Index>(size());
    if (modal_->phi.rows() != n || modal_->phi.cols() != n || modal_->lambda.size() != n) {
      throw DimensionError("hum_control", "modal basis does not match the state size");
    }
    Eigen::Index first = -1, last = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask_[i] != 0.0) {
        if (first < 0) first = i;
        last = i;
      }
    }
    if (first < 0 || mask_.segment(first, last - first + 1).minCoeff() != 1.0) {
      throw InvalidArgument("hum_control", "modal sweeps need one contiguous block of control nodes");
    }
    first_active_ = first;
    n_active_ = last - first + 1;
  }
}

Eigen::MatrixXd LinearHeatControl::modal_sweep(const NodalVector& y0, const Trajectory* u) const {
  const std::size_t M = grid().M();
  const double dt = grid().dt();
  const Eigen::MatrixXd& phi = modal_->phi;
  const Eigen::ArrayXd r = 1.0 / (1.0 + dt * modal_->lambda.array());

  Eigen::MatrixXd loads;
  if (u) {
    // scale * G u^{m+1} on the active block; G vanishes elsewhere
    const SymTridiagonalMatrix& G = prop_->control();
    Eigen::MatrixXd gu(n_active_, static_cast<Eigen::Index>(M - 1));
    for (std::size_t m = 1; m < M; ++m) {
      const NodalVector full = G.apply(u->at(m + 1));
      gu.col(static_cast<Eigen::Index>(m - 1)) = full.segment(first_active_, n_active_);
    }
    loads.noalias() = phi.middleRows(first_active_, n_active_).transpose() * gu;
  }

  Eigen::MatrixXd coords(phi.cols(), static_cast<Eigen::Index>(M));
  Eigen::ArrayXd c = phi.transpose() * prop_->mass().apply(y0);
  coords.col(0) = c.matrix();
  for (std::size_t m = 1; m < M; ++m) {
    if (u) c += dt * loads.col(static_cast<Eigen::Index>(m - 1)).array();
    c *= r;
    coords.col(static_cast<Eigen::Index>(m)) = c.matrix();
  }
  return coords;
}

Trajectory LinearHeatControl::trajectory(const NodalVector& y0, const Trajectory* u) const {
  if (!modal_) return forward_solve(*prop_, y0, u);
  if (static_cast<std::size_t>(y0.size()) != size()) throw DimensionError("hum_control", "initial datum size");
  const Eigen::MatrixXd states = modal_->phi * modal_sweep(y0, u);
  Trajectory y(grid(), size());
  for (std::size_t m = 1; m <= grid().M(); ++m) y.at(m) = states.col(static_cast<Eigen::Index>(m - 1));
  return y;
}

NodalVector LinearHeatControl::terminal(const NodalVector& y0, const Trajectory* u) const {
  if (!modal_) return forward_terminal(*prop_, y0, u);
  if (static_cast<std::size_t>(y0.size()) != size()) throw DimensionError("hum_control", "initial datum size");
  if (u && (u->size() != size() || u->grid().M() != grid().M())) {
    throw DimensionError("hum_control", "control trajectory does not match the system");
  }
  const Eigen::MatrixXd coords = modal_sweep(y0, u);
  return modal_->phi * coords.col(coords.cols() - 1);
}

Trajectory LinearHeatControl::adjoint_control(const NodalVector& q) const {
  Trajectory u(grid(), size());
  const std::size_t M = grid().M();
  if (!modal_) {
    const Trajectory p = adjoint_solve(*prop_, q);
    for (std::size_t m = 1; m < M; ++m) u.at(m + 1) = scale_ * mask_.cwiseProduct(p.at(m));
    return u;
  }
  if (static_cast<std::size_t>(q.size()) != size()) throw DimensionError("hum_control", "terminal datum size");
  const Eigen::ArrayXd r = 1.0 / (1.0 + grid().dt() * modal_->lambda.array());
  // p^m = phi e^m with e^M = phi' M q and e^m = r .* e^{m+1}
  Eigen::MatrixXd e(modal_->phi.cols(), static_cast<Eigen::Index>(M - 1));
  Eigen::ArrayXd c = modal_->phi.transpose() * prop_->mass().apply(q);
  for (std::size_t m = M - 1; m >= 1; --m) {
    c *= r;
    e.col(static_cast<Eigen::Index>(m - 1)) = c.matrix();
  }
  Eigen::MatrixXd active;
  active.noalias() = scale_ * (modal_->phi.middleRows(first_active_, n_active_) * e);
  for (std::size_t m = 1; m < M; ++m) {
    u.at(m + 1).segment(first_active_, n_active_) = active.col(static_cast<Eigen::Index>(m - 1));
  }
  return u;
}

double LinearHeatControl::control_inner(const Trajectory& u, const Trajectory& v) const {
  double sum = 0.0;
  for (std::size_t m = 2; m <= grid().M(); ++m) sum += gram_.inner(u.at(m), v.at(m));
  return grid().dt() * sum;
}

std::shared_ptr<const ModalBasis> make_modal_basis(const SymDenseMatrix& A, const SymTridiagonalMatrix& M) {
  const SpectralOracle oracle(A.dense(), M.to_dense());
  return std::make_shared<const ModalBasis>(ModalBasis{oracle.modes(), oracle.eigenvalues()});
}

LinearHeatControl make_interior_system(const InteriorProblem& problem, bool modal) {
  const SymDenseMatrix A = assemble_stiffness(problem.mesh, problem.s);
  const SymTridiagonalMatrix M = assemble_mass(problem.mesh);
  const SymTridiagonalMatrix B = assemble_control_matrix(problem.mesh, problem.region);
  auto prop = std::make_shared<const EulerPropagator>(M, A.dense(), B, problem.grid);
  return LinearHeatControl(std::move(prop), B, control_mask(problem.mesh, problem.region), 1.0,
                           modal ? make_modal_basis(A, M) : nullptr);
}

double penalty_rule(double h, FractionalOrder s) {
  if (!(h > 0.0)) throw InvalidArgument("hum_control", "mesh size must be positive");
  return s.value() < 0.5 ? std::pow(h, 4.0 * s.value()) : h * h;
}

double dual_functional(const LinearHeatControl& sys, const NodalVector& pT, const NodalVector& y0, double beta) {
  const Trajectory u = sys.adjoint_control(pT);
  const NodalVector xi = sys.terminal(y0, nullptr);
  return 0.5 * sys.control_inner(u, u) + 0.5 * beta * sys.state_inner(pT, pT) + sys.state_inner(pT, xi);
}

NodalVector dual_gradient(const LinearHeatControl& sys, const NodalVector& pT, const NodalVector& y0, double beta) {
  const Trajectory u = sys.adjoint_control(pT);
  return sys.terminal(y0, &u) + beta * pT;
}

HumResult cg_minimize(const LinearHeatControl& sys, const NodalVector& y0, const HumSettings& settings) {
  if (!(settings.beta > 0.0) || !(settings.cg_tol > 0.0) || settings.cg_max_iter == 0) {
    throw InvalidArgument("hum_control", "beta, cg_tol and cg_max_iter must be positive");
  }
  if (static_cast<std::size_t>(y0.size()) != sys.size()) throw DimensionError("hum_control", "initial datum size");
  const double beta = settings.beta;
  auto inner = [&](const NodalVector& a, const NodalVector& b) { return sys.state_inner(a, b); };
  auto apply = [&](const NodalVector& d) {
    const Trajectory u = sys.adjoint_control(d);
    NodalVector out = sys.terminal(NodalVector::Zero(d.size()), &u);
    out += beta * d;
    return out;
  };

  const NodalVector xi = sys.terminal(y0, nullptr);
  NodalVector p = NodalVector::Zero(y0.size());
  NodalVector g = xi;  // gradient at pT = 0
  const double g0 = std::sqrt(inner(g, g));
  HumResult result{p, sys.zero_control(), sys.trajectory(y0, nullptr), 0, 0, 0, 0, true, 0.0, {0.0}};

  if (g0 > 0.0) {
    NodalVector d = -g;
    double gg = inner(g, g);
    bool converged = false;
    std::size_t it = 0;
    double residual = 1.0;
    while (it < settings.cg_max_iter) {
      const NodalVector q = apply(d);
      const double curvature = inner(d, q);
      if (!(curvature > 0.0)) throw NonConvergence("hum_control", "CG lost positive curvature", residual);
      const double alpha = gg / curvature;
      p += alpha * d;
      g += alpha * q;
      ++it;
      // J(p) = 1/2 <p, g + xi> since g = Lambda p + xi
      result.j_history.push_back(0.5 * inner(p, g + xi));
      const double gg_new = inner(g, g);
      residual = std::sqrt(gg_new) / g0;
      if (residual <= settings.cg_tol) {
        converged = true;
        break;
      }
      d = -g + (gg_new / gg) * d;
      gg = gg_new;
    }
    result.iterations = it;
    result.converged = converged;
    result.residual = residual;
    if (!converged && settings.require_convergence) {
      throw NonConvergence("hum_control", "CG did not reach tolerance in " + std::to_string(it) + " iterations",
                           residual);
    }
    result.p_T = p;
    result.control = sys.adjoint_control(p);
    result.y = sys.trajectory(y0, &result.control);
  }

  const double cost_sq = sys.control_inner(result.control, result.control);
  const NodalVector& yM = result.y.terminal();
  const double term_sq = sys.state_inner(yM, yM);
  result.cost = std::sqrt(cost_sq);
  result.terminal_norm = std::sqrt(term_sq);
  result.optimal_energy = 0.5 * cost_sq + term_sq / (2.0 * beta);
  return result;
}

double primal_functional(const LinearHeatControl& sys, const Trajectory& u, const NodalVector& y0, double beta) {
  const NodalVector yM = sys.terminal(y0, &u);
  return 0.5 * sys.control_inner(u, u) + sys.state_inner(yM, yM) / (2.0 * beta);
}

Trajectory primal_gradient(const LinearHeatControl& sys, const Trajectory& u, const NodalVector& y0, double beta) {
  const NodalVector yM = sys.terminal(y0, &u);
  Trajectory g = sys.adjoint_control(yM);
  g *= 1.0 / beta;
  // only controls at levels 2..M and on active nodes carry weight
  for (std::size_t m = 2; m <= g.grid().M(); ++m) g.at(m) += sys.mask().cwiseProduct(u.at(m));
  return g;
}

std::vector<SweepRow> diagnostics_sweep(FractionalOrder s, const std::vector<double>& h_sequence, double a,
                                        double b, const ControlRegion& region, double T, std::size_t M,
                                        const std::function<double(double)>& y0, HumSettings settings,
                                        bool modal) {
  for (std::size_t i = 1; i < h_sequence.size(); ++i) {
    if (!(h_sequence[i] < h_sequence[i - 1])) throw InvalidArgument("hum_control", "mesh sizes must decrease");
  }
  std::vector<SweepRow> rows;
  for (double h : h_sequence) {
    const InteriorProblem problem{s, UniformMesh1D::with_step(a, b, h), region, TimeGrid(T, M)};
    const LinearHeatControl sys = make_interior_system(problem, modal);
    settings.beta = penalty_rule(problem.mesh.h(), s);
    const HumResult r = cg_minimize(sys, interpolate(problem.mesh, y0), settings);
    rows.push_back({problem.mesh.h(), settings.beta, r.cost, r.optimal_energy, r.terminal_norm, r.iterations});
  }
  return rows;
}

}  // namespace fraclap
