#include "fraclap/constrained_control.hpp"

#include "fraclap/errors.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fraclap {

TrajectoryTarget make_trajectory_target(const LinearHeatControl& sys, NodalVector y_hat0, double u_level) {
  if (!(u_level > 0.0)) throw InvalidArgument("constrained_control", "target control must be strictly positive");
  if (static_cast<std::size_t>(y_hat0.size()) != sys.size()) {
    throw DimensionError("constrained_control", "target initial datum size");
  }
  Trajectory u_hat = sys.zero_control();
  for (std::size_t m = 2; m <= sys.grid().M(); ++m) u_hat.at(m) = u_level * sys.mask();
  NodalVector y_hat_T = sys.terminal(y_hat0, &u_hat);
  return TrajectoryTarget{std::move(y_hat0), std::move(u_hat), std::move(y_hat_T)};
}

namespace {

// Terminal response to unit controls, one column per (level, active node),
// levels 2..M in order. Only the forward scheme is used, so the map is the
// same one the trajectory solver applies.
struct ReachMap {
  std::vector<Eigen::Index> active;
  Eigen::MatrixXd L;  // n x (active * (M - 1))
};

ReachMap build_reach_map(const LinearHeatControl& sys) {
  const EulerPropagator& prop = sys.propagator();
  const auto n = static_cast<Eigen::Index>(sys.size());
  const std::size_t M = sys.grid().M();
  const double dt = sys.grid().dt();

  ReachMap map;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sys.mask()[i] != 0.0) map.active.push_back(i);
  }
  if (map.active.empty()) throw InvalidArgument("constrained_control", "control region holds no nodes");
  const auto na = static_cast<Eigen::Index>(map.active.size());

  Eigen::MatrixXd block(n, na);
  for (Eigen::Index k = 0; k < na; ++k) {
    NodalVector e = NodalVector::Zero(n);
    e[map.active[k]] = 1.0;
    block.col(k) = prop.solve(dt * prop.control().apply(e));
  }

  const auto levels = static_cast<Eigen::Index>(M - 1);
  map.L.resize(n, na * levels);
  // a unit control at level m reaches the end after M - m further steps
  for (std::size_t m = M; m >= 2; --m) {
    const auto offset = static_cast<Eigen::Index>(m - 2) * na;
    map.L.middleCols(offset, na) = block;
    if (m > 2) {
      for (Eigen::Index k = 0; k < na; ++k) block.col(k) = prop.solve(prop.mass().apply(block.col(k)));
    }
  }
  return map;
}

}  // namespace

Eigen::VectorXd bounded_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double upper) {
  if (!(upper >= 0.0)) throw InvalidArgument("constrained_control", "upper bound must be nonnegative");
  if (A.rows() != b.size()) throw DimensionError("constrained_control", "least-squares operands do not conform");
  enum class Slot { lower, upper, free };
  const Eigen::Index n = A.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (upper == 0.0 || n == 0) return x;
  std::vector<Slot> slot(static_cast<std::size_t>(n), Slot::lower);
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), n)) * std::max(b.norm(), 1.0);
  auto at = [&](Eigen::Index j) -> Slot& { return slot[static_cast<std::size_t>(j)]; };

  std::vector<Eigen::Index> free;
  Eigen::VectorXd z;
  // least squares over the free set with the others held at their bounds
  auto solve_free = [&]() {
    free.clear();
    Eigen::VectorXd rhs = b;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (at(j) == Slot::free) free.push_back(j);
      if (at(j) == Slot::upper) rhs -= upper * A.col(j);
    }
    Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(free.size()));
    if (free.empty()) {
      z.resize(0);
      return;
    }
    for (std::size_t k = 0; k < free.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = A.col(free[k]);
    z = sub.colPivHouseholderQr().solve(rhs);
  };

  for (Eigen::Index outer = 0; outer < 4 * n; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);  // minus the gradient
    Eigen::Index enter = -1;
    double worst = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (blocked[static_cast<std::size_t>(j)]) continue;
      const double push = at(j) == Slot::lower ? w[j] : at(j) == Slot::upper ? -w[j] : 0.0;
      if (push > worst) {
        worst = push;
        enter = j;
      }
    }
    if (enter < 0) break;
    const Slot came_from = at(enter);
    at(enter) = Slot::free;

    for (Eigen::Index inner = 0; inner <= n; ++inner) {
      solve_free();
      if (free.empty()) break;
      bool inside = true;
      for (Eigen::Index k = 0; k < z.size(); ++k) inside = inside && z[k] > 0.0 && z[k] < upper;
      if (inside) {
        for (std::size_t k = 0; k < free.size(); ++k) x[free[k]] = z[static_cast<Eigen::Index>(k)];
        std::fill(blocked.begin(), blocked.end(), false);
        break;
      }
      if (inner == 0) {
        // the entering variable must move off its bound; round-off can stall it
        const auto pos = static_cast<Eigen::Index>(std::find(free.begin(), free.end(), enter) - free.begin());
        const double ze = z[pos];
        if ((came_from == Slot::lower && ze <= 0.0) || (came_from == Slot::upper && ze >= upper)) {
          at(enter) = came_from;
          blocked[static_cast<std::size_t>(enter)] = true;
          break;
        }
      }
      // walk from x towards z until the first free variable meets a bound
      double alpha = 1.0;
      Eigen::Index hit = -1;
      for (std::size_t k = 0; k < free.size(); ++k) {
        const double xk = x[free[k]], zk = z[static_cast<Eigen::Index>(k)];
        double a = 1.0;
        if (zk <= 0.0) a = xk / (xk - zk);
        else if (zk >= upper) a = (upper - xk) / (zk - xk);
        if (a < alpha) {
          alpha = a;
          hit = free[k];
        }
      }
      for (std::size_t k = 0; k < free.size(); ++k) {
        double& xk = x[free[k]];
        xk += alpha * (z[static_cast<Eigen::Index>(k)] - xk);
      }
      for (Eigen::Index j : free) {
        const double slack = 1e-12 * std::max(upper == std::numeric_limits<double>::infinity() ? 1.0 : upper, 1.0);
        if (j == hit || x[j] <= slack || x[j] >= upper - slack) {
          const bool low = x[j] <= 0.5 * upper;
          x[j] = low ? 0.0 : upper;
          at(j) = low ? Slot::lower : Slot::upper;
        }
      }
    }
  }
  return x;
}

ConstrainedResult constrained_tracking(const LinearHeatControl& sys, const NodalVector& y0,
                                       const TrajectoryTarget& target, const ConstrainedSettings& settings) {
  if (!(settings.beta > 0.0) || !(settings.gap_rel > 0.0)) {
    throw InvalidArgument("constrained_control", "beta and gap_rel must be positive");
  }
  if (static_cast<std::size_t>(y0.size()) != sys.size() ||
      static_cast<std::size_t>(target.y_hat_T.size()) != sys.size()) {
    throw DimensionError("constrained_control", "initial datum or target size");
  }

  const ReachMap map = build_reach_map(sys);
  const SymTridiagonalMatrix& mass = sys.propagator().mass();
  const NodalVector d = target.y_hat_T - sys.terminal(y0, nullptr);
  // |v|_M = |U v| with M = U'U
  const Eigen::MatrixXd U = mass.to_dense().llt().matrixU();
  const Eigen::MatrixXd A = U * map.L;
  const Eigen::VectorXd b = U * d;

  // Beyond the largest entry of the nonnegative least-squares control the
  // gap cannot shrink any further, so the bound search stops there.
  const Eigen::VectorXd unbounded = bounded_least_squares(A, b, std::numeric_limits<double>::infinity());
  const double t_hi = unbounded.size() > 0 ? unbounded.maxCoeff() : 0.0;

  ConstrainedResult result{sys.zero_control(), Trajectory(sys.grid(), sys.size()), NodalVector()};
  result.min_gap = (A * unbounded - b).norm();

  // F(t) = t / 2 + gap(t)^2 / (2 beta) is convex in the bound t
  std::size_t evaluations = 0;
  auto objective = [&](double t) {
    ++evaluations;
    const Eigen::VectorXd x = bounded_least_squares(A, b, std::max(t, 0.0));
    return 0.5 * t + (A * x - b).squaredNorm() / (2.0 * settings.beta);
  };
  double t_best = 0.0;
  if (t_hi > 0.0) {
    std::uintmax_t max_iter = settings.max_iter;
    const auto found = boost::math::tools::brent_find_minima(objective, 0.0, t_hi, settings.bits, max_iter);
    t_best = found.first;
    result.converged = max_iter < settings.max_iter;
    // the end points are candidates too, Brent only samples the interior
    if (objective(t_hi) < found.second) t_best = t_hi;
  } else {
    result.converged = true;
  }
  const Eigen::VectorXd x = bounded_least_squares(A, b, t_best);
  result.iterations = evaluations;

  if (!x.allFinite() || (x.size() > 0 && x.minCoeff() < 0.0)) {
    throw NumericError("constrained_control", "control left the admissible set");
  }
  const auto na = static_cast<Eigen::Index>(map.active.size());
  for (std::size_t m = 2; m <= sys.grid().M(); ++m) {
    for (Eigen::Index k = 0; k < na; ++k) {
      result.control.at(m)[map.active[k]] = x[static_cast<Eigen::Index>(m - 2) * na + k];
    }
  }
  result.y = sys.trajectory(y0, &result.control);
  result.target_T = target.y_hat_T;
  const NodalVector gap = result.y.terminal() - target.y_hat_T;
  result.terminal_gap = std::sqrt(mass.inner(gap, gap));
  result.gap_tol = settings.gap_rel * std::sqrt(mass.inner(target.y_hat_T, target.y_hat_T));
  result.feasible = result.terminal_gap <= result.gap_tol;
  result.T_used = sys.grid().T();
  result.control_max = x.size() > 0 ? x.maxCoeff() : 0.0;
  result.objective = 0.5 * result.control_max + result.terminal_gap * result.terminal_gap / (2.0 * settings.beta);
  double lowest = 0.0;
  for (std::size_t m = 1; m <= sys.grid().M(); ++m) lowest = std::min(lowest, result.y.at(m).minCoeff());
  result.state_min = lowest;
  return result;
}

ConstrainedResult solve_constrained(const ConstrainedProblem& problem, double T, const ConstrainedSettings& settings) {
  const InteriorProblem interior{problem.s, problem.mesh, problem.region, TimeGrid(T, problem.M)};
  const LinearHeatControl sys = make_interior_system(interior, false);
  const TrajectoryTarget target =
      make_trajectory_target(sys, interpolate(problem.mesh, problem.y_hat0), problem.u_hat);
  return constrained_tracking(sys, interpolate(problem.mesh, problem.y0), target, settings);
}

MinTimeResult min_time_estimate(const ConstrainedProblem& problem, double T_lo, double T_hi,
                                const ConstrainedSettings& settings, double width) {
  if (!(T_lo > 0.0) || !(T_hi > T_lo) || !(width > 0.0)) {
    throw InvalidArgument("constrained_control", "bracket must satisfy 0 < T_lo < T_hi and width > 0");
  }
  MinTimeResult out;
  auto probe = [&](double T) {
    ConstrainedResult r = solve_constrained(problem, T, settings);
    out.trace.push_back({T, r.terminal_gap, r.gap_tol, r.feasible});
    return r;
  };

  ConstrainedResult at_lo = probe(T_lo);
  ConstrainedResult at_hi = probe(T_hi);
  if (at_lo.feasible == at_hi.feasible) {
    throw BracketError(at_lo.feasible ? "both bracket ends are feasible"
                                                             : "both bracket ends are infeasible");
  }
  if (at_lo.feasible) {
    throw BracketError("lower end feasible while upper end is not");
  }
  double lo = T_lo, hi = T_hi;
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    ConstrainedResult r = probe(mid);
    if (r.feasible) {
      hi = mid;
      at_hi = std::move(r);
    } else {
      lo = mid;
    }
  }
  out.lo = lo;
  out.hi = hi;
  out.T_min = 0.5 * (lo + hi);
  out.at_hi = std::move(at_hi);
  return out;
}

double mass_support_fraction(const Trajectory& control, const NodalVector& mask, double share) {
  if (!(share > 0.0 && share <= 1.0)) throw InvalidArgument("constrained_control", "share must lie in (0, 1]");
  std::vector<double> cells;
  for (std::size_t m = 2; m <= control.grid().M(); ++m) {
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      if (mask[i] != 0.0) cells.push_back(std::abs(control.at(m)[i]));
    }
  }
  if (cells.empty()) return 0.0;
  const double total = std::accumulate(cells.begin(), cells.end(), 0.0);
  if (total == 0.0) return 0.0;
  std::sort(cells.begin(), cells.end(), std::greater<>());
  double acc = 0.0;
  std::size_t count = 0;
  for (double c : cells) {
    acc += c;
    ++count;
    if (acc >= share * total) break;
  }
  return static_cast<double>(count) / static_cast<double>(cells.size());
}

}  // namespace fraclap
