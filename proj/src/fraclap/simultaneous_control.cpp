#include "fraclap/simultaneous_control.hpp"

#include "fraclap/errors.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <random>
#include <set>

namespace fraclap {

ParameterSet::ParameterSet(std::vector<double> v) : values(std::move(v)) {
  if (values.empty()) throw InvalidArgument("simultaneous_control", "parameter set is empty");
  std::set<double> seen;
  for (double s : values) {
    if (!(s > 0.5 && s < 1.0)) throw InvalidArgument("simultaneous_control", "parameters must lie in (1/2, 1)");
    if (!seen.insert(s).second) throw InvalidArgument("simultaneous_control", "parameters must be distinct");
  }
}

ParameterSet ParameterSet::uniform(std::size_t count, double lo, double hi) {
  if (count == 0 || !(lo < hi)) throw InvalidArgument("simultaneous_control", "need count >= 1 and lo < hi");
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = lo + (static_cast<double>(i) + 0.5) * (hi - lo) / static_cast<double>(count);
  }
  return ParameterSet(std::move(v));
}

OperatorCache::OperatorCache(const ParameterSet& params, const UniformMesh1D& mesh, const ControlRegion& region,
                             const TimeGrid& grid, bool modal)
    : params_(params), mesh_(mesh), grid_(grid) {
  systems_.reserve(params.size());
  for (double s : params.values) {
    systems_.push_back(make_interior_system(InteriorProblem{FractionalOrder(s), mesh, region, grid}, modal));
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_beta(double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("simultaneous_control", "beta must be positive");
}

// Terminal statistics at u, one forward solve per parameter.
struct Terminals {
  double mean_sq = 0.0;
  double max_norm = 0.0;
};

Terminals terminals(const Trajectory& u, const OperatorCache& cache, const NodalVector& y0) {
  Terminals t;
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const NodalVector yT = cache.system(i).terminal(y0, &u);
    const double sq = cache.system(i).state_inner(yT, yT);
    t.mean_sq += sq;
    t.max_norm = std::max(t.max_norm, std::sqrt(sq));
  }
  t.mean_sq /= static_cast<double>(cache.size());
  return t;
}

void finish_trace(OptimizerTrace& trace, const Trajectory& u, const OperatorCache& cache, const NodalVector& y0,
                  double beta) {
  const Terminals t = terminals(u, cache, y0);
  trace.terminal_expectation = t.mean_sq;
  trace.max_terminal_norm = t.max_norm;
  trace.final_functional = 0.5 * cache.control_inner(u, u) + t.mean_sq / (2.0 * beta);
}

}  // namespace

double expected_terminal_functional(const Trajectory& u, const OperatorCache& cache, const NodalVector& y0,
                                    double beta, SolveCounter* counter) {
  check_beta(beta);
  const Terminals t = terminals(u, cache, y0);
  if (counter) counter->pairs += cache.size();
  return 0.5 * cache.control_inner(u, u) + t.mean_sq / (2.0 * beta);
}

Trajectory full_gradient(const Trajectory& u, const OperatorCache& cache, const NodalVector& y0, double beta,
                         SolveCounter* counter, double* value) {
  check_beta(beta);
  Trajectory grad = u;
  const double weight = 1.0 / (beta * static_cast<double>(cache.size()));
  double sum_sq = 0.0;
  // fixed summation order keeps runs bitwise reproducible
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const LinearHeatControl& sys = cache.system(i);
    const NodalVector yT = sys.terminal(y0, &u);
    sum_sq += sys.state_inner(yT, yT);
    grad.axpy(weight, sys.adjoint_control(yT));
  }
  if (counter) counter->pairs += cache.size();
  if (value) {
    *value = 0.5 * cache.control_inner(u, u) + sum_sq / (2.0 * beta * static_cast<double>(cache.size()));
  }
  return grad;
}

Trajectory stochastic_gradient(const Trajectory& u, const OperatorCache& cache, std::size_t i, const NodalVector& y0,
                               double beta, SolveCounter* counter) {
  check_beta(beta);
  const LinearHeatControl& sys = cache.system(i);
  Trajectory grad = u;
  grad.axpy(1.0 / beta, sys.adjoint_control(sys.terminal(y0, &u)));
  if (counter) ++counter->pairs;
  return grad;
}

SimultaneousResult gd_minimize(const OperatorCache& cache, const NodalVector& y0, const GdSettings& settings) {
  check_beta(settings.beta);
  if (!(settings.eta >= 0.0) || !(settings.tol > 0.0) || settings.max_iter == 0) {
    throw InvalidArgument("simultaneous_control", "GD needs eta >= 0, tol > 0, max_iter >= 1");
  }
  const auto start = Clock::now();
  double eta = settings.eta > 0.0 ? settings.eta : 0.5 / (1.0 + 1.0 / settings.beta);
  SolveCounter counter;
  OptimizerTrace trace;
  trace.algorithm = "gd";

  Trajectory u = cache.zero_control();
  Trajectory u_prev = u;
  Trajectory g_prev = u;
  double f_prev = 0.0;
  double g0 = -1.0;
  std::size_t rises = 0;
  while (trace.iterations < settings.max_iter) {
    double f = 0.0;
    Trajectory g = full_gradient(u, cache, y0, settings.beta, &counter, &f);
    ++trace.iterations;
    trace.history.push_back(f);
    const double gnorm = std::sqrt(cache.control_inner(g, g));
    if (g0 < 0.0) g0 = gnorm;

    if (trace.iterations > 1 && f > f_prev) {
      // step too long: go back and halve it
      if (++rises >= 5) throw Divergence("simultaneous_control", "GD functional rose 5 times in a row");
      eta *= 0.5;
      u = u_prev;
      u.axpy(-eta, g_prev);
      continue;
    }
    rises = 0;
    if (gnorm <= settings.tol * g0) {
      trace.converged = true;
      break;
    }
    u_prev = u;
    g_prev = g;
    f_prev = f;
    u.axpy(-eta, g);
  }
  trace.pde_solve_count = counter.pairs;
  trace.step = eta;
  finish_trace(trace, u, cache, y0, settings.beta);
  trace.wall_time = seconds_since(start);
  return {std::move(u), std::move(trace)};
}

SimultaneousResult cg_minimize_simultaneous(const OperatorCache& cache, const NodalVector& y0,
                                            const CgSettings& settings) {
  check_beta(settings.beta);
  if (!(settings.tol > 0.0) || settings.max_iter == 0) {
    throw InvalidArgument("simultaneous_control", "CG needs tol > 0 and max_iter >= 1");
  }
  const auto start = Clock::now();
  SolveCounter counter;
  OptimizerTrace trace;
  trace.algorithm = "cg";
  const NodalVector zero = NodalVector::Zero(y0.size());
  const double weight = 1.0 / (settings.beta * static_cast<double>(cache.size()));

  // b = -(1/(beta |K|)) sum_s L_s^* xi_s with xi_s the free terminal state
  Trajectory b = cache.zero_control();
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const LinearHeatControl& sys = cache.system(i);
    b.axpy(-weight, sys.adjoint_control(sys.terminal(y0, nullptr)));
  }
  counter.pairs += cache.size();

  // (I + Lambda) d with Lambda d = (1/(beta |K|)) sum_s L_s^* L_s d
  auto apply = [&](const Trajectory& d) {
    Trajectory out = d;
    for (std::size_t i = 0; i < cache.size(); ++i) {
      const LinearHeatControl& sys = cache.system(i);
      out.axpy(weight, sys.adjoint_control(sys.terminal(zero, &d)));
    }
    counter.pairs += cache.size();
    return out;
  };

  Trajectory u = cache.zero_control();
  Trajectory r = b;
  const double b_norm = std::sqrt(cache.control_inner(b, b));
  double rr = b_norm * b_norm;
  if (b_norm == 0.0) {
    trace.converged = true;
  } else {
    Trajectory d = r;
    while (trace.iterations < settings.max_iter) {
      const Trajectory q = apply(d);
      ++trace.iterations;
      const double curvature = cache.control_inner(d, q);
      if (!(curvature > 0.0)) {
        throw NonConvergence("simultaneous_control", "CG lost positive curvature", std::sqrt(rr) / b_norm);
      }
      const double alpha = rr / curvature;
      u.axpy(alpha, d);
      r.axpy(-alpha, q);
      const double rr_new = cache.control_inner(r, r);
      // F(u) = 1/2 <u, (I + Lambda) u> - <b, u> + const; since r = b - (I + Lambda) u
      // the quadratic part equals -1/2 <u, r + b>
      trace.history.push_back(-0.5 * cache.control_inner(u, r) - 0.5 * cache.control_inner(u, b));
      if (std::sqrt(rr_new) <= settings.tol * b_norm) {
        trace.converged = true;
        rr = rr_new;
        break;
      }
      d *= rr_new / rr;
      d += r;
      rr = rr_new;
    }
    if (!trace.converged) {
      throw NonConvergence("simultaneous_control", "CG did not reach tolerance", std::sqrt(rr) / b_norm);
    }
  }
  trace.pde_solve_count = counter.pairs;
  finish_trace(trace, u, cache, y0, settings.beta);
  trace.wall_time = seconds_since(start);
  return {std::move(u), std::move(trace)};
}

SimultaneousResult sgd_adam_minimize(const OperatorCache& cache, const NodalVector& y0, const AdamSettings& s) {
  check_beta(s.beta);
  if (!(s.eta > 0.0) || !(s.gamma1 > 0.0 && s.gamma1 < 1.0) || !(s.gamma2 > 0.0 && s.gamma2 < 1.0) ||
      !(s.delta > 0.0) || !(s.tol > 0.0) || s.window == 0 || s.max_iter == 0) {
    throw InvalidArgument("simultaneous_control", "invalid Adam parameters");
  }
  const auto start = Clock::now();
  SolveCounter counter;
  SolveCounter monitor;
  OptimizerTrace trace;
  trace.algorithm = "sgd";

  std::mt19937_64 rng(s.seed);
  std::uniform_int_distribution<std::size_t> pick(0, cache.size() - 1);
  const std::size_t M = cache.grid().M();

  Trajectory u = cache.zero_control();
  Trajectory m = cache.zero_control();
  Trajectory v = cache.zero_control();
  Trajectory window_sum = cache.zero_control();
  Trajectory average = cache.zero_control();
  double f_best = std::numeric_limits<double>::infinity();
  std::size_t rises = 0;
  double p1 = 1.0, p2 = 1.0;  // gamma^k for the standard bias corrections

  while (trace.iterations < s.max_iter) {
    const std::size_t i = cache.size() == 1 ? 0 : pick(rng);
    const Trajectory g = stochastic_gradient(u, cache, i, y0, s.beta, &counter);
    ++trace.iterations;
    p1 *= s.gamma1;
    p2 *= s.gamma2;
    const double c1 = s.standard ? 1.0 - p1 : 1.0 - s.gamma1;
    const double c2 = s.standard ? 1.0 - p2 : 1.0 - s.gamma2;
    // the second moment is averaged with gamma1 unless the standard form is asked for
    const double g2 = s.standard ? s.gamma2 : s.gamma1;
    for (std::size_t lvl = 2; lvl <= M; ++lvl) {
      const auto gl = g.at(lvl).array();
      m.at(lvl) = (s.gamma1 * m.at(lvl).array() + (1.0 - s.gamma1) * gl).matrix();
      v.at(lvl) = (g2 * v.at(lvl).array() + (1.0 - g2) * gl.square()).matrix();
      u.at(lvl).array() -= s.eta * (m.at(lvl).array() / c1) / ((v.at(lvl).array() / c2).sqrt() + s.delta);
    }
    window_sum += u;

    if (trace.iterations % s.window == 0) {
      average = window_sum;
      average *= 1.0 / static_cast<double>(s.window);
      window_sum *= 0.0;
      // F is 1-strongly convex, so F(avg) - F* <= |grad F(avg)|^2 / 2
      double f = 0.0;
      const Trajectory g = full_gradient(average, cache, y0, s.beta, &monitor, &f);
      trace.history.push_back(f);
      if (!std::isfinite(f)) throw Divergence("simultaneous_control", "Adam iterate is no longer finite");
      // window values jitter at the noise floor, so only a clear excess over
      // the best value so far counts as a rise
      if (f > 1.01 * f_best) {
        if (++rises >= 5) throw Divergence("simultaneous_control", "windowed functional rose 5 times in a row");
      } else {
        rises = 0;
      }
      f_best = std::min(f_best, f);
      if (0.5 * cache.control_inner(g, g) <= s.tol * f) {
        trace.converged = true;
        break;
      }
    }
  }
  trace.pde_solve_count = counter.pairs;
  trace.monitor_solve_count = monitor.pairs;
  Trajectory result = trace.converged ? average : u;
  finish_trace(trace, result, cache, y0, s.beta);
  trace.wall_time = seconds_since(start);
  return {std::move(result), std::move(trace)};
}

Conditioning estimate_conditioning(const OperatorCache& cache, double beta, std::size_t iterations) {
  check_beta(beta);
  const NodalVector zero = NodalVector::Zero(static_cast<Eigen::Index>(cache.mesh().n_interior()));
  const double weight = 1.0 / (beta * static_cast<double>(cache.size()));
  // deterministic start inside the range of the adjoints
  Trajectory x = cache.zero_control();
  for (std::size_t i = 0; i < cache.size(); ++i) {
    x.axpy(1.0, cache.system(i).adjoint_control(NodalVector::Ones(zero.size())));
  }
  double lambda = 1.0;
  for (std::size_t k = 0; k < iterations; ++k) {
    const double norm = std::sqrt(cache.control_inner(x, x));
    if (norm == 0.0) break;
    x *= 1.0 / norm;
    Trajectory y = x;
    for (std::size_t i = 0; i < cache.size(); ++i) {
      const LinearHeatControl& sys = cache.system(i);
      y.axpy(weight, sys.adjoint_control(sys.terminal(zero, &x)));
    }
    lambda = cache.control_inner(x, y);
    x = std::move(y);
  }
  Conditioning c;
  c.lambda_max = lambda;
  c.rho = lambda;
  if (c.rho > 1.0) {
    c.c_gd = std::log((c.rho + 1.0) / (c.rho - 1.0));
    c.c_cg = std::log((std::sqrt(c.rho) + 1.0) / (std::sqrt(c.rho) - 1.0));
  }
  return c;
}

std::vector<ComparisonRow> run_comparison(const UniformMesh1D& mesh, const ControlRegion& region,
                                          const TimeGrid& grid, const std::function<double(double)>& y0_fn,
                                          const ComparisonSettings& settings) {
  if (settings.sizes.empty()) throw InvalidArgument("simultaneous_control", "no parameter-set sizes given");
  const NodalVector y0 = interpolate(mesh, y0_fn);
  std::vector<ComparisonRow> rows;
  for (std::size_t K : settings.sizes) {
    if (K == 0) throw InvalidArgument("simultaneous_control", "parameter-set sizes must be positive");
    const OperatorCache cache(ParameterSet::uniform(K, settings.s_lo, settings.s_hi), mesh, region, grid, true);
    if (settings.run_gd) rows.push_back({K, 0, gd_minimize(cache, y0, settings.gd).trace});
    if (settings.run_cg) rows.push_back({K, 0, cg_minimize_simultaneous(cache, y0, settings.cg).trace});
    if (settings.run_sgd) {
      for (std::size_t r = 0; r < std::max<std::size_t>(settings.sgd_seeds, 1); ++r) {
        AdamSettings adam = settings.adam;
        adam.seed = settings.adam.seed + r;
        rows.push_back({K, adam.seed, sgd_adam_minimize(cache, y0, adam).trace});
      }
    }
  }
  return rows;
}

}  // namespace fraclap
