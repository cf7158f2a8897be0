#include "fraclap/exterior_control.hpp"

#include "fraclap/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <cmath>
#include <optional>

namespace fraclap {

namespace {

using Gauss12 = boost::math::quadrature::gauss<double, 12>;
using Gauss20 = boost::math::quadrature::gauss<double, 20>;

// integral of t^p over [lo, hi], 0 < lo
double powint(double lo, double hi, double p) {
  if (std::abs(p + 1.0) < 1e-12) return std::log(hi / lo);
  const double q = p + 1.0;
  // lo^q * (expm1(q log(hi/lo))) / q keeps digits when hi is close to lo
  return std::pow(lo, q) * std::expm1(q * std::log(hi / lo)) / q;
}

// Gauss-Legendre nodes and weights mapped to [0, 1].
std::vector<std::pair<double, double>> unit_rule12() {
  std::vector<std::pair<double, double>> rule;
  const auto& x = Gauss12::abscissa();
  const auto& w = Gauss12::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = (i == 0 && x[0] == 0.0) ? w[0] : w[i];
    rule.emplace_back(0.5 + 0.5 * x[i], 0.5 * wi);
    if (x[i] != 0.0) rule.emplace_back(0.5 - 0.5 * x[i], 0.5 * wi);
  }
  return rule;
}

// Moments over the unit square of xi^a eta^b (xi + eta)^{-1-2s}, a + b = 2:
// the part r = xi + eta <= 1 is B(a+1, b+1)/(3-2s), the rest a smooth r-integral.
std::pair<double, double> touching_moments(double s) {
  const double p = 3.0 - 2.0 * s;
  auto outer = [s](double r, int a) {
    const double lo = 1.0 - 1.0 / r;
    const double hi = 1.0 / r;
    // antiderivatives of t^2 and t (1 - t)
    auto F20 = [](double t) { return t * t * t / 3.0; };
    auto F11 = [](double t) { return t * t / 2.0 - t * t * t / 3.0; };
    const double inner = a == 2 ? F20(hi) - F20(lo) : F11(hi) - F11(lo);
    return std::pow(r, 2.0 - 2.0 * s) * inner;
  };
  const double i20 = (1.0 / 3.0) / p + Gauss20::integrate([&](double r) { return outer(r, 2); }, 1.0, 2.0);
  const double i11 = (1.0 / 6.0) / p + Gauss20::integrate([&](double r) { return outer(r, 1); }, 1.0, 2.0);
  return {i20, i11};
}

// Moment matrices for the unit elements P = [0, 1] and Q = [k, k + 1], k >= 2,
// with kernel (k + eta - xi)^{-1-2s}: S_PP[a][b], S_QQ[a][b], S_PQ[a][b].
struct SeparatedMoments {
  std::array<std::array<double, 2>, 2> pp{}, qq{}, pq{};
};

SeparatedMoments separated_moments(std::size_t k, double s, const std::vector<std::pair<double, double>>& rule) {
  SeparatedMoments out;
  for (const auto& [xi, wx] : rule) {
    const double psi[2] = {1.0 - xi, xi};
    for (const auto& [eta, wy] : rule) {
      const double chi[2] = {1.0 - eta, eta};
      const double w = wx * wy * std::pow(static_cast<double>(k) + eta - xi, -1.0 - 2.0 * s);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          out.pp[a][b] += w * psi[a] * psi[b];
          out.qq[a][b] += w * chi[a] * chi[b];
          out.pq[a][b] += w * psi[a] * chi[b];
        }
      }
    }
  }
  return out;
}

class PairAssembler {
 public:
  PairAssembler(const UniformMesh1D& mesh, FractionalOrder s)
      : mesh_(mesh), s_(s.value()), c_(normalization_constant(1, s)), scale_(std::pow(mesh.h(), 1.0 - 2.0 * s_)),
        out_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mesh.n_interior()),
                                   static_cast<Eigen::Index>(mesh.n_interior()))),
        rule_(unit_rule12()) {
    const auto [i20, i11] = touching_moments(s_);
    i20_ = i20;
    i11_ = i11;
  }

  // unordered pair of elements (e, e + k) counted in both orders
  void pair(std::size_t e, std::size_t k) {
    const double f = c_ * scale_;
    if (k == 0) {
      const double w = f / ((2.0 - 2.0 * s_) * (3.0 - 2.0 * s_));
      add({e, e + 1}, {{{w, -w}, {-w, w}}});
    } else if (k == 1) {
      const double wp[3] = {-1.0, 1.0, 0.0};
      const double wq[3] = {0.0, -1.0, 1.0};
      std::array<std::array<double, 3>, 3> local{};
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          local[a][b] = f * (i20_ * (wp[a] * wp[b] + wq[a] * wq[b]) + i11_ * (wp[a] * wq[b] + wq[a] * wp[b]));
        }
      }
      add3({e, e + 1, e + 2}, local);
    } else {
      const SeparatedMoments& sm = moments(k);
      const std::size_t nodes[4] = {e, e + 1, e + k, e + k + 1};
      std::array<std::array<double, 4>, 4> local{};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          local[a][b] += f * sm.pp[a][b];
          local[2 + a][2 + b] += f * sm.qq[a][b];
          local[a][2 + b] -= f * sm.pq[a][b];
          local[2 + b][a] -= f * sm.pq[a][b];
        }
      }
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) add_entry(nodes[a], nodes[b], local[a][b]);
      }
    }
  }

  // element e against the tail beyond the right (right = true) or left end,
  // both orders: C * integral over e of u v dist^{-2s} / (2s)
  void tail(std::size_t e, bool right) {
    const double h = mesh_.h();
    const double x0 = mesh_.node(e);
    const double d0 = right ? mesh_.b() - (x0 + h) : x0 - mesh_.a();
    const std::size_t near = right ? e + 1 : e;  // node closest to the tail
    const std::size_t far = right ? e : e + 1;
    const double w = c_ / (2.0 * s_);
    if (d0 < 0.5 * h) {
      // only the far hat is nonzero: integral of (t/h)^2 t^{-2s} over [0, h]
      add_entry(far, far, w * std::pow(h, 1.0 - 2.0 * s_) / (3.0 - 2.0 * s_));
      return;
    }
    double m[2][2] = {{0, 0}, {0, 0}};
    for (const auto& [tau, wt] : rule_) {
      // tau = distance from the near node, as a fraction of h
      const double kernel = h * wt * std::pow(d0 + tau * h, -2.0 * s_);
      const double hats[2] = {1.0 - tau, tau};  // near, far
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) m[a][b] += kernel * hats[a] * hats[b];
      }
    }
    const std::size_t nodes[2] = {near, far};
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) add_entry(nodes[a], nodes[b], w * m[a][b]);
    }
  }

  Eigen::MatrixXd take() {
    Eigen::MatrixXd sym = 0.5 * (out_ + out_.transpose());
    return sym;
  }

 private:
  const SeparatedMoments& moments(std::size_t k) {
    if (cache_.size() <= k) cache_.resize(k + 1);
    if (!cache_[k]) cache_[k] = separated_moments(k, s_, rule_);
    return *cache_[k];
  }

  void add_entry(std::size_t gi, std::size_t gj, double v) {
    const std::size_t n = mesh_.n_interior();
    if (gi == 0 || gj == 0 || gi > n || gj > n) return;
    out_(static_cast<Eigen::Index>(gi - 1), static_cast<Eigen::Index>(gj - 1)) += v;
  }
  void add(std::array<std::size_t, 2> nodes, std::array<std::array<double, 2>, 2> local) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) add_entry(nodes[a], nodes[b], local[a][b]);
    }
  }
  void add3(std::array<std::size_t, 3> nodes, const std::array<std::array<double, 3>, 3>& local) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) add_entry(nodes[a], nodes[b], local[a][b]);
    }
  }

  const UniformMesh1D& mesh_;
  double s_;
  double c_;
  double scale_;
  Eigen::MatrixXd out_;
  std::vector<std::pair<double, double>> rule_;
  std::vector<std::optional<SeparatedMoments>> cache_;
  double i20_ = 0.0;
  double i11_ = 0.0;
};

SymTridiagonalMatrix sum(const SymTridiagonalMatrix& a, const SymTridiagonalMatrix& b) {
  return SymTridiagonalMatrix(a.diagonal() + b.diagonal(), a.off_diagonal() + b.off_diagonal());
}

std::size_t node_index(const UniformMesh1D& mesh, double x) {
  const double r = (x - mesh.a()) / mesh.h();
  const double i = std::round(r);
  if (std::abs(r - i) > 1e-9) throw MeshAlignmentError("x = " + std::to_string(x) + " is not a mesh node");
  return static_cast<std::size_t>(i);
}

}  // namespace

RobinSystem assemble_robin_system(const ExteriorGeometry& geom, const UniformMesh1D& mesh, FractionalOrder s) {
  if (!(geom.a_ext < -1.0 && geom.b_ext > 1.0)) {
    throw InvalidArgument("exterior_control", "extended interval must contain [-1, 1]");
  }
  if (std::abs(mesh.a() - geom.a_ext) > 1e-12 || std::abs(mesh.b() - geom.b_ext) > 1e-12) {
    throw InvalidArgument("exterior_control", "mesh does not cover the extended interval");
  }
  if (geom.control.hi > geom.b_ext || geom.control.lo < geom.a_ext ||
      (geom.control.lo < 1.0 && geom.control.hi > -1.0)) {
    throw InvalidArgument("exterior_control", "control region must lie in the extended interval outside [-1, 1]");
  }
  if (!(geom.robin_n >= 1.0) || !(geom.kappa >= 0.0)) {
    throw InvalidArgument("exterior_control", "robin_n must be >= 1 and kappa >= 0");
  }
  const std::size_t left = node_index(mesh, -1.0);
  const std::size_t right = node_index(mesh, 1.0);

  const std::size_t n_el = mesh.n_elements();
  auto outside = [&](std::size_t e) { return e < left || e >= right; };
  PairAssembler pairs(mesh, s);
  for (std::size_t e = 0; e < n_el; ++e) {
    for (std::size_t f = e; f < n_el; ++f) {
      if (outside(e) && outside(f)) continue;
      pairs.pair(e, f - e);
    }
    if (!outside(e)) {
      pairs.tail(e, true);
      pairs.tail(e, false);
    }
  }

  RobinSystem sys{mesh,
                  SymDenseMatrix(pairs.take()),
                  sum(assemble_control_matrix(mesh, ControlRegion(mesh.a(), -1.0)),
                      assemble_control_matrix(mesh, ControlRegion(1.0, mesh.b()))),
                  assemble_control_matrix(mesh, geom.control),
                  assemble_control_matrix(mesh, ControlRegion(-1.0, 1.0)),
                  geom.robin_n * geom.kappa};
  return sys;
}

SymDenseMatrix assemble_full_line_form(const UniformMesh1D& mesh, FractionalOrder s) {
  PairAssembler pairs(mesh, s);
  const std::size_t n_el = mesh.n_elements();
  for (std::size_t e = 0; e < n_el; ++e) {
    for (std::size_t f = e; f < n_el; ++f) pairs.pair(e, f - e);
    pairs.tail(e, true);
    pairs.tail(e, false);
  }
  return SymDenseMatrix(pairs.take());
}

double nonlocal_normal_derivative(const NodalVector& u, const UniformMesh1D& mesh, FractionalOrder order, double x) {
  if (static_cast<std::size_t>(u.size()) != mesh.n_interior()) {
    throw DimensionError("exterior_control", "nodal vector does not match mesh");
  }
  if (std::abs(x) <= 1.0) throw InvalidArgument("exterior_control", "N_s is evaluated outside [-1, 1]");
  const double s = order.value();
  const double h = mesh.h();
  const std::size_t n = mesh.n_interior();
  auto nodal = [&](std::size_t i) { return (i == 0 || i > n) ? 0.0 : u[static_cast<Eigen::Index>(i - 1)]; };
  auto value = [&](double y) {
    if (y <= mesh.a() || y >= mesh.b()) return 0.0;
    const double r = (y - mesh.a()) / h;
    const auto e = std::min(static_cast<std::size_t>(r), mesh.n_elements() - 1);
    const double t = r - static_cast<double>(e);
    return (1.0 - t) * nodal(e) + t * nodal(e + 1);
  };
  const std::size_t left = node_index(mesh, -1.0);
  const std::size_t right = node_index(mesh, 1.0);
  const double ux = value(x);
  const double sign = x > 1.0 ? 1.0 : -1.0;

  double total = 0.0;
  for (std::size_t e = left; e < right; ++e) {
    const double y0 = mesh.node(e);
    const double y1 = y0 + h;
    // distance t = sign * (x - y); u(y) = alpha + beta t on the element
    const double t0 = sign * (x - y0);
    const double t1 = sign * (x - y1);
    const double lo = std::min(t0, t1);
    const double hi = std::max(t0, t1);
    const double u0 = nodal(e);
    const double u1 = nodal(e + 1);
    const double beta = (u1 - u0) / (t1 - t0);
    const double alpha = u0 - beta * t0;
    total += (ux - alpha) * powint(lo, hi, -1.0 - 2.0 * s) - beta * powint(lo, hi, -2.0 * s);
  }
  return normalization_constant(1, order) * total;
}

LinearHeatControl make_robin_control(const RobinSystem& sys, const ExteriorGeometry& geom, const TimeGrid& grid) {
  Eigen::MatrixXd op = sys.F.dense();
  op += sys.n_kappa * sys.K.to_dense();
  const SymTridiagonalMatrix load(sys.n_kappa * sys.G.diagonal(), sys.n_kappa * sys.G.off_diagonal());
  auto prop = std::make_shared<const EulerPropagator>(sys.M_in, op, load, grid);
  return LinearHeatControl(std::move(prop), sys.G, control_mask(sys.mesh, geom.control), sys.n_kappa);
}

NodalVector interior_restriction(const NodalVector& u, const UniformMesh1D& mesh) {
  const std::size_t left = node_index(mesh, -1.0);
  const std::size_t right = node_index(mesh, 1.0);
  // interior nodes strictly inside (-1, 1): global left + 1 .. right - 1
  return u.segment(static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(right - left - 1));
}

Trajectory robin_forward_solve(const LinearHeatControl& sys, const NodalVector& y0, const Trajectory* g) {
  return sys.trajectory(y0, g);
}

double interior_distance(const LinearHeatControl& sys, const Trajectory& y, const Trajectory& z) {
  double sum = 0.0;
  for (std::size_t m = 1; m <= sys.grid().M(); ++m) {
    const NodalVector d = y.at(m) - z.at(m);
    sum += sys.state_inner(d, d);
  }
  return std::sqrt(sys.grid().dt() * sum);
}

HumResult exterior_optimize(const LinearHeatControl& sys, const NodalVector& y0, const HumSettings& settings) {
  return cg_minimize(sys, y0, settings);
}

std::vector<SweepRow> exterior_sweep(FractionalOrder s, const std::vector<double>& h_sequence,
                                     const ExteriorGeometry& geom, double T, std::size_t M,
                                     const std::function<double(double)>& y0, HumSettings settings) {
  for (std::size_t i = 1; i < h_sequence.size(); ++i) {
    if (!(h_sequence[i] < h_sequence[i - 1])) throw InvalidArgument("exterior_control", "mesh sizes must decrease");
  }
  std::vector<SweepRow> rows;
  for (double h : h_sequence) {
    const UniformMesh1D mesh = UniformMesh1D::with_step(geom.a_ext, geom.b_ext, h);
    const RobinSystem robin = assemble_robin_system(geom, mesh, s);
    const LinearHeatControl sys = make_robin_control(robin, geom, TimeGrid(T, M));
    settings.beta = penalty_rule(mesh.h(), s);
    const NodalVector init = interpolate(mesh, [&](double x) { return std::abs(x) < 1.0 ? y0(x) : 0.0; });
    const HumResult r = exterior_optimize(sys, init, settings);
    rows.push_back({mesh.h(), settings.beta, r.cost, r.optimal_energy, r.terminal_norm, r.iterations});
  }
  return rows;
}

RobinConsistency robin_consistency(FractionalOrder s, const UniformMesh1D& mesh, ExteriorGeometry geom,
                                   const TimeGrid& grid, const std::function<double(double)>& y0, double n) {
  if (!(n > 0.0)) throw InvalidArgument("exterior_control", "robin_n must be positive");
  const NodalVector init = interpolate(mesh, [&](double x) { return std::abs(x) < 1.0 ? y0(x) : 0.0; });
  std::vector<Trajectory> runs;
  std::optional<LinearHeatControl> first;
  for (double scale : {1.0, 2.0, 4.0}) {
    geom.robin_n = scale * n;
    const LinearHeatControl sys = make_robin_control(assemble_robin_system(geom, mesh, s), geom, grid);
    Trajectory g = sys.zero_control();
    for (std::size_t m = 2; m <= grid.M(); ++m) g.at(m) = sys.mask();
    runs.push_back(robin_forward_solve(sys, init, &g));
    if (!first) first.emplace(sys);
  }
  return {n, interior_distance(*first, runs[0], runs[1]), interior_distance(*first, runs[1], runs[2])};
}

}  // namespace fraclap
