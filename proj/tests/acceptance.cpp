// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The experiment criteria run the bundled default configs.

#include "oracles.hpp"

#include "fraclap/errors.hpp"
#include "fraclap/experiment.hpp"
#include "fraclap/exterior_control.hpp"
#include "fraclap/hum_control.hpp"
#include "fraclap/simultaneous_control.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

using namespace fraclap;
namespace ex = fraclap::experiment;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

ex::ExperimentConfig bundled(ex::Kind kind) {
  for (const auto& f : ex::bundled_defaults()) {
    if (f.name == std::string(ex::kind_name(kind)) + ".json") return ex::parse_config_text(f.content);
  }
  throw std::logic_error("no bundled config");
}

// Runs each bundled experiment at most once.
const json& results(ex::Kind kind) {
  static std::map<ex::Kind, json> cache;
  auto it = cache.find(kind);
  if (it == cache.end()) it = cache.emplace(kind, ex::run(bundled(kind)).summary.at("results")).first;
  return it->second;
}

const json& order(const json& orders, double s) {
  for (const auto& o : orders) {
    if (std::abs(o.at("s").get<double>() - s) < 1e-12) return o;
  }
  throw std::logic_error("order not in results");
}

Verdict criterion1() {
  Verdict v{true, "energy slopes"};
  for (const auto& o : results(ex::Kind::elliptic).at("orders")) {
    const double slope = o.at("slope_energy");
    v.pass = v.pass && within(slope, 0.5, 0.1);
    v.detail += " s=" + fmt("%g", o.at("s")) + ":" + fmt("%.3f", slope);
  }
  v.detail += " (target 0.5 +- 0.1)";
  return v;
}

Verdict criterion2() {
  Verdict v{true, "L2 slopes vs min(2s,1)"};
  for (const auto& o : results(ex::Kind::elliptic).at("orders")) {
    const double s = o.at("s"), slope = o.at("slope_l2");
    const bool ok = within(slope, std::min(2.0 * s, 1.0), 0.15);
    v.pass = v.pass && ok;
    v.detail += " s=" + fmt("%g", s) + ":" + fmt("%.3f", slope) + (ok ? "" : "(off)");
  }
  v.detail += " (tolerance 0.15)";
  return v;
}

Verdict criterion3() {
  double worst = 0.0;
  for (double s : {0.25, 0.5, 0.75}) {
    for (std::size_t N = 1; N <= 9; ++N) {
      const UniformMesh1D mesh(-1.0, 1.0, N);
      const SymDenseMatrix A = assemble_stiffness(mesh, FractionalOrder(s));
      const double scale = std::pow(mesh.h(), 1.0 - 2.0 * s);
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          const double ref = scale * oracle::stiffness_band(s, static_cast<int>(i > j ? i - j : j - i));
          worst = std::max(worst, std::abs(A(i, j) - ref) / std::abs(ref));
        }
      }
    }
  }
  return {worst <= 1e-8, "max relative deviation from quadrature " + fmt("%.2e", worst) + " (limit 1e-8)"};
}

Verdict criterion4() {
  const json& r = results(ex::Kind::interior).at("orders");
  const json& hi = order(r, 0.8);
  const json& lo = order(r, 0.2);
  const double ratio = hi.at("cost_ratio"), slope = hi.at("terminal_slope");
  const bool pass = ratio <= 2.0 && within(slope, 1.0, 0.2) && lo.at("cost_increasing").get<bool>() &&
                    lo.at("terminal_decreasing").get<bool>();
  return {pass, "s=0.8 cost ratio " + fmt("%.3f", ratio) + " terminal slope " + fmt("%.3f", slope) +
                    "; s=0.2 cost increasing " + (lo.at("cost_increasing").get<bool>() ? "yes" : "no") +
                    ", terminal decreasing " + (lo.at("terminal_decreasing").get<bool>() ? "yes" : "no")};
}

// Central differences of a quadratic functional against the gradient.
template <class F, class G, class V, class Dir, class Inner>
double fd_worst(F&& value, G&& gradient, const V& at, Dir&& direction, Inner&& inner, std::mt19937_64& rng) {
  double worst = 0.0;
  const auto grad = gradient(at);
  for (int k = 0; k < 10; ++k) {
    const V d = direction(rng);
    const double eps = 1e-3;
    V plus = at, minus = at;
    plus.axpy(eps, d);
    minus.axpy(-eps, d);
    const double fd = (value(plus) - value(minus)) / (2.0 * eps);
    const double exact = inner(grad, d);
    worst = std::max(worst, std::abs(fd - exact) / std::max(std::abs(exact), 1e-300));
  }
  return worst;
}

// NodalVector wrapper so the same finite-difference helper serves both.
struct Vec {
  NodalVector v;
  void axpy(double c, const Vec& x) { v += c * x.v; }
};

Verdict criterion5() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  auto random_vec = [&](std::size_t n) {
    NodalVector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = normal(rng);
    return v;
  };
  auto random_traj = [&](const TimeGrid& grid, std::size_t n, const NodalVector& mask) {
    Trajectory u(grid, n);
    for (std::size_t m = 2; m <= grid.M(); ++m) u.at(m) = random_vec(n).cwiseProduct(mask);
    return u;
  };
  double worst_dual = 0.0, worst_ext = 0.0, worst_full = 0.0, worst_sto = 0.0;

  const InteriorProblem ip{FractionalOrder(0.8), UniformMesh1D::with_step(-1, 1, 0.1), ControlRegion(-0.3, 0.8),
                           TimeGrid(0.3, 20)};
  const LinearHeatControl interior = make_interior_system(ip, false);
  const NodalVector y0 = interpolate(ip.mesh, [](double x) { return std::sin(M_PI * x); });
  const double beta = 1e-2;
  {
    const std::size_t n = interior.size();
    worst_dual = fd_worst([&](const Vec& p) { return dual_functional(interior, p.v, y0, beta); },
                          [&](const Vec& p) { return Vec{dual_gradient(interior, p.v, y0, beta)}; },
                          Vec{random_vec(n)}, [&](std::mt19937_64&) { return Vec{random_vec(n)}; },
                          [&](const Vec& g, const Vec& d) { return interior.state_inner(g.v, d.v); }, rng);
  }
  {
    const UniformMesh1D mesh = UniformMesh1D::with_step(-2, 2, 0.1);
    ExteriorGeometry geom;
    geom.robin_n = 1e4;
    const LinearHeatControl robin =
        make_robin_control(assemble_robin_system(geom, mesh, FractionalOrder(0.8)), geom, TimeGrid(0.4, 20));
    const NodalVector init = interpolate(mesh, [](double x) { return std::abs(x) < 1 ? std::cos(M_PI * x / 2) : 0.0; });
    worst_ext = fd_worst([&](const Trajectory& g) { return primal_functional(robin, g, init, beta); },
                         [&](const Trajectory& g) { return primal_gradient(robin, g, init, beta); },
                         random_traj(robin.grid(), robin.size(), robin.mask()),
                         [&](std::mt19937_64&) { return random_traj(robin.grid(), robin.size(), robin.mask()); },
                         [&](const Trajectory& a, const Trajectory& b) { return robin.control_inner(a, b); }, rng);
  }
  {
    const OperatorCache cache(ParameterSet::uniform(4, 0.6, 0.9), ip.mesh, ip.region, ip.grid);
    const NodalVector& mask = cache.system(0).mask();
    auto dir = [&](std::mt19937_64&) { return random_traj(ip.grid, ip.mesh.n_interior(), mask); };
    auto inner = [&](const Trajectory& a, const Trajectory& b) { return cache.control_inner(a, b); };
    const Trajectory u0 = dir(rng);
    worst_full = fd_worst([&](const Trajectory& u) { return expected_terminal_functional(u, cache, y0, beta); },
                          [&](const Trajectory& u) { return full_gradient(u, cache, y0, beta); }, u0, dir, inner, rng);
    // the sampled functional for parameter i is 1/2 |u|^2 + |y_i(T)|^2 / (2 beta)
    for (std::size_t i = 0; i < cache.size(); ++i) {
      const LinearHeatControl& sys = cache.system(i);
      worst_sto = std::max(worst_sto,
                           fd_worst([&](const Trajectory& u) { return primal_functional(sys, u, y0, beta); },
                                    [&](const Trajectory& u) { return stochastic_gradient(u, cache, i, y0, beta); },
                                    u0, dir, inner, rng));
    }
  }
  const double worst = std::max({worst_dual, worst_ext, worst_full, worst_sto});
  return {worst <= 1e-6, "central-difference mismatch dual " + fmt("%.1e", worst_dual) + ", exterior " +
                             fmt("%.1e", worst_ext) + ", full " + fmt("%.1e", worst_full) + ", stochastic " +
                             fmt("%.1e", worst_sto) + " (limit 1e-6)"};
}

Verdict criterion6() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal;
  auto worst_for = [&](const EulerPropagator& prop) {
    double worst = 0.0;
    const auto n = static_cast<Eigen::Index>(prop.size());
    for (int k = 0; k < 20; ++k) {
      NodalVector y0(n), pT(n);
      for (auto& x : y0) x = normal(rng);
      for (auto& x : pT) x = normal(rng);
      const double lhs = prop.mass().inner(forward_solve(prop, y0, nullptr).terminal(), pT);
      const double rhs = prop.mass().inner(y0, adjoint_solve(prop, pT).at(1));
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)));
    }
    return worst;
  };
  const InteriorProblem ip{FractionalOrder(0.3), UniformMesh1D::with_step(-1, 1, 0.05), ControlRegion(-0.3, 0.8),
                           TimeGrid(0.3, 40)};
  const double w_in = worst_for(make_interior_system(ip, false).propagator());
  ExteriorGeometry geom;
  const LinearHeatControl robin = make_robin_control(
      assemble_robin_system(geom, UniformMesh1D::with_step(-2, 2, 0.05), FractionalOrder(0.7)), geom, TimeGrid(0.4, 40));
  const double w_rob = worst_for(robin.propagator());
  return {std::max(w_in, w_rob) <= 1e-9,
          "duality defect interior " + fmt("%.1e", w_in) + ", Robin " + fmt("%.1e", w_rob) + " (limit 1e-9)"};
}

Verdict criterion7() {
  const json& r = results(ex::Kind::exterior).at("orders");
  const json& hi = order(r, 0.8);
  const json& lo = order(r, 0.2);
  const double ratio = hi.at("cost_ratio"), slope = hi.at("terminal_slope");
  const bool nondecreasing = lo.at("cost_nondecreasing");
  return {ratio <= 2.0 && within(slope, 1.0, 0.25) && nondecreasing,
          "s=0.8 cost ratio " + fmt("%.3f", ratio) + " (limit 2), terminal slope " + fmt("%.3f", slope) +
              " (target 1 +- 0.25); s=0.2 cost nondecreasing " + (nondecreasing ? "yes" : "no")};
}

Verdict criterion8() {
  Verdict v{true, "d(2n)/d(n)"};
  for (const auto& row : results(ex::Kind::exterior).at("consistency").at("rows")) {
    const double ratio = row.at("ratio");
    v.pass = v.pass && within(ratio, 0.5, 0.15);
    v.detail += " n=" + fmt("%g", row.at("n")) + ":" + fmt("%.3f", ratio);
  }
  v.detail += " (target 0.5 +- 30%)";
  return v;
}

Verdict criterion9() {
  const json& r = results(ex::Kind::constrained);
  double gap_short = NAN, gap_one = NAN, frac_one = NAN;
  for (const auto& h : r.at("horizons")) {
    if (std::abs(h.at("T").get<double>() - 0.25) < 1e-12) gap_short = h.at("terminal_gap");
    if (std::abs(h.at("T").get<double>() - 1.0) < 1e-12) {
      gap_one = h.at("terminal_gap");
      frac_one = h.at("support_fraction");
    }
  }
  const json& mt = r.at("min_time");
  const double T_min = mt.at("T_min"), frac_min = mt.at("at_hi").at("support_fraction");
  const bool pass = within(T_min, 0.68, 0.1) && gap_short > 10.0 * gap_one && frac_min < frac_one;
  return {pass, "T_min " + fmt("%.4f", T_min) + " (0.68 +- 0.1); gap T=0.25 " + fmt("%.3e", gap_short) +
                    " vs T=1 " + fmt("%.3e", gap_one) + "; 95% support fraction " + fmt("%.4f", frac_min) +
                    " at T_min vs " + fmt("%.4f", frac_one) + " at T=1"};
}

Verdict criterion10() {
  const ex::ExperimentConfig cfg = bundled(ex::Kind::simultaneous);
  const auto& sim = std::get<ex::SimultaneousConfig>(cfg.section);
  const json& runs = results(ex::Kind::simultaneous).at("runs");
  const double eps = sim.tol;

  struct PerK {
    std::size_t gd_it = 0, gd_pde = 0, cg_it = 0, cg_pde = 0;
    double gd_F = 0, cg_F = 0, sgd_F = 0, sgd_it = 0, sgd_pde = 0;
    int seeds = 0;
    bool exact = true;
  };
  std::map<std::size_t, PerK> table;
  for (const auto& r : runs) {
    const std::size_t K = r.at("K");
    PerK& p = table[K];
    const std::string algo = r.at("algorithm");
    const std::size_t it = r.at("iterations"), pde = r.at("pde_solve_count");
    const double F = r.at("final_functional");
    if (algo == "gd") {
      p.gd_it = it, p.gd_pde = pde, p.gd_F = F;
      p.exact = p.exact && pde == it * K;
    } else if (algo == "cg") {
      p.cg_it = it, p.cg_pde = pde, p.cg_F = F;
      p.exact = p.exact && pde == (it + 1) * K;  // |K| more for the right-hand side
    } else {
      p.sgd_it += static_cast<double>(it);
      p.sgd_pde += static_cast<double>(pde);
      p.sgd_F += F;
      ++p.seeds;
      p.exact = p.exact && pde == it;
    }
  }
  bool a = true, b = true, c = true, agree = true;
  std::string detail;
  double flat_lo = INFINITY, flat_hi = 0.0;
  for (auto& [K, p] : table) {
    p.sgd_it /= p.seeds;
    p.sgd_pde /= p.seeds;
    p.sgd_F /= p.seeds;
    a = a && p.exact;
    b = b && p.cg_it <= 60 && p.gd_it >= 10 * p.cg_it;
    c = c && p.sgd_it >= 1e3 && p.sgd_it <= 1e5;
    if (K == 2 || K == 10 || K == 50) {
      flat_lo = std::min(flat_lo, p.sgd_it);
      flat_hi = std::max(flat_hi, p.sgd_it);
    }
    const double ref = std::abs(p.cg_F);
    agree = agree && std::abs(p.gd_F - p.cg_F) <= 5 * eps * ref && std::abs(p.sgd_F - p.cg_F) <= 5 * eps * ref;
    detail += " K=" + std::to_string(K) + "[gd " + std::to_string(p.gd_it) + ", cg " + std::to_string(p.cg_it) +
              ", sgd " + fmt("%.0f", p.sgd_it) + "]";
  }
  c = c && flat_hi <= 2.0 * flat_lo;

  bool d = false;
  std::size_t crossover = 0;
  for (const auto& [K, p] : table) {
    if (static_cast<double>(p.cg_pde) > p.sgd_it) crossover = K;
  }
  if (crossover) {
    const PerK& p = table.at(crossover);
    d = p.sgd_pde < static_cast<double>(p.gd_pde) && p.sgd_pde < static_cast<double>(p.cg_pde);
    detail += "; at K=" + std::to_string(crossover) + " solves sgd " + fmt("%.0f", p.sgd_pde) + " cg " +
              std::to_string(p.cg_pde) + " gd " + std::to_string(p.gd_pde);
  } else {
    detail += "; no tested K where CG's solve count exceeds SGD's iterations";
  }
  detail += std::string("; (a) ") + (a ? "ok" : "no") + " (b) " + (b ? "ok" : "no") + " (c) " + (c ? "ok" : "no") +
            " (d) " + (d ? "ok" : "no") + " agreement " + (agree ? "ok" : "no");
  return {a && b && c && d && agree, "iterations" + detail};
}

// Small versions of every experiment, each run twice.
Verdict criterion11() {
  std::vector<ex::ExperimentConfig> configs;
  for (ex::Kind k : {ex::Kind::elliptic, ex::Kind::interior, ex::Kind::exterior, ex::Kind::constrained,
                     ex::Kind::simultaneous}) {
    configs.push_back(bundled(k));
  }
  std::get<ex::EllipticConfig>(configs[0].section).halvings = 2;
  auto& in = std::get<ex::InteriorConfig>(configs[1].section);
  in.h0 = 0.1, in.halvings = 2, in.M = 30, in.export_trajectory = true;
  auto& ext = std::get<ex::ExteriorConfig>(configs[2].section);
  ext.h0 = 0.1, ext.halvings = 1, ext.M = 30;
  auto& con = std::get<ex::ConstrainedConfig>(configs[3].section);
  con.h = 0.1, con.M = 20, con.min_time = true, con.width = 0.1;
  auto& sim = std::get<ex::SimultaneousConfig>(configs[4].section);
  sim.sizes = {2, 5};
  sim.sgd_seeds = 2;
  configs[4].seed = 17;

  std::size_t files = 0;
  for (const auto& cfg : configs) {
    const ex::RunOutput first = ex::run(cfg), second = ex::run(cfg);
    if (first.files.size() != second.files.size()) return {false, "file lists differ"};
    for (std::size_t i = 0; i < first.files.size(); ++i) {
      if (first.files[i].name == "summary.json") continue;  // carries wall times
      ++files;
      if (first.files[i].content != second.files[i].content) return {false, first.files[i].name + " differs"};
    }
  }
  return {true, std::to_string(files) + " CSV files byte-identical across reruns of all five experiment kinds"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},  {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11}};
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
