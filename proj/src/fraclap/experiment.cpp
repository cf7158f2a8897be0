#include "fraclap/experiment.hpp"

#include "fraclap/constrained_control.hpp"
#include "fraclap/errors.hpp"
#include "fraclap/exterior_control.hpp"
#include "fraclap/fe_core.hpp"
#include "fraclap/hum_control.hpp"
#include "fraclap/simultaneous_control.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#ifndef FRACLAP_BUILD_ID
#define FRACLAP_BUILD_ID "unknown"
#endif

namespace fraclap::experiment {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Kind, std::string_view>, 5> kKindNames{{
    {Kind::elliptic, "elliptic"},
    {Kind::interior, "interior"},
    {Kind::exterior, "exterior"},
    {Kind::constrained, "constrained"},
    {Kind::simultaneous, "simultaneous"},
}};

constexpr std::array<std::pair<Kind, std::string_view>, 5> kSubcommands{{
    {Kind::elliptic, "elliptic-convergence"},
    {Kind::interior, "interior-control"},
    {Kind::exterior, "exterior-control"},
    {Kind::constrained, "constrained"},
    {Kind::simultaneous, "simultaneous"},
}};

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError((path.empty() ? std::string("config") : "'" + path + "'") + ": " + what);
}

// Walks one JSON object, remembering which keys were consumed so that
// anything left over can be reported as unknown.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "expected an object");
  }

  template <class T>
  void opt(const char* key, T& out) {
    const auto it = node_.find(key);
    if (it == node_.end()) return;
    seen_.insert(key);
    read(*it, join_path(path_, key), out);
  }

  template <class T>
  void req(const char* key, T& out) {
    if (!node_.contains(key)) fail(join_path(path_, key), "missing");
    opt(key, out);
  }

  const json* child(const char* key) {
    const auto it = node_.find(key);
    if (it == node_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) fail(join_path(path_, item.key()), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;

  static void read(const json& v, const std::string& p, double& out) {
    if (!v.is_number()) fail(p, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(p, "must be finite");
  }
  static void read(const json& v, const std::string& p, std::size_t& out) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(p, "expected a non-negative integer");
    out = v.get<std::size_t>();
  }
  static void read(const json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) fail(p, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) fail(p, "expected a string");
    out = v.get<std::string>();
  }
  template <class T>
  static void read(const json& v, const std::string& p, std::vector<T>& out) {
    if (!v.is_array()) fail(p, "expected an array");
    std::vector<T> values(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) read(v[i], p + "[" + std::to_string(i) + "]", values[i]);
    out = std::move(values);
  }
  static void read(const json& v, const std::string& p, Interval& out) {
    std::vector<double> ends;
    read(v, p, ends);
    if (ends.size() != 2 || !(ends[0] < ends[1])) fail(p, "expected [lo, hi] with lo < hi");
    out = {ends[0], ends[1]};
  }
  static void read(const json& v, const std::string& p, Profile& out) {
    Reader r(v, p);
    r.opt("shape", out.shape);
    r.opt("amplitude", out.amplitude);
    r.opt("wavenumber", out.wavenumber);
    r.finish();
    if (out.shape != "sin" && out.shape != "cos" && out.shape != "constant") {
      fail(join_path(p, "shape"), "expected sin, cos or constant");
    }
  }
  static void read(const json& v, const std::string& p, AdamConfig& out) {
    Reader r(v, p);
    r.opt("eta", out.eta);
    r.opt("gamma1", out.gamma1);
    r.opt("gamma2", out.gamma2);
    r.opt("delta", out.delta);
    r.opt("window", out.window);
    r.opt("max_iter", out.max_iter);
    r.opt("standard", out.standard);
    r.finish();
  }
  static void read(const json& v, const std::string& p, RobinConsistencyConfig& out) {
    Reader r(v, p);
    r.opt("enabled", out.enabled);
    r.opt("s", out.s);
    r.opt("h", out.h);
    r.opt("M", out.M);
    r.opt("n", out.n);
    r.finish();
  }
};

// ---- range checks, all before any computation -------------------------------

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) fail(path, what);
}

void check_order(double s, const std::string& path) { check(s > 0.0 && s < 1.0, path, "s must lie in (0, 1)"); }

void check_orders(const std::vector<double>& s, const std::string& path) {
  check(!s.empty(), path, "needs at least one value");
  for (double v : s) check_order(v, path);
}

void check_mesh(Interval domain, double h, const std::string& path) {
  check(h > 0.0, path, "mesh size must be positive");
  try {
    (void)UniformMesh1D::with_step(domain.lo, domain.hi, h);
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

void check_halvings(Interval domain, double h0, std::size_t halvings, const std::string& path,
                    std::size_t least = 1) {
  check(halvings >= least && halvings <= 12, path + ".halvings",
        "must lie in " + std::to_string(least) + "..12");
  for (std::size_t k = 0; k <= halvings; ++k) check_mesh(domain, h0 / std::ldexp(1.0, static_cast<int>(k)), path + ".h0");
}

void check_region_inside(Interval region, Interval domain, const std::string& path) {
  check(region.lo >= domain.lo && region.hi <= domain.hi, path, "must lie inside the domain");
}

std::vector<double> halving_sequence(double h0, std::size_t halvings) {
  std::vector<double> hs;
  for (std::size_t k = 0; k <= halvings; ++k) hs.push_back(h0 / std::ldexp(1.0, static_cast<int>(k)));
  return hs;
}

// ---- per-kind parsing ---------------------------------------------------------

EllipticConfig parse_elliptic(const json& node, const std::string& path) {
  EllipticConfig c;
  Reader r(node, path);
  r.opt("s", c.s);
  r.opt("h0", c.h0);
  r.opt("halvings", c.halvings);
  r.finish();
  check_orders(c.s, path + ".s");
  check_halvings({-1.0, 1.0}, c.h0, c.halvings, path, 2);  // rates need three meshes
  return c;
}

InteriorConfig parse_interior(const json& node, const std::string& path) {
  InteriorConfig c;
  Reader r(node, path);
  r.opt("s", c.s);
  r.opt("domain", c.domain);
  r.opt("omega", c.omega);
  r.opt("T", c.T);
  r.opt("M", c.M);
  r.opt("h0", c.h0);
  r.opt("halvings", c.halvings);
  r.opt("y0", c.y0);
  r.opt("cg_tol", c.cg_tol);
  r.opt("cg_max_iter", c.cg_max_iter);
  r.opt("modal", c.modal);
  r.opt("export_trajectory", c.export_trajectory);
  r.finish();
  check_orders(c.s, path + ".s");
  check_region_inside(c.omega, c.domain, path + ".omega");
  check(c.T > 0.0, path + ".T", "must be positive");
  check(c.M >= 2, path + ".M", "needs at least 2 time levels");
  check_halvings(c.domain, c.h0, c.halvings, path);
  check(c.cg_tol > 0.0, path + ".cg_tol", "must be positive");
  check(c.cg_max_iter >= 1, path + ".cg_max_iter", "must be at least 1");
  return c;
}

ExteriorConfig parse_exterior(const json& node, const std::string& path) {
  ExteriorConfig c;
  Reader r(node, path);
  r.opt("s", c.s);
  r.opt("extended", c.extended);
  r.opt("control", c.control);
  r.opt("T", c.T);
  r.opt("M", c.M);
  r.opt("h0", c.h0);
  r.opt("halvings", c.halvings);
  r.opt("y0", c.y0);
  r.opt("robin_n", c.robin_n);
  r.opt("kappa", c.kappa);
  r.opt("cg_tol", c.cg_tol);
  r.opt("cg_max_iter", c.cg_max_iter);
  r.opt("consistency", c.consistency);
  r.finish();
  check_orders(c.s, path + ".s");
  check(c.extended.lo < -1.0 && c.extended.hi > 1.0, path + ".extended", "must contain [-1, 1] strictly");
  check_region_inside(c.control, c.extended, path + ".control");
  check(c.control.lo >= 1.0 || c.control.hi <= -1.0, path + ".control", "must lie outside (-1, 1)");
  check(c.T > 0.0, path + ".T", "must be positive");
  check(c.M >= 2, path + ".M", "needs at least 2 time levels");
  check_halvings(c.extended, c.h0, c.halvings, path);
  check(c.robin_n > 0.0 && c.kappa > 0.0, path, "robin_n and kappa must be positive");
  check(c.cg_tol > 0.0, path + ".cg_tol", "must be positive");
  if (c.consistency.enabled) {
    const std::string cp = path + ".consistency";
    check_order(c.consistency.s, cp + ".s");
    check_mesh(c.extended, c.consistency.h, cp + ".h");
    check(c.consistency.M >= 2, cp + ".M", "needs at least 2 time levels");
    check(!c.consistency.n.empty(), cp + ".n", "needs at least one value");
    for (double n : c.consistency.n) check(n > 0.0, cp + ".n", "values must be positive");
  }
  return c;
}

ConstrainedConfig parse_constrained(const json& node, const std::string& path) {
  ConstrainedConfig c;
  Reader r(node, path);
  r.opt("s", c.s);
  r.opt("domain", c.domain);
  r.opt("omega", c.omega);
  r.opt("h", c.h);
  r.opt("M", c.M);
  r.opt("y0", c.y0);
  r.opt("y_hat0", c.y_hat0);
  r.opt("u_hat", c.u_hat);
  r.opt("beta", c.beta);
  r.opt("gap_rel", c.gap_rel);
  r.opt("T", c.T);
  r.opt("min_time", c.min_time);
  r.opt("bracket", c.bracket);
  r.opt("width", c.width);
  r.finish();
  check_order(c.s, path + ".s");
  check_region_inside(c.omega, c.domain, path + ".omega");
  check_mesh(c.domain, c.h, path + ".h");
  check(c.M >= 2, path + ".M", "needs at least 2 time levels");
  check(c.u_hat > 0.0, path + ".u_hat", "must be positive");
  check(c.beta > 0.0, path + ".beta", "must be positive");
  check(c.gap_rel > 0.0, path + ".gap_rel", "must be positive");
  for (double T : c.T) check(T > 0.0, path + ".T", "horizons must be positive");
  check(!c.T.empty() || c.min_time, path, "nothing to do: empty T and min_time off");
  check(c.bracket.lo > 0.0, path + ".bracket", "must be positive");
  check(c.width > 0.0, path + ".width", "must be positive");
  return c;
}

SimultaneousConfig parse_simultaneous(const json& node, const std::string& path) {
  SimultaneousConfig c;
  Reader r(node, path);
  r.opt("domain", c.domain);
  r.opt("omega", c.omega);
  r.opt("T", c.T);
  r.opt("M", c.M);
  r.opt("h", c.h);
  r.opt("y0", c.y0);
  r.opt("s_range", c.s_range);
  r.opt("sizes", c.sizes);
  r.opt("beta", c.beta);
  r.opt("tol", c.tol);
  r.opt("algorithms", c.algorithms);
  r.opt("sgd_seeds", c.sgd_seeds);
  r.opt("gd_eta", c.gd_eta);
  r.opt("gd_max_iter", c.gd_max_iter);
  r.opt("cg_max_iter", c.cg_max_iter);
  r.opt("adam", c.adam);
  r.finish();
  check_region_inside(c.omega, c.domain, path + ".omega");
  check(c.T > 0.0, path + ".T", "must be positive");
  check(c.M >= 2, path + ".M", "needs at least 2 time levels");
  check_mesh(c.domain, c.h, path + ".h");
  check(c.s_range.lo >= 0.5 && c.s_range.hi <= 1.0, path + ".s_range", "must lie in [1/2, 1]");
  check(!c.sizes.empty(), path + ".sizes", "needs at least one size");
  for (std::size_t k : c.sizes) check(k >= 1, path + ".sizes", "sizes must be at least 1");
  check(c.beta > 0.0, path + ".beta", "must be positive");
  check(c.tol > 0.0, path + ".tol", "must be positive");
  check(!c.algorithms.empty(), path + ".algorithms", "needs at least one algorithm");
  for (const auto& a : c.algorithms) check(a == "gd" || a == "cg" || a == "sgd", path + ".algorithms", "unknown algorithm '" + a + "'");
  check(c.sgd_seeds >= 1, path + ".sgd_seeds", "must be at least 1");
  check(c.gd_eta >= 0.0, path + ".gd_eta", "must be non-negative");
  const std::string ap = path + ".adam";
  check(c.adam.eta > 0.0 && c.adam.delta > 0.0, ap, "eta and delta must be positive");
  check(c.adam.gamma1 > 0.0 && c.adam.gamma1 < 1.0, ap + ".gamma1", "must lie in (0, 1)");
  check(c.adam.gamma2 > 0.0 && c.adam.gamma2 < 1.0, ap + ".gamma2", "must lie in (0, 1)");
  check(c.adam.window >= 1, ap + ".window", "must be at least 1");
  return c;
}

// ---- serialization ------------------------------------------------------------

json interval_json(Interval i) { return json::array({i.lo, i.hi}); }

json profile_json(const Profile& p) {
  return {{"shape", p.shape}, {"amplitude", p.amplitude}, {"wavenumber", p.wavenumber}};
}

json section_json(const EllipticConfig& c) { return {{"s", c.s}, {"h0", c.h0}, {"halvings", c.halvings}}; }

json section_json(const InteriorConfig& c) {
  return {{"s", c.s},
          {"domain", interval_json(c.domain)},
          {"omega", interval_json(c.omega)},
          {"T", c.T},
          {"M", c.M},
          {"h0", c.h0},
          {"halvings", c.halvings},
          {"y0", profile_json(c.y0)},
          {"cg_tol", c.cg_tol},
          {"cg_max_iter", c.cg_max_iter},
          {"modal", c.modal},
          {"export_trajectory", c.export_trajectory}};
}

json section_json(const ExteriorConfig& c) {
  return {{"s", c.s},
          {"extended", interval_json(c.extended)},
          {"control", interval_json(c.control)},
          {"T", c.T},
          {"M", c.M},
          {"h0", c.h0},
          {"halvings", c.halvings},
          {"y0", profile_json(c.y0)},
          {"robin_n", c.robin_n},
          {"kappa", c.kappa},
          {"cg_tol", c.cg_tol},
          {"cg_max_iter", c.cg_max_iter},
          {"consistency",
           {{"enabled", c.consistency.enabled},
            {"s", c.consistency.s},
            {"h", c.consistency.h},
            {"M", c.consistency.M},
            {"n", c.consistency.n}}}};
}

json section_json(const ConstrainedConfig& c) {
  return {{"s", c.s},
          {"domain", interval_json(c.domain)},
          {"omega", interval_json(c.omega)},
          {"h", c.h},
          {"M", c.M},
          {"y0", profile_json(c.y0)},
          {"y_hat0", profile_json(c.y_hat0)},
          {"u_hat", c.u_hat},
          {"beta", c.beta},
          {"gap_rel", c.gap_rel},
          {"T", c.T},
          {"min_time", c.min_time},
          {"bracket", interval_json(c.bracket)},
          {"width", c.width}};
}

json section_json(const SimultaneousConfig& c) {
  return {{"domain", interval_json(c.domain)},
          {"omega", interval_json(c.omega)},
          {"T", c.T},
          {"M", c.M},
          {"h", c.h},
          {"y0", profile_json(c.y0)},
          {"s_range", interval_json(c.s_range)},
          {"sizes", c.sizes},
          {"beta", c.beta},
          {"tol", c.tol},
          {"algorithms", c.algorithms},
          {"sgd_seeds", c.sgd_seeds},
          {"gd_eta", c.gd_eta},
          {"gd_max_iter", c.gd_max_iter},
          {"cg_max_iter", c.cg_max_iter},
          {"adam",
           {{"eta", c.adam.eta},
            {"gamma1", c.adam.gamma1},
            {"gamma2", c.adam.gamma2},
            {"delta", c.adam.delta},
            {"window", c.adam.window},
            {"max_iter", c.adam.max_iter},
            {"standard", c.adam.standard}}}};
}

// ---- CSV ----------------------------------------------------------------------

struct Cell {
  std::string text;
  Cell(double v) : text(format_real(v)) {}
  Cell(std::size_t v) : text(std::to_string(v)) {}
  Cell(int v) : text(std::to_string(v)) {}
  Cell(bool v) : text(v ? "1" : "0") {}
  Cell(const char* v) : text(v) {}
  Cell(std::string v) : text(std::move(v)) {}
};

class Csv {
 public:
  Csv(const std::string& hash, std::initializer_list<const char*> columns) {
    out_ << "# config_hash=" << hash << '\n';
    bool first = true;
    for (const char* c : columns) {
      out_ << (first ? "" : ",") << c;
      first = false;
    }
    out_ << '\n';
    width_ = columns.size();
  }

  void row(std::initializer_list<Cell> cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width");
    bool first = true;
    for (const Cell& c : cells) {
      out_ << (first ? "" : ",") << c.text;
      first = false;
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
  std::size_t width_ = 0;
};

std::string short_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Long-format t,x,value rows from `first_level` on, with the config hash line.
std::string trajectory_csv(const std::string& hash, const char* value_name, const Trajectory& traj,
                           const UniformMesh1D& mesh, std::size_t first_level) {
  Csv csv(hash, {"t", "x", value_name});
  for (std::size_t m = first_level; m <= traj.grid().M(); ++m) {
    for (std::size_t j = 0; j < mesh.n_interior(); ++j) {
      csv.row({traj.grid().time(m), mesh.interior_node(j), traj.at(m)[static_cast<Eigen::Index>(j)]});
    }
  }
  return csv.str();
}

// ---- runners ------------------------------------------------------------------

struct Context {
  std::string hash;
  std::vector<OutputFile> files;
  json results = json::object();
};

void run_elliptic(const EllipticConfig& c, Context& ctx) {
  Csv csv(ctx.hash, {"s", "h", "err_l2", "err_energy", "rate_l2", "rate_energy"});
  json orders = json::array();
  const std::vector<double> hs = halving_sequence(c.h0, c.halvings);
  for (double s : c.s) {
    const auto rows = convergence_study(FractionalOrder(s), hs);
    std::vector<double> h, l2, energy;
    for (const auto& r : rows) {
      csv.row({s, r.h, r.err_l2, r.err_energy, r.rate_l2, r.rate_energy});
      h.push_back(r.h);
      l2.push_back(r.err_l2);
      energy.push_back(r.err_energy);
    }
    orders.push_back({{"s", s},
                      {"slope_energy", fitted_slope(h, energy)},
                      {"slope_l2", fitted_slope(h, l2)},
                      {"err_l2", l2},
                      {"err_energy", energy}});
  }
  ctx.files.push_back({"elliptic_convergence.csv", csv.str()});
  ctx.results["orders"] = orders;
}

json sweep_summary(double s, const std::vector<SweepRow>& rows) {
  std::vector<double> h, cost, term;
  for (const auto& r : rows) {
    h.push_back(r.h);
    cost.push_back(r.cost);
    term.push_back(r.terminal_norm);
  }
  bool cost_increasing = true, cost_nondecreasing = true, terminal_decreasing = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    cost_increasing = cost_increasing && cost[i] > cost[i - 1];
    cost_nondecreasing = cost_nondecreasing && cost[i] >= cost[i - 1];
    terminal_decreasing = terminal_decreasing && term[i] < term[i - 1];
  }
  const auto [lo, hi] = std::minmax_element(cost.begin(), cost.end());
  return {{"s", s},
          {"h", h},
          {"cost", cost},
          {"terminal_norm", term},
          {"cost_ratio", *hi / *lo},
          {"terminal_slope", fitted_slope(h, term)},
          {"cost_increasing", cost_increasing},
          {"cost_nondecreasing", cost_nondecreasing},
          {"terminal_decreasing", terminal_decreasing}};
}

void run_interior(const InteriorConfig& c, Context& ctx) {
  const std::vector<double> hs = halving_sequence(c.h0, c.halvings);
  const ControlRegion region(c.omega.lo, c.omega.hi);
  HumSettings settings;
  settings.cg_tol = c.cg_tol;
  settings.cg_max_iter = c.cg_max_iter;
  json orders = json::array();
  for (double s : c.s) {
    const auto rows = diagnostics_sweep(FractionalOrder(s), hs, c.domain.lo, c.domain.hi, region, c.T, c.M,
                                        c.y0.function(), settings, c.modal);
    Csv csv(ctx.hash, {"h", "beta", "cost", "energy", "terminal_norm", "iterations"});
    for (const auto& r : rows) csv.row({r.h, r.beta, r.cost, r.optimal_energy, r.terminal_norm, r.iterations});
    const std::string stem = "interior_s" + short_real(s);
    ctx.files.push_back({stem + ".csv", csv.str()});
    orders.push_back(sweep_summary(s, rows));

    if (c.export_trajectory) {
      const InteriorProblem problem{FractionalOrder(s), UniformMesh1D::with_step(c.domain.lo, c.domain.hi, hs.back()),
                                    region, TimeGrid(c.T, c.M)};
      const LinearHeatControl sys = make_interior_system(problem, c.modal);
      HumSettings fine = settings;
      fine.beta = penalty_rule(problem.mesh.h(), problem.s);
      const HumResult r = cg_minimize(sys, interpolate(problem.mesh, c.y0.function()), fine);
      ctx.files.push_back({stem + "_state.csv", trajectory_csv(ctx.hash, "y", r.y, problem.mesh, 1)});
      ctx.files.push_back({stem + "_control.csv", trajectory_csv(ctx.hash, "u", r.control, problem.mesh, 2)});
    }
  }
  ctx.results["orders"] = orders;
}

ExteriorGeometry geometry(const ExteriorConfig& c) {
  ExteriorGeometry g;
  g.a_ext = c.extended.lo;
  g.b_ext = c.extended.hi;
  g.control = ControlRegion(c.control.lo, c.control.hi);
  g.robin_n = c.robin_n;
  g.kappa = c.kappa;
  return g;
}

void run_exterior(const ExteriorConfig& c, Context& ctx) {
  const ExteriorGeometry geom = geometry(c);
  const std::vector<double> hs = halving_sequence(c.h0, c.halvings);
  HumSettings settings;
  settings.cg_tol = c.cg_tol;
  settings.cg_max_iter = c.cg_max_iter;
  json orders = json::array();
  for (double s : c.s) {
    const auto rows = exterior_sweep(FractionalOrder(s), hs, geom, c.T, c.M, c.y0.function(), settings);
    Csv csv(ctx.hash, {"h", "beta", "cost", "energy", "terminal_norm", "iterations", "robin_n", "kappa"});
    for (const auto& r : rows) {
      csv.row({r.h, r.beta, r.cost, r.optimal_energy, r.terminal_norm, r.iterations, c.robin_n, c.kappa});
    }
    ctx.files.push_back({"exterior_s" + short_real(s) + ".csv", csv.str()});
    orders.push_back(sweep_summary(s, rows));
  }
  ctx.results["orders"] = orders;

  if (c.consistency.enabled) {
    const auto& cc = c.consistency;
    const UniformMesh1D mesh = UniformMesh1D::with_step(c.extended.lo, c.extended.hi, cc.h);
    Csv csv(ctx.hash, {"n", "d_n", "d_2n", "ratio"});
    json rows = json::array();
    for (double n : cc.n) {
      const RobinConsistency rc =
          robin_consistency(FractionalOrder(cc.s), mesh, geom, TimeGrid(c.T, cc.M), c.y0.function(), n);
      csv.row({n, rc.d_n, rc.d_2n, rc.d_2n / rc.d_n});
      rows.push_back({{"n", n}, {"d_n", rc.d_n}, {"d_2n", rc.d_2n}, {"ratio", rc.d_2n / rc.d_n}});
    }
    ctx.files.push_back({"robin_consistency.csv", csv.str()});
    ctx.results["consistency"] = {{"s", cc.s}, {"rows", rows}};
  }
}

void run_constrained(const ConstrainedConfig& c, Context& ctx) {
  const ConstrainedProblem problem{FractionalOrder(c.s),
                                   UniformMesh1D::with_step(c.domain.lo, c.domain.hi, c.h),
                                   ControlRegion(c.omega.lo, c.omega.hi),
                                   c.M,
                                   c.y0.function(),
                                   c.y_hat0.function(),
                                   c.u_hat};
  ConstrainedSettings settings;
  settings.beta = c.beta;
  settings.gap_rel = c.gap_rel;
  const NodalVector mask = control_mask(problem.mesh, problem.region);

  Csv summary(ctx.hash, {"T", "feasible", "terminal_gap", "gap_tol", "min_gap", "objective", "control_max",
                         "support_fraction", "state_min", "evaluations", "converged"});
  json horizons = json::array();
  auto record = [&](const std::string& label, const ConstrainedResult& r) {
    const double fraction = mass_support_fraction(r.control, mask);
    summary.row({r.T_used, r.feasible, r.terminal_gap, r.gap_tol, r.min_gap, r.objective, r.control_max, fraction,
                 r.state_min, r.iterations, r.converged});
    const std::string stem = "constrained_T" + label;
    ctx.files.push_back({stem + "_control.csv", trajectory_csv(ctx.hash, "u", r.control, problem.mesh, 2)});
    ctx.files.push_back({stem + "_state.csv", trajectory_csv(ctx.hash, "y", r.y, problem.mesh, 1)});
    Csv terminal(ctx.hash, {"x", "y_T", "y_hat_T"});
    for (std::size_t j = 0; j < problem.mesh.n_interior(); ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      terminal.row({problem.mesh.interior_node(j), r.y.terminal()[k], r.target_T[k]});
    }
    ctx.files.push_back({stem + "_terminal.csv", terminal.str()});
    return json{{"label", label},
                {"T", r.T_used},
                {"feasible", r.feasible},
                {"terminal_gap", r.terminal_gap},
                {"gap_tol", r.gap_tol},
                {"min_gap", r.min_gap},
                {"control_max", r.control_max},
                {"support_fraction", fraction}};
  };

  for (double T : c.T) horizons.push_back(record(short_real(T), solve_constrained(problem, T, settings)));

  if (c.min_time) {
    const MinTimeResult mt = min_time_estimate(problem, c.bracket.lo, c.bracket.hi, settings, c.width);
    Csv trace(ctx.hash, {"T", "terminal_gap", "gap_tol", "feasible"});
    for (const auto& step : mt.trace) trace.row({step.T, step.gap, step.gap_tol, step.feasible});
    ctx.files.push_back({"constrained_bisection.csv", trace.str()});
    json entry = {{"T_min", mt.T_min}, {"lo", mt.lo}, {"hi", mt.hi}};
    if (mt.at_hi) entry["at_hi"] = record("min", *mt.at_hi);
    ctx.results["min_time"] = entry;
  }
  // the summary table goes first among this kind's files
  ctx.files.insert(ctx.files.begin(), OutputFile{"constrained_summary.csv", summary.str()});
  ctx.results["horizons"] = horizons;
}

void run_simultaneous(const SimultaneousConfig& c, std::uint64_t seed, Context& ctx) {
  const UniformMesh1D mesh = UniformMesh1D::with_step(c.domain.lo, c.domain.hi, c.h);
  const ControlRegion region(c.omega.lo, c.omega.hi);
  const TimeGrid grid(c.T, c.M);
  const auto has = [&](const char* a) { return std::find(c.algorithms.begin(), c.algorithms.end(), a) != c.algorithms.end(); };

  ComparisonSettings cs;
  cs.sizes = c.sizes;
  cs.s_lo = c.s_range.lo;
  cs.s_hi = c.s_range.hi;
  cs.run_gd = has("gd");
  cs.run_cg = has("cg");
  cs.run_sgd = has("sgd");
  cs.sgd_seeds = c.sgd_seeds;
  cs.gd.beta = cs.cg.beta = cs.adam.beta = c.beta;
  cs.gd.tol = cs.cg.tol = cs.adam.tol = c.tol;
  cs.gd.eta = c.gd_eta;
  cs.gd.max_iter = c.gd_max_iter;
  cs.cg.max_iter = c.cg_max_iter;
  cs.adam.eta = c.adam.eta;
  cs.adam.gamma1 = c.adam.gamma1;
  cs.adam.gamma2 = c.adam.gamma2;
  cs.adam.delta = c.adam.delta;
  cs.adam.window = c.adam.window;
  cs.adam.max_iter = c.adam.max_iter;
  cs.adam.standard = c.adam.standard;
  cs.adam.seed = seed;

  const auto rows = run_comparison(mesh, region, grid, c.y0.function(), cs);

  Csv table(ctx.hash, {"K", "algorithm", "seed", "iterations", "pde_solve_count", "monitor_solve_count",
                       "final_functional", "terminal_expectation", "max_terminal_norm", "converged"});
  json runs = json::array();
  for (const auto& r : rows) {
    const OptimizerTrace& t = r.trace;
    table.row({r.K, t.algorithm, std::to_string(r.seed), t.iterations, t.pde_solve_count, t.monitor_solve_count,
               t.final_functional, t.terminal_expectation, t.max_terminal_norm, t.converged});
    runs.push_back({{"K", r.K},
                    {"algorithm", t.algorithm},
                    {"seed", r.seed},
                    {"iterations", t.iterations},
                    {"pde_solve_count", t.pde_solve_count},
                    {"monitor_solve_count", t.monitor_solve_count},
                    {"final_functional", t.final_functional},
                    {"terminal_expectation", t.terminal_expectation},
                    {"max_terminal_norm", t.max_terminal_norm},
                    {"converged", t.converged},
                    {"step", t.step},
                    {"wall_time_seconds", t.wall_time}});
  }
  ctx.files.push_back({"simultaneous.csv", table.str()});

  Csv cond(ctx.hash, {"K", "lambda_max", "rho", "c_gd", "c_cg"});
  json conditioning = json::array();
  for (std::size_t K : c.sizes) {
    const OperatorCache cache(ParameterSet::uniform(K, c.s_range.lo, c.s_range.hi), mesh, region, grid);
    const Conditioning k = estimate_conditioning(cache, c.beta);
    cond.row({K, k.lambda_max, k.rho, k.c_gd, k.c_cg});
    conditioning.push_back({{"K", K}, {"lambda_max", k.lambda_max}, {"rho", k.rho}, {"c_gd", k.c_gd}, {"c_cg", k.c_cg}});
  }
  ctx.files.push_back({"simultaneous_conditioning.csv", cond.str()});
  ctx.results["runs"] = runs;
  ctx.results["conditioning"] = conditioning;
}

}  // namespace

std::string_view kind_name(Kind kind) {
  for (const auto& [k, n] : kKindNames) {
    if (k == kind) return n;
  }
  return "unknown";
}

std::string_view subcommand_name(Kind kind) {
  for (const auto& [k, n] : kSubcommands) {
    if (k == kind) return n;
  }
  return "unknown";
}

std::optional<Kind> kind_from_subcommand(std::string_view name) {
  for (const auto& [k, n] : kSubcommands) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::function<double(double)> Profile::function() const {
  const double a = amplitude;
  const double k = wavenumber * std::numbers::pi;
  if (shape == "sin") return [a, k](double x) { return a * std::sin(k * x); };
  if (shape == "cos") return [a, k](double x) { return a * std::cos(k * x); };
  return [a](double) { return a; };
}

ExperimentConfig parse_config(const json& tree) {
  Reader root(tree, "");
  std::string kind_text;
  root.req("experiment", kind_text);
  ExperimentConfig config;
  bool known = false;
  for (const auto& [k, n] : kKindNames) {
    if (n == kind_text) {
      config.kind = k;
      known = true;
    }
  }
  if (!known) fail("experiment", "unknown experiment kind '" + kind_text + "'");
  root.opt("seed", config.seed);
  root.opt("output_dir", config.output_dir);

  const std::string key(kind_name(config.kind));
  const json* section = root.child(key.c_str());
  const json empty = json::object();
  const json& node = section ? *section : empty;
  switch (config.kind) {
    case Kind::elliptic: config.section = parse_elliptic(node, key); break;
    case Kind::interior: config.section = parse_interior(node, key); break;
    case Kind::exterior: config.section = parse_exterior(node, key); break;
    case Kind::constrained: config.section = parse_constrained(node, key); break;
    case Kind::simultaneous: config.section = parse_simultaneous(node, key); break;
  }
  root.finish();
  return config;
}

ExperimentConfig parse_config_text(std::string_view text) {
  json tree;
  try {
    tree = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  return parse_config(tree);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

json to_json(const ExperimentConfig& config) {
  json tree = {{"experiment", kind_name(config.kind)}, {"seed", config.seed}, {"output_dir", config.output_dir}};
  tree[std::string(kind_name(config.kind))] = std::visit([](const auto& s) { return section_json(s); }, config.section);
  return tree;
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.output_dir) config.output_dir = *o.output_dir;
  auto* sim = std::get_if<SimultaneousConfig>(&config.section);
  auto* con = std::get_if<ConstrainedConfig>(&config.section);
  if ((o.sizes || o.algorithm || o.adam_standard) && !sim) {
    throw ConfigError("--sizes, --algo and --adam-standard apply to the simultaneous experiment only");
  }
  if ((o.T || o.min_time) && !con) throw ConfigError("--T and --min-time apply to the constrained experiment only");
  if (o.sizes) {
    if (o.sizes->empty()) throw ConfigError("--sizes needs at least one value");
    for (std::size_t k : *o.sizes) {
      if (k < 1) throw ConfigError("--sizes values must be at least 1");
    }
    sim->sizes = *o.sizes;
  }
  if (o.algorithm) {
    if (*o.algorithm == "all") {
      sim->algorithms = {"gd", "cg", "sgd"};
    } else if (*o.algorithm == "gd" || *o.algorithm == "cg" || *o.algorithm == "sgd") {
      sim->algorithms = {*o.algorithm};
    } else {
      throw ConfigError("--algo must be gd, cg, sgd or all");
    }
  }
  if (o.adam_standard) sim->adam.standard = *o.adam_standard;
  if (o.T) {
    if (!(*o.T > 0.0) || !std::isfinite(*o.T)) throw ConfigError("--T must be positive");
    con->T = {*o.T};
    con->min_time = o.min_time.value_or(false);
  } else if (o.min_time) {
    con->min_time = *o.min_time;
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  // where the files go does not change what is in them
  nlohmann::json tree = to_json(config);
  tree.erase("output_dir");
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(tree.dump()));
  return buf;
}

std::string build_id() { return FRACLAP_BUILD_ID; }

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

RunOutput run(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx;
  ctx.hash = config_hash(config);
  std::visit(
      [&](const auto& section) {
        using T = std::decay_t<decltype(section)>;
        if constexpr (std::is_same_v<T, EllipticConfig>) run_elliptic(section, ctx);
        if constexpr (std::is_same_v<T, InteriorConfig>) run_interior(section, ctx);
        if constexpr (std::is_same_v<T, ExteriorConfig>) run_exterior(section, ctx);
        if constexpr (std::is_same_v<T, ConstrainedConfig>) run_constrained(section, ctx);
        if constexpr (std::is_same_v<T, SimultaneousConfig>) run_simultaneous(section, config.seed, ctx);
      },
      config.section);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RunOutput out;
  json names = json::array();
  for (const auto& f : ctx.files) names.push_back(f.name);
  out.summary = {{"experiment", kind_name(config.kind)},
                 {"config_hash", ctx.hash},
                 {"provenance", {{"build_id", build_id()}, {"config", to_json(config)}}},
                 {"results", ctx.results},
                 {"files", names},
                 {"wall_time_seconds", seconds}};
  out.files = std::move(ctx.files);
  out.files.push_back({"summary.json", out.summary.dump(2) + "\n"});
  return out;
}

void write_outputs(const std::filesystem::path& dir, const RunOutput& output) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<fs::path> temporaries;
  auto cleanup = [&] {
    for (const auto& p : temporaries) fs::remove(p, ec);
  };
  for (const auto& f : output.files) {
    const fs::path tmp = dir / (f.name + ".partial");
    temporaries.push_back(tmp);
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << f.content;
    os.close();
    if (!os) {
      cleanup();
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
  }
  for (std::size_t i = 0; i < output.files.size(); ++i) {
    fs::rename(temporaries[i], dir / output.files[i].name, ec);
    if (ec) {
      const std::string why = ec.message();
      cleanup();
      for (std::size_t j = 0; j < i; ++j) fs::remove(dir / output.files[j].name, ec);
      throw std::runtime_error("cannot rename '" + temporaries[i].string() + "': " + why);
    }
  }
}

std::vector<OutputFile> bundled_defaults() {
  std::vector<OutputFile> files;
  auto add = [&](Kind kind, Section section) {
    ExperimentConfig c;
    c.kind = kind;
    c.output_dir = "out/" + std::string(kind_name(kind));
    c.section = std::move(section);
    files.push_back({std::string(kind_name(kind)) + ".json", to_json(c).dump(2) + "\n"});
  };
  add(Kind::elliptic, EllipticConfig{});
  add(Kind::interior, InteriorConfig{});
  add(Kind::exterior, ExteriorConfig{});
  add(Kind::constrained, ConstrainedConfig{});
  add(Kind::simultaneous, SimultaneousConfig{});
  return files;
}

}  // namespace fraclap::experiment
