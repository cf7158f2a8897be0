#include "fraclap/fe_core.hpp"

#include "fraclap/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace fraclap {

namespace {

constexpr double kPi = std::numbers::pi;

// Near-field bands use the fourth difference of t^{3-2s} directly; from this
// distance on the difference is evaluated by its asymptotic Taylor series.
constexpr std::size_t kSeriesThreshold = 16;

// g(t) = t^2 (t^eps - 1) / eps with eps = 1 - 2s, extended by t^2 log t at
// eps = 0. Since the fourth difference annihilates t^2, summing g gives the
// fourth difference of t^{3-2s} divided by (1 - 2s) without cancellation.
double reduced_power(double t, double eps) {
  if (t == 0.0) return 0.0;
  const double log_t = std::log(t);
  if (std::abs(eps) < 1e-9) return t * t * log_t;
  return t * t * std::expm1(eps * log_t) / eps;
}

// Fourth central difference of t^p (p = 3 - 2s) at integer k >= threshold,
// divided by (1 - 2s), via sum_j (2^{j+1} - 8)/j! * D^j[t^p](k).
double reduced_fourth_difference_series(double k, double p) {
  // falling factorial of p without the (p - 2) factor, which cancels 1 - 2s
  double falling = p * (p - 1.0);
  double sum = 0.0;
  double factorial = 2.0;
  for (int j = 2; j < 80; ++j) {
    if (j != 2) falling *= (p - j);
    factorial *= (j + 1);
    const int order = j + 1;  // derivative order just completed
    if (order < 4 || order % 2 != 0) continue;
    const double weight = (std::ldexp(1.0, order + 1) - 8.0) / factorial;
    const double term = weight * falling * std::pow(k, p - order);
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

double integrate_gauss(const std::function<double(double)>& f, double lo, double hi) {
  return boost::math::quadrature::gauss<double, 10>::integrate(f, lo, hi);
}

}  // namespace

FractionalOrder::FractionalOrder(double s) : s_(s) {
  if (!(s > 0.0 && s < 1.0)) {
    throw InvalidArgument("fe_core", "fractional order must lie in (0, 1), got " + std::to_string(s));
  }
}

UniformMesh1D::UniformMesh1D(double a, double b, std::size_t n_interior)
    : a_(a), b_(b), n_(n_interior), h_((b - a) / static_cast<double>(n_interior + 1)) {
  if (!(a < b)) throw InvalidArgument("fe_core", "mesh requires a < b");
  if (n_interior == 0) throw InvalidArgument("fe_core", "mesh requires at least one interior node");
}

UniformMesh1D UniformMesh1D::with_step(double a, double b, double h) {
  if (!(h > 0.0)) throw InvalidArgument("fe_core", "mesh step must be positive");
  const double elements = (b - a) / h;
  const double rounded = std::round(elements);
  if (std::abs(elements - rounded) > 1e-8 * std::max(1.0, elements) || rounded < 2.0) {
    throw InvalidArgument("fe_core", "mesh step does not divide the interval");
  }
  return UniformMesh1D(a, b, static_cast<std::size_t>(rounded) - 1);
}

SymDenseMatrix::SymDenseMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols()) throw DimensionError("fe_core", "matrix is not square");
  const double scale = entries_.cwiseAbs().maxCoeff();
  const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(scale, std::numeric_limits<double>::min())) {
    throw DimensionError("fe_core", "matrix is not symmetric");
  }
}

SymDenseMatrix SymDenseMatrix::toeplitz(const std::vector<double>& bands, std::size_t order) {
  if (bands.size() < order) throw DimensionError("fe_core", "not enough Toeplitz bands");
  Eigen::MatrixXd m(order, order);
  for (std::size_t j = 0; j < order; ++j) {
    for (std::size_t i = 0; i < order; ++i) {
      m(i, j) = bands[i > j ? i - j : j - i];
    }
  }
  return SymDenseMatrix(std::move(m));
}

NodalVector SymDenseMatrix::apply(const NodalVector& v) const {
  if (static_cast<std::size_t>(v.size()) != order()) throw DimensionError("fe_core", "size mismatch in apply");
  return entries_.selfadjointView<Eigen::Lower>() * v;
}

void SymDenseMatrix::write_csv(std::ostream& os, double s, double h) const {
  os << "order,s,h\n" << std::setprecision(17) << order() << ',' << s << ',' << h << '\n';
  for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
    for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
      os << (j ? "," : "") << entries_(i, j);
    }
    os << '\n';
  }
}

SymTridiagonalMatrix::SymTridiagonalMatrix(Eigen::VectorXd diagonal, Eigen::VectorXd off_diagonal)
    : diag_(std::move(diagonal)), off_(std::move(off_diagonal)) {
  if (diag_.size() == 0 || off_.size() != diag_.size() - 1) {
    throw DimensionError("fe_core", "inconsistent tridiagonal storage");
  }
}

double SymTridiagonalMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i == j) return diag_[i];
  if (i + 1 == j) return off_[i];
  if (j + 1 == i) return off_[j];
  return 0.0;
}

NodalVector SymTridiagonalMatrix::apply(const NodalVector& v) const {
  const Eigen::Index n = diag_.size();
  if (v.size() != n) throw DimensionError("fe_core", "size mismatch in apply");
  NodalVector out = diag_.cwiseProduct(v);
  if (n > 1) {
    out.head(n - 1) += off_.cwiseProduct(v.tail(n - 1));
    out.tail(n - 1) += off_.cwiseProduct(v.head(n - 1));
  }
  return out;
}

Eigen::MatrixXd SymTridiagonalMatrix::to_dense() const {
  const Eigen::Index n = diag_.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m.diagonal() = diag_;
  if (n > 1) {
    m.diagonal(1) = off_;
    m.diagonal(-1) = off_;
  }
  return m;
}

void SymTridiagonalMatrix::write_csv(std::ostream& os, double s, double h) const {
  SymDenseMatrix(to_dense()).write_csv(os, s, h);
}

double normalization_constant(int d, FractionalOrder order) {
  if (d != 1 && d != 2) throw InvalidArgument("fe_core", "normalization constant needs d in {1, 2}");
  const double s = order.value();
  const double dd = d;
  return s * std::exp2(2.0 * s) * std::tgamma((2.0 * s + dd) / 2.0) /
         (std::pow(kPi, dd / 2.0) * std::tgamma(1.0 - s));
}

std::vector<double> stiffness_bands(FractionalOrder order, std::size_t count) {
  const double s = order.value();
  const double eps = 1.0 - 2.0 * s;
  const double p = 3.0 - 2.0 * s;
  // a_k = C_{1,s} / (2s (2-2s) (3-2s)) * [fourth difference of t^{3-2s} at k] / (1-2s)
  const double prefactor =
      normalization_constant(1, order) / (2.0 * s * (2.0 - 2.0 * s) * (3.0 - 2.0 * s));
  static constexpr double kWeights[5] = {1.0, -4.0, 6.0, -4.0, 1.0};

  std::vector<double> bands(count);
  for (std::size_t k = 0; k < count; ++k) {
    double reduced = 0.0;
    if (k < kSeriesThreshold) {
      for (int m = -2; m <= 2; ++m) {
        const double t = std::abs(static_cast<double>(k) + m);
        reduced += kWeights[m + 2] * reduced_power(t, eps);
      }
    } else {
      reduced = reduced_fourth_difference_series(static_cast<double>(k), p);
    }
    bands[k] = prefactor * reduced;
    if (!std::isfinite(bands[k])) throw AssemblyError("non-finite stiffness entry", k);
    if ((k == 0 && !(bands[k] > 0.0)) || (k >= 2 && !(bands[k] < 0.0))) {
      throw AssemblyError("stiffness entry has the wrong sign", k);
    }
  }
  return bands;
}

SymTridiagonalMatrix assemble_mass(const UniformMesh1D& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.n_interior());
  const double h = mesh.h();
  return SymTridiagonalMatrix(Eigen::VectorXd::Constant(n, 2.0 * h / 3.0),
                              Eigen::VectorXd::Constant(n - 1, h / 6.0));
}

SymDenseMatrix assemble_stiffness(const UniformMesh1D& mesh, FractionalOrder s) {
  std::vector<double> bands = stiffness_bands(s, mesh.n_interior());
  const double scale = std::pow(mesh.h(), 1.0 - 2.0 * s.value());
  for (double& b : bands) b *= scale;
  return SymDenseMatrix::toeplitz(bands, mesh.n_interior());
}

NodalVector interpolate(const UniformMesh1D& mesh, const std::function<double(double)>& f) {
  NodalVector v(mesh.n_interior());
  for (std::size_t j = 0; j < mesh.n_interior(); ++j) v[j] = f(mesh.interior_node(j));
  return v;
}

NodalVector solve_elliptic(const SymDenseMatrix& A, const SymTridiagonalMatrix& M, const NodalVector& f) {
  if (A.order() != M.order() || static_cast<std::size_t>(f.size()) != A.order()) {
    throw DimensionError("fe_core", "elliptic system dimensions disagree");
  }
  const NodalVector rhs = M.apply(f);
  if (rhs.isZero(0.0)) return NodalVector::Zero(f.size());
  Eigen::LLT<Eigen::MatrixXd> llt(A.dense());
  if (llt.info() != Eigen::Success) throw SolveError("fe_core", "stiffness matrix is not positive definite");
  NodalVector u = llt.solve(rhs);
  const double residual = (A.apply(u) - rhs).norm() / rhs.norm();
  if (!(residual <= 1e-10)) {
    throw SolveError("fe_core", "elliptic residual " + std::to_string(residual) + " above 1e-10");
  }
  return u;
}

double exact_getoor_solution(FractionalOrder order, double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  const double s = order.value();
  const double gamma_s =
      std::exp2(-2.0 * s) * std::sqrt(kPi) / (std::tgamma((1.0 + 2.0 * s) / 2.0) * std::tgamma(1.0 + s));
  return gamma_s * std::pow(1.0 - x * x, s);
}

double error_l2(const NodalVector& u_h, const std::function<double(double)>& u_exact,
                const UniformMesh1D& mesh) {
  if (static_cast<std::size_t>(u_h.size()) != mesh.n_interior()) {
    throw DimensionError("fe_core", "nodal vector does not match mesh");
  }
  const std::size_t n_el = mesh.n_elements();
  const double h = mesh.h();
  auto nodal = [&](std::size_t i) { return (i == 0 || i == n_el) ? 0.0 : u_h[i - 1]; };

  double total = 0.0;
  for (std::size_t e = 0; e < n_el; ++e) {
    const double x0 = mesh.node(e);
    const double u0 = nodal(e);
    const double u1 = nodal(e + 1);
    auto sq_err = [&](double x) {
      const double d = u_exact(x) - (u0 + (u1 - u0) * (x - x0) / h);
      return d * d;
    };
    if (e == 0 || e + 1 == n_el) {
      // geometric grading toward the outer endpoint
      const bool left = (e == 0);
      double inner = h;
      for (int level = 0; level < 40; ++level) {
        const double outer = inner / 4.0;
        total += left ? integrate_gauss(sq_err, x0 + outer, x0 + inner)
                      : integrate_gauss(sq_err, x0 + h - inner, x0 + h - outer);
        inner = outer;
      }
      total += left ? integrate_gauss(sq_err, x0, x0 + inner)
                    : integrate_gauss(sq_err, x0 + h - inner, x0 + h);
    } else {
      total += integrate_gauss(sq_err, x0, x0 + h);
    }
  }
  return std::sqrt(total);
}

NodalVector prolong(const UniformMesh1D& coarse, const NodalVector& u, const UniformMesh1D& fine) {
  const double ratio_real = static_cast<double>(fine.n_elements()) / static_cast<double>(coarse.n_elements());
  const auto ratio = static_cast<std::size_t>(std::llround(ratio_real));
  if (std::abs(coarse.a() - fine.a()) > 1e-12 || std::abs(coarse.b() - fine.b()) > 1e-12 || ratio < 1 ||
      ratio * coarse.n_elements() != fine.n_elements()) {
    throw DimensionError("fe_core", "meshes are not nested");
  }
  if (static_cast<std::size_t>(u.size()) != coarse.n_interior()) {
    throw DimensionError("fe_core", "nodal vector does not match coarse mesh");
  }
  const std::size_t n_el = coarse.n_elements();
  auto nodal = [&](std::size_t i) { return (i == 0 || i == n_el) ? 0.0 : u[i - 1]; };
  NodalVector out(fine.n_interior());
  for (std::size_t j = 0; j < fine.n_interior(); ++j) {
    const std::size_t i = j + 1;
    const std::size_t e = i / ratio;
    const std::size_t r = i % ratio;
    const double w = static_cast<double>(r) / static_cast<double>(ratio);
    out[j] = r == 0 ? nodal(e) : (1.0 - w) * nodal(e) + w * nodal(e + 1);
  }
  return out;
}

double error_energy(const NodalVector& u_h, const UniformMesh1D& mesh, const NodalVector& u_ref,
                    const SymDenseMatrix& A_ref, const UniformMesh1D& ref_mesh) {
  if (A_ref.order() != ref_mesh.n_interior() || static_cast<std::size_t>(u_ref.size()) != ref_mesh.n_interior()) {
    throw DimensionError("fe_core", "reference data does not match reference mesh");
  }
  const NodalVector e = prolong(mesh, u_h, ref_mesh) - u_ref;
  return std::sqrt(std::max(0.0, e.dot(A_ref.apply(e))));
}

double getoor_energy_error(const NodalVector& u_h, const SymDenseMatrix& A, const UniformMesh1D& mesh,
                           FractionalOrder order) {
  if (std::abs(mesh.a() + 1.0) > 1e-14 || std::abs(mesh.b() - 1.0) > 1e-14) {
    throw DimensionError("fe_core", "benchmark is posed on (-1, 1)");
  }
  const double s = order.value();
  const double gamma_s =
      std::exp2(-2.0 * s) * std::sqrt(kPi) / (std::tgamma((1.0 + 2.0 * s) / 2.0) * std::tgamma(1.0 + s));
  // a(u, u) = (1, u) = gamma_s * B(1/2, s + 1)
  const double exact_energy = gamma_s * std::sqrt(kPi) * std::tgamma(s + 1.0) / std::tgamma(s + 1.5);
  const double load = mesh.h() * u_h.sum();
  const double sq = exact_energy - 2.0 * load + u_h.dot(A.apply(u_h));
  return std::sqrt(std::max(0.0, sq));
}

std::vector<ConvergenceRow> convergence_study(FractionalOrder s, const std::vector<double>& h_sequence) {
  if (h_sequence.size() < 3) throw InvalidArgument("fe_core", "convergence study needs at least 3 mesh sizes");
  for (std::size_t i = 1; i < h_sequence.size(); ++i) {
    if (!(h_sequence[i] < h_sequence[i - 1])) {
      throw InvalidArgument("fe_core", "mesh sizes must be strictly decreasing");
    }
  }
  const auto exact = [s](double x) { return exact_getoor_solution(s, x); };
  std::vector<ConvergenceRow> rows;
  for (double h : h_sequence) {
    const UniformMesh1D mesh = UniformMesh1D::with_step(-1.0, 1.0, h);
    const SymDenseMatrix A = assemble_stiffness(mesh, s);
    const SymTridiagonalMatrix M = assemble_mass(mesh);
    const NodalVector u = solve_elliptic(A, M, NodalVector::Ones(mesh.n_interior()));
    ConvergenceRow row;
    row.h = mesh.h();
    row.err_l2 = error_l2(u, exact, mesh);
    row.err_energy = getoor_energy_error(u, A, mesh, s);
    row.rate_l2 = std::numeric_limits<double>::quiet_NaN();
    row.rate_energy = std::numeric_limits<double>::quiet_NaN();
    if (!rows.empty()) {
      const ConvergenceRow& prev = rows.back();
      const double dh = std::log2(prev.h / row.h);
      row.rate_l2 = std::log2(prev.err_l2 / row.err_l2) / dh;
      row.rate_energy = std::log2(prev.err_energy / row.err_energy) / dh;
    }
    rows.push_back(row);
  }
  return rows;
}

double fitted_slope(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw InvalidArgument("fe_core", "slope fit needs matching samples");
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace fraclap
