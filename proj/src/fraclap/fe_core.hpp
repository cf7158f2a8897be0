#pragma once

// P1 finite elements for the 1-D integral fractional Laplacian on a uniform
// mesh: mesh, mass and stiffness assembly, elliptic solves and error norms.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

namespace fraclap {

using NodalVector = Eigen::VectorXd;

// Exponent s of (-Delta)^s, restricted to the open interval (0, 1).
class FractionalOrder {
 public:
  explicit FractionalOrder(double s);
  double value() const noexcept { return s_; }
  bool operator==(const FractionalOrder&) const = default;

 private:
  double s_;
};

// Uniform partition a = x_0 < x_1 < ... < x_{N+1} = b. Unknowns live on the
// N interior nodes; interior node j (0-based) is x_{j+1}.
class UniformMesh1D {
 public:
  UniformMesh1D(double a, double b, std::size_t n_interior);

  // Mesh with step h; (b - a) / h must be an integer up to round-off.
  static UniformMesh1D with_step(double a, double b, double h);

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double h() const noexcept { return h_; }
  std::size_t n_interior() const noexcept { return n_; }
  std::size_t n_elements() const noexcept { return n_ + 1; }
  double node(std::size_t i) const noexcept { return a_ + static_cast<double>(i) * h_; }
  double interior_node(std::size_t j) const noexcept { return node(j + 1); }

 private:
  double a_;
  double b_;
  std::size_t n_;
  double h_;
};

// Dense symmetric matrix. Construction checks symmetry to 1e-12 relative.
class SymDenseMatrix {
 public:
  explicit SymDenseMatrix(Eigen::MatrixXd entries);

  // Symmetric Toeplitz matrix with a(i, j) = bands[|i - j|].
  static SymDenseMatrix toeplitz(const std::vector<double>& bands, std::size_t order);

  std::size_t order() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  const Eigen::MatrixXd& dense() const noexcept { return entries_; }
  NodalVector apply(const NodalVector& v) const;

  // Debug dump: header "order,s,h", one value line, then the rows.
  void write_csv(std::ostream& os, double s, double h) const;

 private:
  Eigen::MatrixXd entries_;
};

// Symmetric tridiagonal matrix (mass and control matrices).
class SymTridiagonalMatrix {
 public:
  SymTridiagonalMatrix(Eigen::VectorXd diagonal, Eigen::VectorXd off_diagonal);

  std::size_t order() const noexcept { return static_cast<std::size_t>(diag_.size()); }
  double operator()(std::size_t i, std::size_t j) const;
  const Eigen::VectorXd& diagonal() const noexcept { return diag_; }
  const Eigen::VectorXd& off_diagonal() const noexcept { return off_; }
  NodalVector apply(const NodalVector& v) const;
  double inner(const NodalVector& u, const NodalVector& v) const { return u.dot(apply(v)); }
  Eigen::MatrixXd to_dense() const;
  void write_csv(std::ostream& os, double s, double h) const;

 private:
  Eigen::VectorXd diag_;
  Eigen::VectorXd off_;
};

// C_{d,s} = s 2^{2s} Gamma((2s + d)/2) / (pi^{d/2} Gamma(1 - s)), d in {1, 2}.
double normalization_constant(int d, FractionalOrder s);

// Values a_k of the stiffness entries a_{i,i+k} on a mesh with h = 1; on a
// mesh of size h they scale by h^{1-2s}.
std::vector<double> stiffness_bands(FractionalOrder s, std::size_t count);

SymTridiagonalMatrix assemble_mass(const UniformMesh1D& mesh);
SymDenseMatrix assemble_stiffness(const UniformMesh1D& mesh, FractionalOrder s);

// Nodal interpolant on the interior nodes.
NodalVector interpolate(const UniformMesh1D& mesh, const std::function<double(double)>& f);

// Solves A u = M f by dense Cholesky; throws SolveError if A is not SPD.
NodalVector solve_elliptic(const SymDenseMatrix& A, const SymTridiagonalMatrix& M,
                           const NodalVector& f);

// Closed-form solution of (-Delta)^s u = 1 on (-1, 1), u = 0 outside.
double exact_getoor_solution(FractionalOrder s, double x);

// ||u - u_h||_{L^2(a,b)} by per-element Gauss quadrature; the two boundary
// elements are split geometrically to resolve the boundary layer.
double error_l2(const NodalVector& u_h, const std::function<double(double)>& u_exact,
                const UniformMesh1D& mesh);

// Linear interpolation of a coarse P1 function onto a nested finer mesh.
NodalVector prolong(const UniformMesh1D& coarse, const NodalVector& u, const UniformMesh1D& fine);

// sqrt(e^T A_ref e) with e = prolong(u_h) - u_ref. Throws DimensionError when
// the meshes are not nested.
double error_energy(const NodalVector& u_h, const UniformMesh1D& mesh, const NodalVector& u_ref,
                    const SymDenseMatrix& A_ref, const UniformMesh1D& ref_mesh);

// Exact energy error for the f = 1 benchmark on (-1, 1):
// |u - u_h|_a^2 = a(u, u) - 2 (1, u_h) + u_h^T A u_h.
double getoor_energy_error(const NodalVector& u_h, const SymDenseMatrix& A,
                           const UniformMesh1D& mesh, FractionalOrder s);

struct ConvergenceRow {
  double h = 0.0;
  double err_l2 = 0.0;
  double err_energy = 0.0;
  double rate_l2 = 0.0;      // NaN on the first row
  double rate_energy = 0.0;  // NaN on the first row
};

// Getoor benchmark on (-1, 1) over a strictly decreasing h sequence.
std::vector<ConvergenceRow> convergence_study(FractionalOrder s, const std::vector<double>& h_sequence);

// Least-squares slope of log(err) against log(h).
double fitted_slope(const std::vector<double>& h, const std::vector<double>& err);

}  // namespace fraclap
