#pragma once

// Dense complex linear algebra and Simpson quadrature shared by the rest of
// the library. Matrices are Eigen dense types; everything here is a pure
// function of its arguments.

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace micromaser {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};

/// Raised for shape mismatches and other misuse of the numerics kernels.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative or spectral routine fails to produce a result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Kronecker product of a list of factors, left to right.
CMatrix kron_all(std::span<const CMatrix> factors);

/// Reduced matrix over the subsystems listed in `keep` (ascending, unique).
/// `dims` lists every subsystem dimension in tensor order.
CMatrix partial_trace(const CMatrix& m, std::span<const int> dims,
                      std::span<const int> keep);

bool is_hermitian(const CMatrix& m, double tol = 1e-12);

/// Largest entrywise |M†M - I|.
double unitarity_residual(const CMatrix& u);

/// Eigenvalues of a Hermitian matrix, ascending.
Eigen::VectorXd hermitian_eigenvalues(const CMatrix& h);

/// 0.5 * sum |eig(a - b)| for Hermitian a, b.
double trace_distance(const CMatrix& a, const CMatrix& b);

/// exp(-i h t) for Hermitian h.
CMatrix herm_propagator(const CMatrix& h, double t);

/// Holds one eigendecomposition of a Hermitian generator so that exp(-i h t)
/// can be formed for many t without refactorising.
class HermitianPropagator {
 public:
  explicit HermitianPropagator(const CMatrix& h);

  CMatrix at(double t) const;
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

 private:
  Eigen::VectorXd eigenvalues_;
  CMatrix eigenvectors_;
};

inline constexpr int kDefaultPanels = 256;

namespace detail {
inline void check_panels(int n) {
  if (n < 8 || n % 2 != 0) {
    throw DimensionError("Simpson rule needs an even panel count >= 8");
  }
}
inline double simpson_weight(int i, int n) {
  if (i == 0 || i == n) return 1.0;
  return (i % 2 == 1) ? 4.0 : 2.0;
}
}  // namespace detail

/// Composite Simpson estimate of the integral of f over [a, b].
template <class F>
auto quad_1d(F&& f, double a, double b, int n_points = kDefaultPanels) {
  detail::check_panels(n_points);
  const double h = (b - a) / n_points;
  using R = decltype(f(a));
  R sum{};
  for (int i = 0; i <= n_points; ++i) {
    sum += detail::simpson_weight(i, n_points) * f(a + i * h);
  }
  return sum * (h / 3.0);
}

/// Integral of f(t, t') over 0 <= t' <= t <= T. Nested Simpson: the inner
/// rule runs over [0, t] with the same panel count for every outer node.
template <class F>
auto quad_triangle(F&& f, double T, int n_points = kDefaultPanels) {
  detail::check_panels(n_points);
  using R = decltype(f(0.0, 0.0));
  const double h = T / n_points;
  R outer{};
  for (int i = 1; i <= n_points; ++i) {
    const double t = i * h;
    const double hi = t / n_points;
    R inner{};
    for (int j = 0; j <= n_points; ++j) {
      inner += detail::simpson_weight(j, n_points) * f(t, j * hi);
    }
    outer += detail::simpson_weight(i, n_points) * inner * (hi / 3.0);
  }
  return outer * (h / 3.0);
}

}  // namespace micromaser
