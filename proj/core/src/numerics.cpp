#include "micromaser/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace micromaser {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix kron_all(std::span<const CMatrix> factors) {
  if (factors.empty()) return CMatrix::Identity(1, 1);
  CMatrix out = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k]);
  return out;
}

CMatrix partial_trace(const CMatrix& m, std::span<const int> dims,
                      std::span<const int> keep) {
  const int n_sub = static_cast<int>(dims.size());
  if (n_sub == 0) throw DimensionError("partial_trace: empty dimension list");
  long total = 1;
  for (int d : dims) {
    if (d <= 0) throw DimensionError("partial_trace: non-positive dimension");
    total *= d;
  }
  if (m.rows() != total || m.cols() != total) {
    throw DimensionError("partial_trace: product of dims does not match matrix size");
  }
  if (keep.empty()) throw DimensionError("partial_trace: keep set is empty");
  std::vector<bool> kept(n_sub, false);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const int s = keep[k];
    if (s < 0 || s >= n_sub || kept[s] || (k > 0 && keep[k - 1] > s)) {
      throw DimensionError("partial_trace: keep must be ascending valid subsystem indices");
    }
    kept[s] = true;
  }

  // Strides of each subsystem in the full (row-major tensor) index.
  std::vector<long> stride(n_sub, 1);
  for (int s = n_sub - 2; s >= 0; --s) stride[s] = stride[s + 1] * dims[s + 1];

  std::vector<int> kept_subs;
  std::vector<int> traced_subs;
  for (int s = 0; s < n_sub; ++s) (kept[s] ? kept_subs : traced_subs).push_back(s);

  auto offsets = [&](const std::vector<int>& subs) {
    std::vector<long> out{0};
    for (int s : subs) {
      std::vector<long> next;
      next.reserve(out.size() * dims[s]);
      for (long base : out) {
        for (int v = 0; v < dims[s]; ++v) next.push_back(base + v * stride[s]);
      }
      out = std::move(next);
    }
    return out;
  };
  const auto kept_off = offsets(kept_subs);
  const auto traced_off = offsets(traced_subs);

  const auto dk = static_cast<Eigen::Index>(kept_off.size());
  CMatrix out = CMatrix::Zero(dk, dk);
  for (Eigen::Index r = 0; r < dk; ++r) {
    for (Eigen::Index c = 0; c < dk; ++c) {
      Complex acc{};
      for (long t : traced_off) acc += m(kept_off[r] + t, kept_off[c] + t);
      out(r, c) = acc;
    }
  }
  return out;
}

bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double unitarity_residual(const CMatrix& u) {
  const CMatrix id = CMatrix::Identity(u.cols(), u.cols());
  return (u.adjoint() * u - id).cwiseAbs().maxCoeff();
}

Eigen::VectorXd hermitian_eigenvalues(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Hermitian eigenvalue computation failed");
  }
  return solver.eigenvalues();
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
  return 0.5 * hermitian_eigenvalues(a - b).cwiseAbs().sum();
}

HermitianPropagator::HermitianPropagator(const CMatrix& h) {
  if (h.rows() != h.cols()) throw DimensionError("propagator generator must be square");
  if (!is_hermitian(h, 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff()))) {
    throw DimensionError("propagator generator is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Hermitian eigendecomposition failed");
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
}

CMatrix HermitianPropagator::at(double t) const {
  const CVector phases =
      (eigenvalues_.cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
  return eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint();
}

CMatrix herm_propagator(const CMatrix& h, double t) {
  return HermitianPropagator(h).at(t);
}

}  // namespace micromaser
