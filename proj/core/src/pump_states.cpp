#include "micromaser/pump_states.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

namespace micromaser {
namespace {

constexpr double kNormTol = 1e-12;

double binary_entropy_bits(double p) {
  double h = 0.0;
  for (double x : {p, 1.0 - p}) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

// Weight r of (|0><0|)^{(x)k} in the classical-mixture form of the reduced
// matrix; only meaningful for families whose k < N marginals are diagonal.
double lower_weight(const PumpState& p) {
  switch (p.family) {
    case PumpFamily::kGhzClass: return std::norm(p.alpha);
    case PumpFamily::kCloneMixture: return p.lambda0;
    case PumpFamily::kProductUpper: return 0.0;
    case PumpFamily::kZState: break;
  }
  throw InvalidPumpState("Z state marginals are not a classical mixture");
}

CMatrix classical_mixture(double r, int k) {
  const Eigen::Index dim = Eigen::Index{1} << k;
  CMatrix out = CMatrix::Zero(dim, dim);
  out(0, 0) = r;
  out(dim - 1, dim - 1) += 1.0 - r;
  return out;
}

}  // namespace

std::string_view to_string(PumpFamily family) {
  switch (family) {
    case PumpFamily::kGhzClass: return "ghz";
    case PumpFamily::kCloneMixture: return "clone";
    case PumpFamily::kZState: return "zstate";
    case PumpFamily::kProductUpper: return "product_upper";
  }
  return "unknown";
}

PumpFamily parse_pump_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "ghz" || s == "ghz_class") return PumpFamily::kGhzClass;
  if (s == "clone" || s == "clone_mixture" || s == "mixture") return PumpFamily::kCloneMixture;
  if (s == "zstate" || s == "z_state" || s == "z") return PumpFamily::kZState;
  if (s == "product_upper" || s == "upper") return PumpFamily::kProductUpper;
  throw InvalidPumpState("unknown pump family '" + std::string(name) + "'");
}

PumpState PumpState::ghz(Complex alpha, Complex beta, int n_atoms) {
  PumpState p;
  p.family = PumpFamily::kGhzClass;
  p.alpha = alpha;
  p.beta = beta;
  p.n_atoms = n_atoms;
  p.validate();
  return p;
}

PumpState PumpState::clone_mixture(double lambda1, int n_atoms) {
  PumpState p;
  p.family = PumpFamily::kCloneMixture;
  p.lambda1 = lambda1;
  p.lambda0 = 1.0 - lambda1;
  p.n_atoms = n_atoms;
  p.validate();
  return p;
}

PumpState PumpState::z_state(Complex alpha, Complex beta, int b) {
  PumpState p;
  p.family = PumpFamily::kZState;
  p.alpha = alpha;
  p.beta = beta;
  p.b = b;
  p.n_atoms = 2;
  p.validate();
  return p;
}

PumpState PumpState::product_upper(int n_atoms) {
  PumpState p;
  p.family = PumpFamily::kProductUpper;
  p.n_atoms = n_atoms;
  p.validate();
  return p;
}

void PumpState::validate() const {
  if (n_atoms < 1) throw InvalidPumpState("n_atoms must be positive");
  switch (family) {
    case PumpFamily::kGhzClass:
    case PumpFamily::kZState:
      if (std::abs(std::norm(alpha) + std::norm(beta) - 1.0) > kNormTol) {
        throw InvalidPumpState("|alpha|^2 + |beta|^2 must equal 1");
      }
      if (family == PumpFamily::kZState) {
        if (n_atoms != 2) throw InvalidPumpState("Z state is a two-atom state");
        if (b != 0 && b != 1) throw InvalidPumpState("Z state bit b must be 0 or 1");
      }
      break;
    case PumpFamily::kCloneMixture:
      if (lambda0 < 0.0 || lambda1 < 0.0 || std::abs(lambda0 + lambda1 - 1.0) > kNormTol) {
        throw InvalidPumpState("mixture weights must be non-negative and sum to 1");
      }
      break;
    case PumpFamily::kProductUpper:
      break;
  }
}

double PumpState::inversion() const {
  switch (family) {
    case PumpFamily::kGhzClass: return std::norm(beta) - std::norm(alpha);
    case PumpFamily::kCloneMixture: return lambda1 - lambda0;
    case PumpFamily::kProductUpper: return 1.0;
    case PumpFamily::kZState: return (b == 1 ? 1.0 : -1.0) * std::norm(alpha);
  }
  return 0.0;
}

bool PumpState::phase_insensitive() const {
  if (family == PumpFamily::kZState) {
    return std::abs(alpha * beta) == 0.0;
  }
  if (family == PumpFamily::kGhzClass && n_atoms == 1) {
    return std::abs(alpha * beta) == 0.0;
  }
  return true;
}

CMatrix single_atom_operator(int p) {
  if (p < 0 || p > 3) throw DimensionError("operator index must be in 0..3");
  CMatrix s = CMatrix::Zero(2, 2);
  s(op::row(p), op::col(p)) = 1.0;
  return s;
}

CMatrix build_density(const PumpState& p) {
  p.validate();
  if (p.n_atoms > kMaxDenseAtoms) {
    throw InvalidPumpState("dense pump matrices are limited to " +
                           std::to_string(kMaxDenseAtoms) + " atoms");
  }
  const Eigen::Index dim = Eigen::Index{1} << p.n_atoms;
  switch (p.family) {
    case PumpFamily::kGhzClass: {
      CVector psi = CVector::Zero(dim);
      psi(0) = p.alpha;
      psi(dim - 1) += p.beta;
      return psi * psi.adjoint();
    }
    case PumpFamily::kCloneMixture:
      return classical_mixture(p.lambda0, p.n_atoms);
    case PumpFamily::kProductUpper:
      return classical_mixture(0.0, p.n_atoms);
    case PumpFamily::kZState: {
      const double r2 = std::sqrt(0.5);
      CVector psi = CVector::Zero(4);
      psi(p.b == 1 ? 3 : 0) = p.alpha;
      psi(1) = p.beta * r2;
      psi(2) = p.beta * r2;
      return psi * psi.adjoint();
    }
  }
  throw InvalidPumpState("unknown pump family");
}

CMatrix reduce(const PumpState& p, int k) {
  p.validate();
  if (k < 1 || k > p.n_atoms) throw InvalidPumpState("reduction size out of range");
  if (p.n_atoms > kMaxDenseAtoms) {
    if (k == p.n_atoms) {
      throw InvalidPumpState("full density matrix exceeds the dense atom limit");
    }
    return classical_mixture(lower_weight(p), k);
  }
  const CMatrix rho = build_density(p);
  if (k == p.n_atoms) return rho;
  std::vector<int> dims(p.n_atoms, 2);
  std::vector<int> keep(k);
  for (int i = 0; i < k; ++i) keep[i] = i;
  return partial_trace(rho, dims, keep);
}

double von_neumann_entropy_bits(const CMatrix& rho) {
  double s = 0.0;
  for (double w : hermitian_eigenvalues(rho)) {
    if (w > 1e-14) s -= w * std::log2(w);
  }
  return s;
}

double entropy(const PumpState& p) {
  p.validate();
  if (p.n_atoms > kMaxDenseAtoms) {
    return p.family == PumpFamily::kCloneMixture ? binary_entropy_bits(p.lambda0) : 0.0;
  }
  return von_neumann_entropy_bits(build_density(p));
}

AtomicMoments initial_moments(const PumpState& p, bool include_pair_correlations) {
  AtomicMoments m;
  m.n_atoms = p.n_atoms;
  const CMatrix f1 = reduce(p, 1);
  // Tr(s_xy f) = f(y, x)
  for (int q = 0; q < 4; ++q) m.single[q] = f1(op::col(q), op::row(q));

  const bool pairs = include_pair_correlations && p.n_atoms >= 2;
  CMatrix f12;
  if (pairs) f12 = reduce(p, 2);

  const double n = p.n_atoms;
  for (int a = 0; a < 4; ++a) {
    for (int c = 0; c < 4; ++c) {
      const Complex mean_product = m.single[a] * m.single[c];
      // s_xy s_uv = delta_yu s_xv on a single atom.
      Complex same_atom{};
      if (op::col(a) == op::row(c)) same_atom = m.single[2 * op::row(a) + op::col(c)];
      Complex cov = n * (same_atom - mean_product);
      if (pairs) {
        const Complex pair =
            f12(2 * op::col(a) + op::col(c), 2 * op::row(a) + op::row(c));
        cov += n * (n - 1.0) * (pair - mean_product);
      }
      m.cov[a][c] = cov;
    }
  }
  return m;
}

}  // namespace micromaser
