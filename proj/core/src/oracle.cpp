#include "micromaser/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace micromaser {
namespace {

int excitations(int atoms) { return std::popcount(static_cast<unsigned>(atoms)); }

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// W[k][n] = sqrt(C(n,k) eta^(n-k) (1-eta)^k), the amplitude for losing k of
// n photons. Rows beyond the last k with a non-negligible entry are dropped.
std::vector<std::vector<double>> damping_amplitudes(int n_max, double CT) {
  const double log_eta = -CT;
  const double log_loss = CT > 0.0 ? std::log(-std::expm1(-CT)) : 0.0;
  std::vector<std::vector<double>> w;
  for (int k = 0; k <= n_max; ++k) {
    std::vector<double> row(n_max + 1, 0.0);
    double largest = 0.0;
    for (int n = k; n <= n_max; ++n) {
      if (CT == 0.0) {
        row[n] = k == 0 ? 1.0 : 0.0;
      } else {
        row[n] = std::exp(0.5 * (log_binomial(n, k) + (n - k) * log_eta + k * log_loss));
      }
      largest = std::max(largest, row[n]);
    }
    if (k > 0 && largest < 1e-17 && k > n_max * (1.0 - std::exp(-CT))) break;
    w.push_back(std::move(row));
  }
  return w;
}

CMatrix damp_with(const std::vector<std::vector<double>>& w, const CMatrix& rho) {
  const int dim = static_cast<int>(rho.rows());
  const int kmax = static_cast<int>(w.size());
  CMatrix out = CMatrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) {
    for (int m = 0; m < dim; ++m) {
      Complex acc{};
      for (int k = 0; k < kmax && m + k < dim && n + k < dim; ++k) {
        acc += w[k][m + k] * w[k][n + k] * rho(m + k, n + k);
      }
      out(m, n) = acc;
    }
  }
  return out;
}

}  // namespace

void OracleConfig::validate() const {
  if (n_max < 4) throw std::invalid_argument("oracle.n_max must be at least 4");
  if (!(conv_tol > 0.0)) throw std::invalid_argument("oracle.conv_tol must be positive");
  if (max_cycles < 1) throw std::invalid_argument("oracle.max_cycles must be positive");
  if (!(gT >= 0.0) || !(CT >= 0.0) || !std::isfinite(gT) || !std::isfinite(CT)) {
    throw std::invalid_argument("oracle: gT and CT must be finite and non-negative");
  }
  pump.validate();
  if (pump.n_atoms > 3) throw std::invalid_argument("oracle: at most 3 atoms per window");
  if (seed_intensity && !(*seed_intensity >= 0.0)) {
    throw std::invalid_argument("oracle: seed intensity must be non-negative");
  }
}

CMatrix annihilation(int n_max) {
  CMatrix a = CMatrix::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMatrix collective_operator(int p, int n_atoms) {
  const CMatrix id = CMatrix::Identity(2, 2);
  const CMatrix s = single_atom_operator(p);
  const int dim = 1 << n_atoms;
  CMatrix out = CMatrix::Zero(dim, dim);
  std::vector<CMatrix> chain(n_atoms, id);
  for (int j = 0; j < n_atoms; ++j) {
    chain[j] = s;
    out += kron_all(chain);
    chain[j] = id;
  }
  return out;
}

CMatrix build_interaction(const OracleConfig& c) {
  c.validate();
  const int d_atoms = 1 << c.n_atoms();
  if (d_atoms * c.field_dim() > kMaxDenseDimension) {
    throw DimensionError("oracle: dense interaction exceeds " +
                         std::to_string(kMaxDenseDimension) + " states");
  }
  const CMatrix a = annihilation(c.n_max);
  const CMatrix s01 = collective_operator(op::s01, c.n_atoms());
  const CMatrix s10 = collective_operator(op::s10, c.n_atoms());
  return kI * c.gT * (kron(s01, a.adjoint()) - kron(s10, a));
}

std::vector<CMatrix> damping_kraus(int n_max, double CT) {
  const auto w = damping_amplitudes(n_max, CT);
  std::vector<CMatrix> out;
  for (std::size_t k = 0; k < w.size(); ++k) {
    CMatrix m = CMatrix::Zero(n_max + 1, n_max + 1);
    for (int n = static_cast<int>(k); n <= n_max; ++n) m(n - k, n) = w[k][n];
    out.push_back(std::move(m));
  }
  return out;
}

CMatrix apply_damping(const CMatrix& rho, double CT) {
  return damp_with(damping_amplitudes(static_cast<int>(rho.rows()) - 1, CT), rho);
}

InjectionMap::InjectionMap(const OracleConfig& c)
    : dim_(c.field_dim()), half_width_(c.n_atoms()) {
  c.validate();
  damping_ = damping_amplitudes(c.n_max, c.CT);
  const int n_atoms = c.n_atoms();
  const int d_atoms = 1 << n_atoms;

  Eigen::SelfAdjointEigenSolver<CMatrix> pump_eig(build_density(c.pump));
  std::vector<std::pair<double, CVector>> pure;
  for (int k = 0; k < d_atoms; ++k) {
    const double w = pump_eig.eigenvalues()(k);
    if (w > 1e-14) pure.emplace_back(w, pump_eig.eigenvectors().col(k));
  }

  // kraus_[k * d_atoms + a_out]
  kraus_.assign(pure.size() * d_atoms,
                BandOperator{Eigen::MatrixXcd::Zero(dim_, 2 * n_atoms + 1)});

  // The interaction conserves atomic excitations plus photons, so U is
  // assembled one excitation sector at a time.
  for (int e = 0; e <= c.n_max + n_atoms; ++e) {
    std::vector<int> atoms;
    for (int a = 0; a < d_atoms; ++a) {
      const int n = e - excitations(a);
      if (n >= 0 && n <= c.n_max) atoms.push_back(a);
    }
    const int size = static_cast<int>(atoms.size());
    CMatrix h = CMatrix::Zero(size, size);
    for (int i = 0; i < size; ++i) {
      const int a = atoms[i];
      const int n = e - excitations(a);
      for (int j = 0; j < n_atoms; ++j) {
        const int bit = 1 << (n_atoms - 1 - j);
        if (!(a & bit) || n + 1 > c.n_max) continue;
        // S01 a^dagger: atom j drops to |0>, one photon is created.
        const int target = a ^ bit;
        const auto it = std::find(atoms.begin(), atoms.end(), target);
        const int r = static_cast<int>(it - atoms.begin());
        const Complex v = kI * c.gT * std::sqrt(n + 1.0);
        h(r, i) += v;
        h(i, r) += std::conj(v);
      }
    }
    const CMatrix u = herm_propagator(h, 1.0);
    for (int r = 0; r < size; ++r) {
      const int a_out = atoms[r];
      const int n_out = e - excitations(a_out);
      for (int i = 0; i < size; ++i) {
        const int a_in = atoms[i];
        const int d = excitations(a_out) - excitations(a_in);  // n_in - n_out
        for (std::size_t k = 0; k < pure.size(); ++k) {
          const Complex amp = pure[k].second(a_in);
          if (amp == 0.0) continue;
          kraus_[k * d_atoms + a_out].band(n_out, d + n_atoms) +=
              std::sqrt(pure[k].first) * amp * u(r, i);
        }
      }
    }
  }
}

CMatrix InjectionMap::interact(const CMatrix& rho) const {
  if (rho.rows() != dim_ || rho.cols() != dim_) {
    throw DimensionError("oracle: field state has the wrong dimension");
  }
  const int w = half_width_;
  CMatrix out = CMatrix::Zero(dim_, dim_);
  CMatrix left(dim_, dim_);
  for (const auto& k : kraus_) {
    if (k.band.isZero(0.0)) continue;
    for (int n = 0; n < dim_; ++n) {
      for (int m = 0; m < dim_; ++m) {
        Complex acc{};
        for (int d = std::max(-w, -m); d <= w && m + d < dim_; ++d) {
          acc += k.band(m, d + w) * rho(m + d, n);
        }
        left(m, n) = acc;
      }
    }
    for (int n = 0; n < dim_; ++n) {
      for (int d = std::max(-w, -n); d <= w && n + d < dim_; ++d) {
        const Complex c = std::conj(k.band(n, d + w));
        if (c == 0.0) continue;
        out.col(n) += c * left.col(n + d);
      }
    }
  }
  return out;
}

CMatrix InjectionMap::operator()(const CMatrix& rho) const {
  return damp_with(damping_, interact(rho));
}

CMatrix injection_cycle(const CMatrix& rho, const OracleConfig& c) {
  return InjectionMap(c)(rho);
}

OracleResult field_statistics(const CMatrix& rho) {
  OracleResult r;
  const int dim = static_cast<int>(rho.rows());
  r.photon_distribution.resize(dim);
  double m1 = 0.0;
  double m2 = 0.0;
  for (int n = 0; n < dim; ++n) {
    const double p = rho(n, n).real();
    r.photon_distribution[n] = p;
    m1 += n * p;
    m2 += static_cast<double>(n) * n * p;
  }
  r.mean_n = m1;
  r.mandel = m1 > 0.0 ? (m2 - m1 * m1) / m1 - 1.0 : 0.0;
  r.truncation_weight = std::max(rho(dim - 1, dim - 1).real(), 0.0);
  r.rho = rho;
  return r;
}

CMatrix coherent_state(int n_max, Complex amplitude) {
  CVector psi(n_max + 1);
  psi(0) = 1.0;
  for (int n = 1; n <= n_max; ++n) psi(n) = psi(n - 1) * amplitude / std::sqrt(double(n));
  psi /= psi.norm();
  return psi * psi.adjoint();
}

CMatrix phase_averaged_coherent_state(int n_max, double mean) {
  CMatrix rho = CMatrix::Zero(n_max + 1, n_max + 1);
  double total = 0.0;
  std::vector<double> p(n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    p[n] = mean > 0.0 ? std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0))
                      : (n == 0 ? 1.0 : 0.0);
    total += p[n];
  }
  for (int n = 0; n <= n_max; ++n) rho(n, n) = p[n] / total;
  return rho;
}

OracleResult steady_state(const OracleConfig& c) {
  c.validate();
  const InjectionMap cycle(c);

  double seed = 0.0;
  double seed_phase = 0.0;
  if (c.gT > 0.0 && c.CT > 0.0) {
    for (const auto& s : steady_states(c.pump, CavityConfig{c.gT, c.CT})) {
      if (s.stable && s.I > 0.0) {
        seed = s.I;
        seed_phase = s.phi;
        break;
      }
    }
  }
  if (c.seed_intensity) seed = *c.seed_intensity;
  seed = std::min(seed, 0.5 * c.n_max);
  CMatrix rho = c.pump.phase_insensitive()
                    ? phase_averaged_coherent_state(c.n_max, seed)
                    : coherent_state(c.n_max, std::polar(std::sqrt(seed), seed_phase));

  double max_trace_error = 0.0;
  double distance = 0.0;
  bool converged = false;
  int cycles = 0;
  while (cycles < c.max_cycles) {
    CMatrix next = cycle(rho);
    ++cycles;
    const double trace = next.trace().real();
    max_trace_error = std::max(max_trace_error, std::abs(trace - 1.0));
    next /= trace;
    // Entrywise l1 bounds the trace norm; fall back to the exact distance
    // only near the threshold.
    distance = 0.5 * (next - rho).cwiseAbs().sum();
    if (distance < 10.0 * c.conv_tol) distance = trace_distance(next, rho);
    rho = std::move(next);
    if (distance < c.conv_tol) {
      converged = true;
      break;
    }
  }

  OracleResult r = field_statistics(rho);
  r.cycles = cycles;
  r.converged = converged;
  r.last_distance = distance;
  r.max_trace_error = max_trace_error;
  r.min_eigenvalue = hermitian_eigenvalues(0.5 * (rho + rho.adjoint())).minCoeff();
  r.seed_mean = seed;
  return r;
}

}  // namespace micromaser
