#pragma once

// Exact reference model: N atoms coupled to one cavity mode on a truncated
// Fock space, injected once per window and followed by amplitude damping,
// iterated to a stationary field state.

#include <optional>
#include <vector>

#include "micromaser/fpe_engine.hpp"

namespace micromaser {

struct OracleConfig {
  int n_max = 64;
  double gT = 1.0;
  double CT = 0.01;
  PumpState pump{};
  int max_cycles = 20000;
  double conv_tol = 1e-9;
  /// Mean photon number of the starting state. Defaults to the first stable
  /// semiclassical root, or vacuum when there is none.
  std::optional<double> seed_intensity;

  void validate() const;
  int n_atoms() const { return pump.n_atoms; }
  int field_dim() const { return n_max + 1; }
};

/// Largest joint dimension 2^N (n_max + 1) accepted for dense operators.
inline constexpr int kMaxDenseDimension = 4096;

struct OracleResult {
  double mean_n = 0.0;
  double mandel = 0.0;  // (<n^2> - <n>^2) / <n> - 1
  int cycles = 0;
  double truncation_weight = 0.0;  // population of |n_max>
  bool converged = false;
  double last_distance = 0.0;      // trace distance of the final step
  double max_trace_error = 0.0;
  double min_eigenvalue = 0.0;
  double seed_mean = 0.0;
  std::vector<double> photon_distribution;
  CMatrix rho;
};

class TruncationLeak : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Number operator and ladder operators on the truncated space.
CMatrix annihilation(int n_max);

/// Collective S_xy on N atoms: sum over atoms of the single-atom operator.
CMatrix collective_operator(int p, int n_atoms);

/// Hermitian generator on atoms (x) field whose propagator reduces to the
/// single-atom rotation in a classical field:
/// H = i g (S01 a^dagger - S10 a), g = gT.
CMatrix build_interaction(const OracleConfig& c);

/// Kraus operators of the zero-temperature damping channel with survival
/// amplitude exp(-CT / 2) per photon. Operators whose entries are all below
/// 1e-17 are omitted.
std::vector<CMatrix> damping_kraus(int n_max, double CT);

/// Applies the damping channel without building the Kraus matrices.
CMatrix apply_damping(const CMatrix& rho, double CT);

/// One injection window followed by damping. The propagator is set up once at
/// construction.
class InjectionMap {
 public:
  explicit InjectionMap(const OracleConfig& c);

  /// Field state after the interaction, atoms traced out.
  CMatrix interact(const CMatrix& rho) const;
  CMatrix operator()(const CMatrix& rho) const;

 private:
  // Each field Kraus operator has at most 2N + 1 nonzero diagonals.
  struct BandOperator {
    Eigen::MatrixXcd band;  // band(m, d + N) = K(m, m + d)
  };

  int dim_ = 0;
  int half_width_ = 0;
  std::vector<std::vector<double>> damping_;
  std::vector<BandOperator> kraus_;
};

CMatrix injection_cycle(const CMatrix& rho, const OracleConfig& c);

/// Photon statistics of a field density matrix.
OracleResult field_statistics(const CMatrix& rho);

CMatrix coherent_state(int n_max, Complex amplitude);
/// Poisson mixture of number states: a coherent state with random phase.
CMatrix phase_averaged_coherent_state(int n_max, double mean);

OracleResult steady_state(const OracleConfig& c);

}  // namespace micromaser
