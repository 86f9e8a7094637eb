#pragma once

// Pump states: the N-atom initial states injected into the cavity, their
// reduced density matrices and the initial one- and two-operator moments
// consumed by the atom dynamics.
//
// Basis convention used across the library: |0> is the lower level, |1> the
// upper level. Single-atom operators s_xy = |x><y| are indexed by the binary
// number xy, i.e. s00 -> 0, s01 -> 1, s10 -> 2, s11 -> 3.

#include <array>
#include <string>
#include <string_view>

#include "micromaser/numerics.hpp"

namespace micromaser {

enum class PumpFamily { kGhzClass, kCloneMixture, kZState, kProductUpper };

std::string_view to_string(PumpFamily family);
/// Accepts "ghz", "clone", "zstate", "product_upper" (and a few aliases).
PumpFamily parse_pump_family(std::string_view name);

namespace op {
inline constexpr int s00 = 0;
inline constexpr int s01 = 1;
inline constexpr int s10 = 2;
inline constexpr int s11 = 3;

/// Index of the adjoint operator: s01 <-> s10.
constexpr int adjoint(int p) { return p == s01 ? s10 : (p == s10 ? s01 : p); }
constexpr int row(int p) { return p >> 1; }
constexpr int col(int p) { return p & 1; }
}  // namespace op

/// Dense matrices are built only up to this many atoms.
inline constexpr int kMaxDenseAtoms = 12;

class InvalidPumpState : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PumpState {
  PumpFamily family = PumpFamily::kProductUpper;
  Complex alpha{0.0, 0.0};
  Complex beta{1.0, 0.0};
  double lambda0 = 0.0;
  double lambda1 = 1.0;
  int b = 1;
  int n_atoms = 1;

  static PumpState ghz(Complex alpha, Complex beta, int n_atoms);
  static PumpState clone_mixture(double lambda1, int n_atoms);
  static PumpState z_state(Complex alpha, Complex beta, int b);
  static PumpState product_upper(int n_atoms);

  /// Throws InvalidPumpState when an invariant of the family is violated.
  void validate() const;

  /// <s11> - <s00> of a single atom.
  double inversion() const;
  /// True when no atom carries coherence on the working transition, so the
  /// field dynamics do not single out a phase.
  bool phase_insensitive() const;
};

/// Initial moments of the pump. `cov[P][Q]` is D_PQ(0,0), the covariance of
/// the collective operators S_P, S_Q split into the one-particle part
/// (proportional to N) and the pair part (proportional to N(N-1)).
struct AtomicMoments {
  std::array<Complex, 4> single{};
  std::array<std::array<Complex, 4>, 4> cov{};
  int n_atoms = 1;
};

/// The 2^N x 2^N density matrix of the pump. N <= kMaxDenseAtoms.
CMatrix build_density(const PumpState& p);

/// k-particle reduced density matrix, k in [1, n_atoms]. For GHZ-class and
/// clone mixtures with k < N the classical-mixture form is used directly, so
/// this also works beyond kMaxDenseAtoms.
CMatrix reduce(const PumpState& p, int k);

/// Von Neumann entropy in bits.
double entropy(const PumpState& p);
double von_neumann_entropy_bits(const CMatrix& rho);

/// Single-atom operator s_p as a 2x2 matrix.
CMatrix single_atom_operator(int p);

/// When `include_pair_correlations` is false the N(N-1) part is dropped,
/// which describes the same one-atom state with independent atoms.
AtomicMoments initial_moments(const PumpState& p, bool include_pair_correlations = true);

}  // namespace micromaser
