#pragma once

// Fokker-Planck description of the cavity field in polar coordinates
// (I = |alpha|^2, phi = arg alpha): drift and diffusion coefficients by
// quadrature over one interaction window, the closed forms they reduce to
// for particular pumps, semiclassical steady states and the resulting
// intensity noise figures.
//
// Time is measured in units of the interaction window T, so the only
// parameters are the dimensionless products gT and CT.

#include <optional>
#include <string>
#include <vector>

#include "micromaser/atom_dynamics.hpp"
#include "micromaser/pump_states.hpp"

namespace micromaser {

struct CavityConfig {
  double gT = 1.0;
  double CT = 0.01;

  void validate() const;
  /// Cavity decay must be slow on the interaction time scale. Violations are
  /// reported, not rejected.
  bool weak_decay() const { return CT < 0.1; }
};

struct Drift {
  double A_I = 0.0;    // includes the cavity loss C * I
  double A_phi = 0.0;
  bool clamped = false;  // I was raised to kMinIntensity
};

struct DriftDiffusion {
  double A_I = 0.0;
  double A_phi = 0.0;
  double Q_II = 0.0;
  double Q_Iphi = 0.0;
  double Q_phiphi = 0.0;
  double I = 0.0;
  double phi = 0.0;
  bool clamped = false;
};

inline constexpr double kMinIntensity = 1e-12;

/// Quadrature evaluation of the coefficients for one pump and cavity. Holds
/// the pump moments so repeated evaluations skip the state algebra.
class FpeModel {
 public:
  FpeModel(const PumpState& pump, const CavityConfig& cavity,
           bool pair_correlations = true);
  FpeModel(const AtomicMoments& moments, const CavityConfig& cavity);

  Drift drift(double I, double phi, int n_points = kDefaultPanels) const;
  DriftDiffusion coefficients(double I, double phi, int n_points = kDefaultPanels) const;

  /// Q_II averaged over the field phase; used when nothing fixes the phase.
  double phase_averaged_q_ii(double I, int n_points = kDefaultPanels) const;

  const AtomicMoments& moments() const { return moments_; }
  const CavityConfig& cavity() const { return cavity_; }
  /// True when every initial covariance is invariant under a phase rotation.
  bool charge_neutral() const;

 private:
  AtomicMoments moments_;
  CavityConfig cavity_;
};

Drift drift(const PumpState& pump, const CavityConfig& cavity, double I, double phi);
DriftDiffusion diffusion_quadrature(const PumpState& pump, const CavityConfig& cavity,
                                    double I, double phi,
                                    int n_points = kDefaultPanels);

// ---------------------------------------------------------------------------
// Closed forms (T = 1).

/// Q_II for GHZ-class (N > 2) and clone-mixture pumps at B = gT sqrt(I).
double q_ii_closed_clone(double lambda1, int n_atoms, double B);
/// The pair-correlation contribution 2N(N-1) lambda1 (1 - lambda1) sin^4 B
/// contained in q_ii_closed_clone.
double q_ii_clone_correlation_term(double lambda1, int n_atoms, double B);

/// Z-state Q_II in closed form (b = 1 and b = 0 variants). These do
/// not agree with the quadrature; see DiscrepancyReport.
double q_ii_closed_z(Complex alpha, Complex beta, int b, double B);

/// Relaxation rate of intensity fluctuations for the clone family,
/// C (1 - B / tan B).
double gamma_clone(double CT, double B);
/// Relaxation rate for the Z state, derived from the semiclassical intensity
/// equation. Differs from the printed expression by 2 sqrt2 |alpha beta| in
/// place of sqrt2 |alpha beta| in the denominator.
double gamma_z(Complex alpha, Complex beta, int b, double CT, double B);
/// The printed Z-state relaxation expression, kept for the discrepancy report.
double gamma_z_printed(Complex alpha, Complex beta, int b, double CT, double B);

// ---------------------------------------------------------------------------
// Semiclassical steady states.

/// Gain per window at phase lock: N [w sin^2 B + 2 k sin B cos B] where w is
/// the single-atom inversion and k = |<s01(0)>|.
struct GainCurve {
  int n_atoms = 1;
  double inversion = 0.0;
  double coherence = 0.0;
  double locked_phase = 0.0;

  static GainCurve from(const AtomicMoments& m);
  double value(double B) const;
  double derivative(double B) const;
  /// Gamma / C at a steady state located at B.
  double relative_gamma(double B) const;
};

struct SteadyState {
  double I = 0.0;
  double B = 0.0;
  double phi = 0.0;
  double Gamma = 0.0;
  bool stable = false;
};

struct SteadyStateSearch {
  double B_min = 0.05;
  double B_max = 3.0 * 3.14159265358979323846;
  int grid_points = 2000;
};

/// Every root of C I = gain(gT sqrt(I)) in (B_min, B_max), ascending in B.
/// When there is no lasing root and the pump has no coherence, a single
/// I = 0 entry describes the empty cavity.
std::vector<SteadyState> steady_states(const PumpState& pump, const CavityConfig& cavity,
                                       const SteadyStateSearch& search = {});

std::vector<SteadyState> steady_state_clone(const PumpState& pump,
                                            const CavityConfig& cavity,
                                            const SteadyStateSearch& search = {});

/// First stable lasing root of a Z-state pump, if any.
std::optional<SteadyState> steady_state_z(const PumpState& pump, const CavityConfig& cavity,
                                          const SteadyStateSearch& search = {});

/// The steady state at a given B, stable or not, for cavity settings that
/// put one there (see operating_point_for_B).
SteadyState steady_state_at(const PumpState& pump, const CavityConfig& cavity, double B);

/// Cavity settings that put a steady state exactly at B for the given CT.
/// Returns nothing when the gain at B is not positive.
std::optional<CavityConfig> operating_point_for_B(const PumpState& pump, double CT,
                                                  double B);

// ---------------------------------------------------------------------------
// Noise.

enum class NoiseMethod { kQuadrature, kClosedForm };
std::string_view to_string(NoiseMethod m);

struct NoiseOptions {
  NoiseMethod method = NoiseMethod::kQuadrature;
  int n_points = kDefaultPanels;
  /// Pick the stable root closest to this B instead of the first one.
  std::optional<double> near_B;
  SteadyStateSearch search{};
};

struct NoiseReport {
  double I_ss = 0.0;
  double B = 0.0;
  double phi_ss = 0.0;
  double Gamma = 0.0;
  double xi = 0.0;
  double i2_zero = 0.0;
  double Q_II = 0.0;
  bool stable = false;
  bool sf_valid = false;     // xi << I and Q_II << Gamma I^2
  bool weak_decay = true;    // CT < 0.1
  std::string method;
};

class NoSteadyState : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Noise figures at the selected stable steady state. Throws NoSteadyState
/// when none exists.
NoiseReport noise_report(const PumpState& pump, const CavityConfig& cavity,
                         const NoiseOptions& options = {});

/// Noise figures at a given steady state.
NoiseReport noise_report_at(const PumpState& pump, const CavityConfig& cavity,
                            const SteadyState& state, const NoiseOptions& options = {});

/// Mandel parameter from diffusion and relaxation: Q_II / (I Gamma).
double mandel_from_diffusion(double q_ii, double I, double gamma);
/// Zero-frequency photocurrent noise 1 + 2 xi C / Gamma.
double photocurrent_noise(double xi, double CT, double gamma);
/// Clone-family form 1 + 2 xi / (1 - B / tan B).
double photocurrent_noise_clone(double xi, double B);

// ---------------------------------------------------------------------------
// Closed form vs quadrature bookkeeping.

struct Discrepancy {
  std::string quantity;
  std::string pump;
  double B = 0.0;
  double closed_form = 0.0;
  double quadrature = 0.0;
  double relative_error = 0.0;
};

struct DiscrepancyReport {
  double tolerance = 1e-6;
  std::vector<Discrepancy> entries;

  void check(std::string quantity, std::string pump, double B, double closed_form,
             double quadrature);
  bool clean() const { return entries.empty(); }
  std::string to_json() const;
};

/// Cross-checks the closed forms for `pump` at the steady state B against
/// quadrature and appends any mismatch.
void annotate_discrepancies(const PumpState& pump, const CavityConfig& cavity, double B,
                            double q_ii_quadrature, DiscrepancyReport& report);

}  // namespace micromaser
