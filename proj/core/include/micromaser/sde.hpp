#pragma once

// Euler-Maruyama sampling of the (I, phi) Langevin equations equivalent to
// the Fokker-Planck description, as an independent check of the linearised
// Mandel parameter. Only classically sampleable (positive semidefinite)
// diffusion is accepted.

#include <cstdint>

#include "micromaser/fpe_engine.hpp"

namespace micromaser {

struct SdeOptions {
  int n_traj = 10000;
  double dt = 0.05;
  double t_end = 200.0;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Intensity grid on which drift and diffusion are tabulated.
  int table_points = 129;
  int quadrature_points = 64;
};

struct SdeResult {
  double xi_est = 0.0;
  double stderr_xi = 0.0;
  double mean_I = 0.0;
  double var_I = 0.0;
  double I_ss = 0.0;
  double phi_ss = 0.0;
  int n_traj = 0;
};

class IndefiniteDiffusion : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Samples trajectories started at the first stable steady state and returns
/// the Mandel estimate <eps^2>/<I> over the ensemble at t_end. Deterministic
/// for a given seed regardless of the thread count.
SdeResult sde_sample(const PumpState& pump, const CavityConfig& cavity,
                     const SdeOptions& options = {});

/// Same, for an explicit model and starting steady state.
SdeResult sde_sample(const FpeModel& model, const SteadyState& start,
                     const SdeOptions& options = {});

/// Per-trajectory random stream: SplitMix64 over (seed, index).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace micromaser
