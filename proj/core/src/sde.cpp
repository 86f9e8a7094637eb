#include "micromaser/sde.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

namespace micromaser {
namespace {

// Coefficients on a uniform intensity grid at the steady-state phase.
struct CoefficientTable {
  double I_lo = 0.0;
  double step = 0.0;
  std::vector<DriftDiffusion> nodes;

  DriftDiffusion at(double I) const {
    const double x = (I - I_lo) / step;
    const auto last = static_cast<double>(nodes.size() - 1);
    if (x <= 0.0 || x >= last) {
      // Outside the grid: diffusion frozen at the edge, drift extrapolated.
      const std::size_t e = x <= 0.0 ? 0 : nodes.size() - 1;
      const std::size_t n = x <= 0.0 ? 1 : nodes.size() - 2;
      DriftDiffusion d = nodes[e];
      const double slope = (nodes[e].A_I - nodes[n].A_I) / (nodes[e].I - nodes[n].I);
      d.A_I += slope * (I - nodes[e].I);
      return d;
    }
    const auto k = static_cast<std::size_t>(x);
    const double w = x - static_cast<double>(k);
    const DriftDiffusion& a = nodes[k];
    const DriftDiffusion& b = nodes[k + 1];
    DriftDiffusion d;
    d.A_I = (1 - w) * a.A_I + w * b.A_I;
    d.A_phi = (1 - w) * a.A_phi + w * b.A_phi;
    d.Q_II = (1 - w) * a.Q_II + w * b.Q_II;
    d.Q_Iphi = (1 - w) * a.Q_Iphi + w * b.Q_Iphi;
    d.Q_phiphi = (1 - w) * a.Q_phiphi + w * b.Q_phiphi;
    return d;
  }
};

void require_sampleable(const DriftDiffusion& q) {
  const double scale = std::max({std::abs(q.Q_II), std::abs(q.Q_phiphi), 1e-300});
  const double det = q.Q_II * q.Q_phiphi - q.Q_Iphi * q.Q_Iphi;
  if (q.Q_II < 0.0 || q.Q_phiphi < 0.0 || det < -1e-12 * scale * scale) {
    throw IndefiniteDiffusion(
        "diffusion matrix is not positive semidefinite at the steady state "
        "(sub-Poissonian regime); use the quantum oracle instead");
  }
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SdeResult sde_sample(const FpeModel& model, const SteadyState& start,
                     const SdeOptions& options) {
  if (options.n_traj < 2 || !(options.dt > 0.0) || !(options.t_end > 0.0)) {
    throw std::invalid_argument("sde: need n_traj >= 2 and positive dt, t_end");
  }
  if (!start.stable || !(start.I > 0.0)) {
    throw NoSteadyState("sde: starting point is not a stable lasing state");
  }
  const DriftDiffusion at_ss = model.coefficients(start.I, start.phi, options.quadrature_points);
  require_sampleable(at_ss);

  // Stationary spread of the linearised intensity equation with increment
  // covariance 2 Q dt is sqrt(Q_II / Gamma).
  const double sigma = std::sqrt(std::max(at_ss.Q_II, 0.0) / start.Gamma);
  const double half_width = std::max(10.0 * sigma, 1e-3 * start.I);
  CoefficientTable table;
  table.I_lo = std::max(start.I - half_width, 0.5 * start.I);
  const double I_hi = start.I + half_width;
  const int n_nodes = std::max(options.table_points, 3);
  table.step = (I_hi - table.I_lo) / (n_nodes - 1);
  table.nodes.reserve(n_nodes);
  for (int k = 0; k < n_nodes; ++k) {
    table.nodes.push_back(model.coefficients(table.I_lo + k * table.step, start.phi,
                                             options.quadrature_points));
  }

  const int n_steps = static_cast<int>(std::ceil(options.t_end / options.dt));
  const double dt = options.t_end / n_steps;
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> finals(options.n_traj);

  auto run_block = [&](int begin, int end) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int traj = begin; traj < end; ++traj) {
      std::mt19937_64 rng(substream_seed(options.seed, static_cast<std::uint64_t>(traj)));
      double I = start.I;
      double phi = start.phi;
      for (int step = 0; step < n_steps; ++step) {
        const DriftDiffusion c = table.at(I);
        const double q11 = std::max(2.0 * c.Q_II, 0.0);
        const double l11 = std::sqrt(q11);
        const double l21 = l11 > 0.0 ? 2.0 * c.Q_Iphi / l11 : 0.0;
        const double l22 = std::sqrt(std::max(2.0 * c.Q_phiphi - l21 * l21, 0.0));
        const double z1 = normal(rng);
        const double z2 = normal(rng);
        I += -c.A_I * dt + l11 * sqrt_dt * z1;
        phi += -c.A_phi * dt + (l21 * z1 + l22 * z2) * sqrt_dt;
        if (I < 0.0) I = -I;
      }
      finals[traj] = I;
      normal.reset();
    }
  };

  const int threads = std::clamp(options.threads, 1, options.n_traj);
  if (threads == 1) {
    run_block(0, options.n_traj);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (options.n_traj + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int b = t * chunk;
      const int e = std::min(options.n_traj, b + chunk);
      if (b < e) pool.emplace_back(run_block, b, e);
    }
  }

  SdeResult r;
  r.n_traj = options.n_traj;
  r.I_ss = start.I;
  r.phi_ss = start.phi;
  double sum = 0.0;
  for (double x : finals) sum += x;
  r.mean_I = sum / options.n_traj;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : finals) {
    const double e2 = (x - r.mean_I) * (x - r.mean_I);
    m2 += e2;
    m4 += e2 * e2;
  }
  const double n = options.n_traj;
  r.var_I = m2 / (n - 1.0);
  m4 /= n;
  const double var_of_var = std::max(m4 - (m2 / n) * (m2 / n), 0.0) / n;
  r.xi_est = r.var_I / r.mean_I;
  r.stderr_xi = std::sqrt(var_of_var) / r.mean_I;
  return r;
}

SdeResult sde_sample(const PumpState& pump, const CavityConfig& cavity,
                     const SdeOptions& options) {
  const FpeModel model(pump, cavity);
  for (const auto& s : steady_states(pump, cavity)) {
    if (s.stable && s.I > 0.0) return sde_sample(model, s, options);
  }
  throw NoSteadyState("sde: no stable lasing steady state");
}

}  // namespace micromaser
