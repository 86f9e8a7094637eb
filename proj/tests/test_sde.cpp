#include <cmath>
#include <set>

#include "doctest.h"
#include "micromaser/sde.hpp"

using namespace micromaser;

namespace {

SdeOptions quick(int n_traj = 400) {
  SdeOptions o;
  o.n_traj = n_traj;
  o.dt = 0.2;
  o.t_end = 100.0;
  o.table_points = 33;
  o.quadrature_points = 32;
  return o;
}

}  // namespace

TEST_CASE("substreams are distinct and reproducible") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(substream_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(substream_seed(42, 7) == substream_seed(42, 7));
  CHECK(substream_seed(42, 7) != substream_seed(43, 7));
}

TEST_CASE("results do not depend on the thread count") {
  const auto pump = PumpState::clone_mixture(0.7, 2);
  const auto cav = *operating_point_for_B(pump, 0.05, 1.5);
  SdeOptions one = quick();
  SdeOptions many = quick();
  many.threads = 3;
  const SdeResult a = sde_sample(pump, cav, one);
  const SdeResult b = sde_sample(pump, cav, many);
  CHECK(a.xi_est == b.xi_est);
  CHECK(a.mean_I == b.mean_I);
  SdeOptions other = quick();
  other.seed = 99;
  CHECK(sde_sample(pump, cav, other).xi_est != a.xi_est);
}

TEST_CASE("sub-Poissonian diffusion is refused") {
  const auto pump = PumpState::product_upper(2);
  const auto cav = *operating_point_for_B(pump, 0.05, 2.0);
  CHECK_THROWS_AS(sde_sample(pump, cav, quick()), IndefiniteDiffusion);
}

TEST_CASE("zero diffusion leaves the ensemble at the steady state") {
  const auto pump = PumpState::product_upper(2);
  AtomicMoments m = initial_moments(pump);
  for (auto& row : m.cov) row.fill(0.0);
  const auto cav = *operating_point_for_B(pump, 0.05, 1.2);
  const FpeModel model(m, cav);
  const SteadyState s = steady_state_at(pump, cav, 1.2);
  const SdeResult r = sde_sample(model, s, quick(50));
  CHECK(r.xi_est < 1e-12);
  CHECK(r.mean_I == doctest::Approx(s.I).epsilon(1e-6));
}

TEST_CASE("no steady state") {
  CHECK_THROWS_AS(sde_sample(PumpState::clone_mixture(0.2, 2), CavityConfig{1.0, 0.05}, quick()),
                  NoSteadyState);
  SdeOptions bad = quick();
  bad.n_traj = 1;
  CHECK_THROWS_AS(sde_sample(PumpState::clone_mixture(0.7, 2), CavityConfig{1.0, 0.05}, bad),
                  std::invalid_argument);
}

TEST_CASE("ensemble variance tracks the linearised Mandel parameter") {
  // Loose check on a small ensemble; the acceptance suite runs the full one.
  const auto pump = PumpState::clone_mixture(0.7, 2);
  const auto cav = *operating_point_for_B(pump, 0.005, 2.0);
  const SteadyState s = steady_state_at(pump, cav, 2.0);
  const double xi = noise_report_at(pump, cav, s).xi;
  SdeOptions o = quick(1000);
  o.t_end = 1200.0;
  o.dt = 0.25;
  const SdeResult r = sde_sample(FpeModel(pump, cav), s, o);
  CHECK(std::abs(r.xi_est - xi) < 4.0 * r.stderr_xi);
  CHECK(r.stderr_xi > 0.0);
}
