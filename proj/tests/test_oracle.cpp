#include <cmath>

#include "doctest.h"
#include "micromaser/oracle.hpp"

using namespace micromaser;

namespace {

OracleConfig config(const PumpState& pump, double gT, double CT, int n_max) {
  OracleConfig c;
  c.pump = pump;
  c.gT = gT;
  c.CT = CT;
  c.n_max = n_max;
  return c;
}

CMatrix vacuum(int n_max) {
  CMatrix r = CMatrix::Zero(n_max + 1, n_max + 1);
  r(0, 0) = 1.0;
  return r;
}

// Dense reference: Tr_atoms[U (f (x) rho) U^dagger].
CMatrix dense_interaction(const OracleConfig& c, const CMatrix& rho) {
  const CMatrix u = herm_propagator(build_interaction(c), 1.0);
  const CMatrix joint = kron(build_density(c.pump), rho);
  const std::vector<int> dims{1 << c.n_atoms(), c.field_dim()};
  const std::vector<int> keep{1};
  return partial_trace(u * joint * u.adjoint(), dims, keep);
}

}  // namespace

TEST_CASE("config validation") {
  auto c = config(PumpState::product_upper(2), 1.0, 0.1, 3);
  CHECK_THROWS(c.validate());
  c.n_max = 10;
  c.conv_tol = 0.0;
  CHECK_THROWS(c.validate());
  c.conv_tol = 1e-9;
  c.pump = PumpState::product_upper(4);
  CHECK_THROWS(c.validate());
  c.pump = PumpState::product_upper(3);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("interaction generator") {
  const auto c = config(PumpState::product_upper(1), 0.7, 0.1, 4);
  const CMatrix h = build_interaction(c);
  CHECK(h.rows() == 10);
  CHECK(is_hermitian(h, 1e-12));

  // Single excitation: |upper, 0> and |lower, 1> split by +-g.
  const auto one = config(PumpState::product_upper(1), 0.7, 0.1, 4);
  CMatrix block(2, 2);
  const CMatrix full = build_interaction(one);
  const int up0 = 1 * 5 + 0;
  const int low1 = 0 * 5 + 1;
  block << full(up0, up0), full(up0, low1), full(low1, up0), full(low1, low1);
  const auto ev = hermitian_eigenvalues(block);
  CHECK(ev(0) == doctest::Approx(-0.7));
  CHECK(ev(1) == doctest::Approx(0.7));

  // Total excitation S11 + n is conserved.
  for (int n_atoms : {1, 2, 3}) {
    const auto cn = config(PumpState::product_upper(n_atoms), 0.9, 0.1, 6);
    const CMatrix hn = build_interaction(cn);
    const CMatrix a = annihilation(6);
    const CMatrix exc = kron(collective_operator(op::s11, n_atoms), CMatrix::Identity(7, 7)) +
                        kron(CMatrix::Identity(1 << n_atoms, 1 << n_atoms), a.adjoint() * a);
    CHECK((hn * exc - exc * hn).norm() < 1e-12);
  }
}

TEST_CASE("classical-field limit of the generator") {
  // With the field replaced by a large coherent amplitude the atom rotates
  // like the single-atom propagator.
  const auto c = config(PumpState::product_upper(1), 0.05, 0.0, 400);
  const CMatrix rho = coherent_state(400, std::polar(std::sqrt(100.0), 0.6));
  const CMatrix u = herm_propagator(build_interaction(c), 1.0);
  const CMatrix joint = kron(build_density(c.pump), rho);
  const std::vector<int> dims{2, 401};
  const std::vector<int> keep{0};
  const CMatrix atom = partial_trace(u * joint * u.adjoint(), dims, keep);
  const RabiField f{std::polar(10.0, 0.6), 0.05};
  const Complex expected = polarization(initial_moments(c.pump), f, 1.0);
  // <s01> = rho(1, 0).
  CHECK(std::abs(atom(1, 0) - expected) < 0.02);
}

TEST_CASE("banded map equals the dense computation") {
  const Complex a = std::polar(std::sqrt(0.4), 0.3);
  const Complex b = std::sqrt(0.6);
  for (const auto& pump : {PumpState::z_state(a, b, 0), PumpState::clone_mixture(0.7, 3),
                           PumpState::ghz(a, b, 2), PumpState::product_upper(1)}) {
    CAPTURE(to_string(pump.family));
    const auto c = config(pump, 0.8, 0.1, 12);
    const CMatrix rho = coherent_state(12, std::polar(1.5, -0.4));
    const CMatrix dense = dense_interaction(c, rho);
    const CMatrix banded = InjectionMap(c).interact(rho);
    CHECK((dense - banded).norm() < 1e-12);
  }
}

TEST_CASE("damping channel") {
  for (double CT : {0.0, 0.05, 0.7}) {
    const auto kraus = damping_kraus(20, CT);
    CMatrix sum = CMatrix::Zero(21, 21);
    for (const auto& k : kraus) sum += k.adjoint() * k;
    CHECK((sum - CMatrix::Identity(21, 21)).cwiseAbs().maxCoeff() < 1e-10);

    const CMatrix rho = coherent_state(20, Complex(1.2, 0.5));
    CMatrix via_kraus = CMatrix::Zero(21, 21);
    for (const auto& k : kraus) via_kraus += k * rho * k.adjoint();
    CHECK((apply_damping(rho, CT) - via_kraus).norm() < 1e-12);
  }
  // A coherent state stays coherent with amplitude scaled by exp(-CT/2).
  const CMatrix in = coherent_state(60, Complex(2.0, 1.0));
  const CMatrix out = apply_damping(in, 0.3);
  CHECK((out - coherent_state(60, Complex(2.0, 1.0) * std::exp(-0.15))).norm() < 1e-10);
}

TEST_CASE("free decay when g = 0") {
  const auto c = config(PumpState::product_upper(2), 0.0, 0.2, 40);
  const CMatrix rho = phase_averaged_coherent_state(40, 5.0);
  const auto before = field_statistics(rho);
  const auto after = field_statistics(injection_cycle(rho, c));
  CHECK(after.mean_n == doctest::Approx(before.mean_n * std::exp(-0.2)).epsilon(1e-10));
}

TEST_CASE("single emission from vacuum") {
  for (double g : {0.05, 0.3, 1.0}) {
    const auto c = config(PumpState::product_upper(1), g, 0.0, 6);
    const auto r = field_statistics(injection_cycle(vacuum(6), c));
    CHECK(r.photon_distribution[1] == doctest::Approx(std::sin(g) * std::sin(g)).epsilon(1e-12));
    CHECK(r.mean_n == doctest::Approx(std::sin(g) * std::sin(g)).epsilon(1e-12));
  }
  // Lower-level atoms cannot emit, so a balanced mixture gains only from its
  // upper half.
  const auto c = config(PumpState::clone_mixture(0.5, 1), 0.4, 0.0, 6);
  const auto r = field_statistics(injection_cycle(vacuum(6), c));
  CHECK(r.mean_n == doctest::Approx(0.5 * std::sin(0.4) * std::sin(0.4)).epsilon(1e-12));
}

TEST_CASE("trace, positivity and excitation bookkeeping per cycle") {
  const auto pump = PumpState::z_state(std::sqrt(0.3), std::sqrt(0.7), 1);
  const auto c = config(pump, 0.6, 0.0, 40);
  const InjectionMap map(c);
  CMatrix rho = coherent_state(40, Complex(2.0, 0.0));
  for (int i = 0; i < 5; ++i) {
    const double n_before = field_statistics(rho).mean_n;
    const CMatrix next = map(rho);
    CHECK(std::abs(next.trace().real() - 1.0) < 1e-10);
    CHECK(hermitian_eigenvalues(0.5 * (next + next.adjoint())).minCoeff() > -1e-8);
    // Photons gained equal the excitation the atoms gave up.
    const CMatrix u = herm_propagator(build_interaction(c), 1.0);
    const CMatrix joint = u * kron(build_density(pump), rho) * u.adjoint();
    const std::vector<int> dims{4, 41};
    const std::vector<int> keep{0};
    const CMatrix atoms = partial_trace(joint, dims, keep);
    const double s11_after = (atoms * collective_operator(op::s11, 2)).trace().real();
    const double s11_before = (build_density(pump) * collective_operator(op::s11, 2)).trace().real();
    CHECK(field_statistics(next).mean_n - n_before ==
          doctest::Approx(s11_before - s11_after).epsilon(1e-10));
    rho = next;
  }
}

TEST_CASE("steady state without gain is the vacuum") {
  auto c = config(PumpState::product_upper(2), 0.0, 0.3, 20);
  c.seed_intensity = 3.0;
  const OracleResult r = steady_state(c);
  CHECK(r.converged);
  CHECK(r.mean_n < 1e-8);
  CHECK(r.mandel == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("statistics helpers") {
  const auto r = field_statistics(phase_averaged_coherent_state(80, 7.0));
  CHECK(r.mean_n == doctest::Approx(7.0).epsilon(1e-10));
  CHECK(std::abs(r.mandel) < 1e-9);
  CMatrix fock = CMatrix::Zero(10, 10);
  fock(4, 4) = 1.0;
  CHECK(field_statistics(fock).mandel == doctest::Approx(-1.0));
}

TEST_CASE("steady state of the excited product state and truncation stability") {
  const auto pump = PumpState::product_upper(2);
  const auto cav = *operating_point_for_B(pump, 0.2, 1.6);
  auto c = config(pump, cav.gT, cav.CT, 60);
  const OracleResult r = steady_state(c);
  CHECK(r.converged);
  CHECK(r.truncation_weight < 1e-6);
  CHECK(r.mandel >= -1.0);
  CHECK(r.max_trace_error < 1e-10);
  CHECK(r.min_eigenvalue > -1e-8);
  c.n_max = 75;
  const OracleResult bigger = steady_state(c);
  CHECK(std::abs(bigger.mean_n - r.mean_n) < 0.005 * r.mean_n);
}
