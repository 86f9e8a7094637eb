#include <cmath>
#include <random>

#include "doctest.h"
#include "micromaser/fpe_engine.hpp"

using namespace micromaser;

namespace {

// Cavity with gT = 1 so that B = sqrt(I).
DriftDiffusion at_B(const PumpState& p, double B, int n = 512) {
  return diffusion_quadrature(p, CavityConfig{1.0, 0.01}, B * B, 0.0, n);
}

}  // namespace

TEST_CASE("cavity validation") {
  CHECK_THROWS(CavityConfig{0.0, 0.1}.validate());
  CHECK_THROWS(CavityConfig{1.0, -0.1}.validate());
  CHECK(CavityConfig{1.0, 0.05}.weak_decay());
  CHECK_FALSE(CavityConfig{1.0, 0.2}.weak_decay());
}

TEST_CASE("drift of the excited product state") {
  const auto pump = PumpState::product_upper(2);
  const CavityConfig cav{0.3, 0.02};
  for (double I : {1.0, 10.0, 50.0}) {
    const double B = 0.3 * std::sqrt(I);
    const Drift d = drift(pump, cav, I, 0.4);
    CHECK(d.A_I == doctest::Approx(0.02 * I - 2.0 * std::sin(B) * std::sin(B)).epsilon(1e-8));
    CHECK(std::abs(d.A_phi) < 1e-12);
    CHECK_FALSE(d.clamped);
  }
}

TEST_CASE("intensity domain") {
  const FpeModel model(PumpState::product_upper(1), CavityConfig{1.0, 0.1});
  CHECK_THROWS_AS(model.drift(-1.0, 0.0), std::invalid_argument);
  CHECK(model.drift(0.0, 0.0).clamped);
  CHECK(model.coefficients(1e-14, 0.0).clamped);
  CHECK(std::isfinite(model.coefficients(0.0, 0.0).Q_phiphi));
}

TEST_CASE("closed-form Q_II of the clone family matches quadrature") {
  for (int n : {1, 2, 3, 5}) {
    for (double l : {0.5, 0.7, 0.9, 1.0}) {
      for (double B = 0.25; B < 3.1; B += 0.25) {
        CAPTURE(n);
        CAPTURE(l);
        CAPTURE(B);
        const double quad = at_B(PumpState::clone_mixture(l, n), B).Q_II;
        const double closed = q_ii_closed_clone(l, n, B);
        CHECK(std::abs(closed - quad) <= 1e-6 * std::max(std::abs(quad), 1e-3));
      }
    }
  }
}

TEST_CASE("GHZ with N > 2 follows the clone closed form") {
  const auto ghz = PumpState::ghz(std::sqrt(0.25), std::sqrt(0.75), 3);
  for (double B : {0.7, 1.9}) {
    CHECK(at_B(ghz, B).Q_II == doctest::Approx(q_ii_closed_clone(0.75, 3, B)).epsilon(1e-6));
  }
}

TEST_CASE("pair-correlation term") {
  const double l = 0.7;
  const double B = 1.3;
  const double with = at_B(PumpState::clone_mixture(l, 3), B).Q_II;
  const double indep = FpeModel(PumpState::clone_mixture(l, 3), CavityConfig{1.0, 0.01}, false)
                           .coefficients(B * B, 0.0, 512)
                           .Q_II;
  CHECK(with - indep == doctest::Approx(q_ii_clone_correlation_term(l, 3, B)).epsilon(1e-6));
  CHECK(q_ii_clone_correlation_term(l, 3, B) ==
        doctest::Approx(2.0 * 3 * 2 * l * (1 - l) * std::pow(std::sin(B), 4)));
}

TEST_CASE("clone steady state, lambda1 = 1, N = 2, gT = 1, CT = 0.1") {
  const auto roots = steady_state_clone(PumpState::clone_mixture(1.0, 2), CavityConfig{1.0, 0.1});
  REQUIRE(roots.size() == 1);
  CHECK(roots[0].B == doctest::Approx(2.5380858845159637).epsilon(1e-12));
  CHECK(roots[0].I == doctest::Approx(6.441879957179182).epsilon(1e-12));
  CHECK(roots[0].stable);
  CHECK(roots[0].Gamma / 0.1 ==
        doctest::Approx(1.0 - roots[0].B / std::tan(roots[0].B)).epsilon(1e-12));
  CHECK(roots[0].Gamma / 0.1 == doctest::Approx(4.68).epsilon(1e-3));
}

TEST_CASE("steady states solve C I = gain") {
  const auto pump = PumpState::clone_mixture(0.8, 3);
  const CavityConfig cav{0.4, 0.01};
  const GainCurve gain = GainCurve::from(initial_moments(pump));
  const auto roots = steady_states(pump, cav);
  REQUIRE(roots.size() > 2);
  for (const auto& r : roots) {
    CHECK(0.01 * r.I == doctest::Approx(gain.value(r.B)).epsilon(1e-9));
    CHECK(std::abs(drift(pump, cav, r.I, 0.0).A_I) < 1e-7);
  }
  for (std::size_t i = 1; i < roots.size(); ++i) CHECK(roots[i].B > roots[i - 1].B);
}

TEST_CASE("no lasing below inversion") {
  const auto roots = steady_states(PumpState::clone_mixture(0.3, 2), CavityConfig{1.0, 0.05});
  REQUIRE(roots.size() == 1);
  CHECK(roots[0].I == 0.0);
  CHECK(roots[0].stable);
  CHECK(roots[0].Gamma == doctest::Approx(0.05 + 2 * 0.4));
  CHECK_THROWS_AS(noise_report(PumpState::clone_mixture(0.3, 2), CavityConfig{1.0, 0.05}),
                  NoSteadyState);
}

TEST_CASE("relaxation rate is the slope of the drift") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pump = PumpState::clone_mixture(0.55 + 0.45 * u(rng), 2 + trial % 2);
    const CavityConfig cav{0.2 + u(rng), 0.005 + 0.05 * u(rng)};
    for (const auto& s : steady_states(pump, cav)) {
      if (!(s.I > 0.0)) continue;
      const double h = 1e-5 * s.I;
      const FpeModel m(pump, cav);
      const double slope = (m.drift(s.I + h, 0.0).A_I - m.drift(s.I - h, 0.0).A_I) / (2 * h);
      CHECK(slope == doctest::Approx(gamma_clone(cav.CT, s.B)).epsilon(1e-6));
    }
  }
}

TEST_CASE("excited product state at B = 2") {
  const auto pump = PumpState::product_upper(2);
  const auto cav = operating_point_for_B(pump, 0.05, 2.0);
  REQUIRE(cav);
  const NoiseReport r = noise_report(pump, *cav, NoiseOptions{.near_B = 2.0});
  CHECK(r.B == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.Q_II == doctest::Approx(-1.0987 * 2).epsilon(1e-4));
  CHECK(r.xi == doctest::Approx(-0.6937).epsilon(1e-4));
  CHECK(r.i2_zero == doctest::Approx(0.2756).epsilon(1e-3));
  CHECK(r.i2_zero == doctest::Approx(photocurrent_noise_clone(r.xi, r.B)).epsilon(1e-12));
  CHECK(r.stable);
  CHECK(r.sf_valid);
  CHECK(r.method == "quadrature");

  const NoiseReport closed =
      noise_report(pump, *cav, NoiseOptions{.method = NoiseMethod::kClosedForm, .near_B = 2.0});
  CHECK(closed.xi == doctest::Approx(r.xi).epsilon(1e-6));
  CHECK(closed.method == "closed-form");
}

TEST_CASE("product state at B = pi/2 is noiseless at zero frequency") {
  const auto pump = PumpState::product_upper(1);
  const SteadyState s = steady_state_at(pump, *operating_point_for_B(pump, 0.01, M_PI / 2), M_PI / 2);
  const NoiseReport r = noise_report_at(pump, *operating_point_for_B(pump, 0.01, M_PI / 2), s);
  CHECK(r.xi == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(std::abs(r.i2_zero) < 1e-6);
}

TEST_CASE("correlated clone pumps are noisier than independent atoms") {
  for (int n : {2, 3}) {
    for (double l : {0.6, 0.75, 0.9}) {
      const auto pump = PumpState::clone_mixture(l, n);
      const CavityConfig cav{0.5, 0.02};
      for (const auto& s : steady_states(pump, cav)) {
        if (!s.stable || !(s.I > 0.0)) continue;
        const double full = noise_report_at(pump, cav, s).xi;
        const double q_indep = q_ii_closed_clone(l, n, s.B) - q_ii_clone_correlation_term(l, n, s.B);
        CHECK(full > mandel_from_diffusion(q_indep, s.I, s.Gamma));
      }
    }
  }
}

TEST_CASE("Z state locks the phase and relaxes at gamma_z") {
  const Complex a = std::polar(std::sqrt(0.6), 0.3);
  const Complex b = std::polar(std::sqrt(0.4), -0.5);
  for (int bit : {0, 1}) {
    const auto pump = PumpState::z_state(a, b, bit);
    const auto m = initial_moments(pump);
    const GainCurve gain = GainCurve::from(m);
    CHECK(gain.coherence == doctest::Approx(std::abs(a * b) / std::sqrt(2.0)));
    CHECK(gain.locked_phase == doctest::Approx(std::arg(m.single[op::s01])));

    const CavityConfig cav{0.3, 0.01};
    const FpeModel model(pump, cav);
    for (const auto& s : steady_states(pump, cav)) {
      if (!(s.I > 0.0)) continue;
      CHECK(std::abs(model.drift(s.I, s.phi).A_phi) < 1e-10);
      CHECK(std::abs(model.drift(s.I, s.phi).A_I) < 1e-9);
      const double h = 1e-5 * s.I;
      const double slope =
          (model.drift(s.I + h, s.phi).A_I - model.drift(s.I - h, s.phi).A_I) / (2 * h);
      CHECK(slope == doctest::Approx(gamma_z(a, b, bit, cav.CT, s.B)).epsilon(1e-6));
      CHECK(s.Gamma == doctest::Approx(gamma_z(a, b, bit, cav.CT, s.B)).epsilon(1e-9));
    }
  }
}

TEST_CASE("printed Z-state expressions are reported as discrepancies") {
  const auto pump = PumpState::z_state(std::sqrt(0.9), std::sqrt(0.1), 1);
  const CavityConfig cav{1.0, 0.05};
  DiscrepancyReport report;
  const double quad = at_B(pump, 1.5).Q_II;
  annotate_discrepancies(pump, cav, 1.5, quad, report);
  CHECK_FALSE(report.clean());
  bool has_gamma = false;
  for (const auto& e : report.entries) has_gamma |= e.quantity == "Gamma";
  CHECK(has_gamma);
  CHECK(report.to_json().find("\"authoritative\": \"quadrature\"") != std::string::npos);

  DiscrepancyReport clone_report;
  const auto clone = PumpState::clone_mixture(0.8, 2);
  annotate_discrepancies(clone, cav, 1.5, at_B(clone, 1.5).Q_II, clone_report);
  CHECK(clone_report.clean());
}

TEST_CASE("phase averaging for GHZ N = 2") {
  const auto pump = PumpState::ghz(std::sqrt(0.3), std::sqrt(0.7), 2);
  const FpeModel model(pump, CavityConfig{0.5, 0.02});
  CHECK_FALSE(model.charge_neutral());
  double sum = 0.0;
  const int n = 16;
  for (int k = 0; k < n; ++k) sum += model.coefficients(9.0, 2 * M_PI * k / n, 64).Q_II;
  CHECK(model.phase_averaged_q_ii(9.0, 64) == doctest::Approx(sum / n).epsilon(1e-10));
  CHECK(FpeModel(PumpState::clone_mixture(0.7, 2), CavityConfig{}).charge_neutral());
}

TEST_CASE("diffusion matrix symmetry in phase") {
  // For a phase-insensitive pump nothing depends on the field phase.
  const FpeModel model(PumpState::clone_mixture(0.7, 3), CavityConfig{0.4, 0.02});
  const auto a = model.coefficients(20.0, 0.0, 64);
  const auto b = model.coefficients(20.0, 1.3, 64);
  CHECK(a.Q_II == doctest::Approx(b.Q_II).epsilon(1e-12));
  CHECK(a.Q_phiphi == doctest::Approx(b.Q_phiphi).epsilon(1e-12));
  CHECK(std::abs(a.Q_Iphi) < 1e-12);
}

TEST_CASE("operating point") {
  const auto pump = PumpState::product_upper(2);
  const auto cav = operating_point_for_B(pump, 0.04, 1.2);
  REQUIRE(cav);
  const auto roots = steady_states(pump, *cav);
  bool found = false;
  for (const auto& r : roots) found |= std::abs(r.B - 1.2) < 1e-9;
  CHECK(found);
  CHECK_FALSE(operating_point_for_B(PumpState::clone_mixture(0.3, 2), 0.04, 1.2));
}
