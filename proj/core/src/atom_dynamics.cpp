#include "micromaser/atom_dynamics.hpp"

#include <cmath>

namespace micromaser {

std::pair<Complex, Complex> mu_nu(const RabiField& field, double t) {
  const double amp = std::abs(field.amplitude);
  if (amp == 0.0) return {1.0, 0.0};
  const double angle = field.coupling * amp * t;
  const Complex phase = field.amplitude / amp;
  return {std::cos(angle), -phase * std::sin(angle)};
}

CMatrix single_atom_propagator(const RabiField& field, double t) {
  const auto [mu, nu] = mu_nu(field, t);
  CMatrix u = mu * CMatrix::Identity(2, 2);
  u(1, 0) += nu;             // nu s10
  u(0, 1) -= std::conj(nu);  // -nu* s01
  return u;
}

// Rows of U^dagger s_p U expanded over s_q. The s01/s10 rows coincide with
// the commonly printed table; the s00/s11 rows carry nu* on s01 and nu on
// s10, which is what conjugation by U gives.
RMatrix r_matrix(const RabiField& field, double t) {
  const auto [mu, nu] = mu_nu(field, t);
  const Complex nuc = std::conj(nu);
  const Complex mu2 = mu * mu;
  const Complex nn = std::norm(nu);
  RMatrix r;
  r << mu2, -mu * nuc, -mu * nu, nn,
       mu * nu, mu2, -nu * nu, -mu * nu,
       mu * nuc, -nuc * nuc, mu2, -mu * nuc,
       nn, mu * nuc, mu * nu, mu2;
  return r;
}

Complex polarization(const AtomicMoments& m, const RabiField& field, double t) {
  const RMatrix r = r_matrix(field, t);
  Complex out{};
  for (int q = 0; q < 4; ++q) out += r(op::s01, q) * m.single[q];
  return out;
}

Complex variance(const AtomicMoments& m, const RMatrix& r_t, const RMatrix& r_tp,
                 int p, int q) {
  if (p < 0 || p > 3 || q < 0 || q > 3) throw DimensionError("variance index out of range");
  Complex out{};
  for (int a = 0; a < 4; ++a) {
    if (r_t(p, a) == 0.0) continue;
    Complex row{};
    for (int c = 0; c < 4; ++c) row += r_tp(q, c) * m.cov[a][c];
    out += r_t(p, a) * row;
  }
  return out;
}

Complex variance(const AtomicMoments& m, const RabiField& field, double t,
                 double t_prime, int p, int q) {
  return variance(m, r_matrix(field, t), r_matrix(field, t_prime), p, q);
}

}  // namespace micromaser
