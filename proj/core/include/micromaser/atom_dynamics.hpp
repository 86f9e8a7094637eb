#pragma once

// Single-atom Heisenberg evolution in a classical field of fixed complex
// amplitude, and the two-time atomic covariances built from it.

#include <utility>

#include <Eigen/Dense>

#include "micromaser/numerics.hpp"
#include "micromaser/pump_states.hpp"

namespace micromaser {

struct RabiField {
  Complex amplitude{0.0, 0.0};  // alpha, with I = |alpha|^2
  double coupling = 1.0;        // g, in units of 1/T
};

/// s_p(t) = sum_q R(p, q) s_q, rows and columns ordered (00, 01, 10, 11).
using RMatrix = Eigen::Matrix4cd;

/// Parameters of the single-atom propagator U = mu + nu s10 - conj(nu) s01:
/// mu = cos(g|alpha|t), nu = -(alpha/|alpha|) sin(g|alpha|t).
std::pair<Complex, Complex> mu_nu(const RabiField& field, double t);

/// The 2x2 propagator U(t) acting on (|0>, |1>).
CMatrix single_atom_propagator(const RabiField& field, double t);

RMatrix r_matrix(const RabiField& field, double t);

/// <s01(t)> of one atom.
Complex polarization(const AtomicMoments& m, const RabiField& field, double t);

/// D_pq(t, t') = sum_PQ R_pP(t) R_qQ(t') D_PQ.
Complex variance(const AtomicMoments& m, const RabiField& field, double t,
                 double t_prime, int p, int q);

/// Same contraction with both R matrices supplied by the caller; used on
/// quadrature grids where R is tabulated once per node.
Complex variance(const AtomicMoments& m, const RMatrix& r_t, const RMatrix& r_tp,
                 int p, int q);

}  // namespace micromaser
