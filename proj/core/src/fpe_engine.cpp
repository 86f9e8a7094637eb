#include "micromaser/fpe_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace micromaser {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

// Accumulator for the two covariance integrals that feed every Q entry.
struct PairIntegral {
  Complex d21{};  // D_{10,01}(t, t')
  Complex d11{};  // D_{01,01}(t, t')

  PairIntegral& operator+=(const PairIntegral& o) {
    d21 += o.d21;
    d11 += o.d11;
    return *this;
  }
  friend PairIntegral operator*(double w, PairIntegral p) {
    p.d21 *= w;
    p.d11 *= w;
    return p;
  }
  friend PairIntegral operator*(PairIntegral p, double w) { return w * p; }
};

// Phase charge of s_p under alpha -> alpha e^{i theta}: s01 carries +1.
constexpr int charge(int p) { return p == op::s01 ? 1 : (p == op::s10 ? -1 : 0); }

double clamp_intensity(double I, bool& clamped) {
  if (!std::isfinite(I) || I < 0.0) {
    throw std::invalid_argument("field intensity must be a non-negative finite number");
  }
  clamped = I < kMinIntensity;
  return std::max(I, kMinIntensity);
}

bool is_clone_like(const PumpState& p) {
  return p.family == PumpFamily::kCloneMixture || p.family == PumpFamily::kProductUpper ||
         (p.family == PumpFamily::kGhzClass && p.n_atoms > 2);
}

double clone_lambda1(const PumpState& p) {
  switch (p.family) {
    case PumpFamily::kCloneMixture: return p.lambda1;
    case PumpFamily::kProductUpper: return 1.0;
    case PumpFamily::kGhzClass: return std::norm(p.beta);
    case PumpFamily::kZState: break;
  }
  throw std::invalid_argument("pump has no clone-family closed form");
}

double bisect(auto&& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void CavityConfig::validate() const {
  if (!(gT > 0.0) || !std::isfinite(gT)) throw std::invalid_argument("gT must be positive");
  if (!(CT > 0.0) || !std::isfinite(CT)) throw std::invalid_argument("CT must be positive");
}

// ---------------------------------------------------------------------------

FpeModel::FpeModel(const PumpState& pump, const CavityConfig& cavity, bool pair_correlations)
    : FpeModel(initial_moments(pump, pair_correlations), cavity) {}

FpeModel::FpeModel(const AtomicMoments& moments, const CavityConfig& cavity)
    : moments_(moments), cavity_(cavity) {
  cavity_.validate();
}

bool FpeModel::charge_neutral() const {
  for (int a = 0; a < 4; ++a) {
    for (int c = 0; c < 4; ++c) {
      if (charge(a) + charge(c) != 0 && std::abs(moments_.cov[a][c]) > 1e-14) return false;
    }
  }
  return true;
}

Drift FpeModel::drift(double I, double phi, int n_points) const {
  Drift out;
  I = clamp_intensity(I, out.clamped);
  const double g = cavity_.gT;
  const double amp = std::sqrt(I);
  const RabiField field{std::polar(amp, phi), g};
  const Complex rot = std::polar(1.0, -phi);
  const Complex pol_integral = quad_1d(
      [&](double t) { return rot * polarization(moments_, field, t); }, 0.0, 1.0, n_points);
  const double n = moments_.n_atoms;
  out.A_I = cavity_.CT * I - n * g * amp * 2.0 * pol_integral.real();
  out.A_phi = -n * g / amp * pol_integral.imag();
  return out;
}

DriftDiffusion FpeModel::coefficients(double I, double phi, int n_points) const {
  DriftDiffusion out;
  const Drift d = drift(I, phi, n_points);
  out.A_I = d.A_I;
  out.A_phi = d.A_phi;
  out.clamped = d.clamped;
  bool unused = false;
  I = clamp_intensity(I, unused);
  out.I = I;
  out.phi = phi;

  const double g = cavity_.gT;
  const RabiField field{std::polar(std::sqrt(I), phi), g};
  // Only the s01 and s10 rows of R enter; the later time's row is folded
  // into the covariance once per node.
  using Row = Eigen::RowVector4cd;
  auto row01 = [&](double t) -> Row { return r_matrix(field, t).row(op::s01); };
  Eigen::Matrix4cd cov;
  for (int a = 0; a < 4; ++a)
    for (int c = 0; c < 4; ++c) cov(a, c) = moments_.cov[a][c];
  const PairIntegral integral = quad_triangle(
      [&, cached_t = -1.0, r01 = Row(), r10 = Row()](double t, double tp) mutable {
        if (t != cached_t) {
          const RMatrix rt = r_matrix(field, t);
          r01 = rt.row(op::s01);
          r10 = rt.row(op::s10);
          cached_t = t;
        }
        const Eigen::Vector4cd w = cov * row01(tp).transpose();
        return PairIntegral{(r10 * w)(0), (r01 * w)(0)};
      },
      1.0, n_points);

  const Complex rot2 = std::polar(1.0, -2.0 * phi);
  const Complex x = integral.d21;
  const Complex y = rot2 * integral.d11;
  const double g2 = g * g;
  out.Q_II = I * g2 * 2.0 * (x + y).real();
  out.Q_phiphi = g2 / (4.0 * I) * 2.0 * (x - y).real();
  out.Q_Iphi = g2 * 2.0 * y.imag();
  return out;
}

double FpeModel::phase_averaged_q_ii(double I, int n_points) const {
  if (charge_neutral()) return coefficients(I, 0.0, n_points).Q_II;
  // Phase dependence carries charges |k| <= 2, so three equally spaced
  // phases average it out exactly.
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    sum += coefficients(I, 2.0 * std::numbers::pi * k / 3.0, n_points).Q_II;
  }
  return sum / 3.0;
}

Drift drift(const PumpState& pump, const CavityConfig& cavity, double I, double phi) {
  return FpeModel(pump, cavity).drift(I, phi);
}

DriftDiffusion diffusion_quadrature(const PumpState& pump, const CavityConfig& cavity,
                                    double I, double phi, int n_points) {
  return FpeModel(pump, cavity).coefficients(I, phi, n_points);
}

// ---------------------------------------------------------------------------

double q_ii_closed_clone(double lambda1, int n_atoms, double B) {
  const double s = std::sin(B);
  const double c = std::cos(B);
  const double s2 = s * s;
  const double s4 = s2 * s2;
  const double l = lambda1;
  const double n = n_atoms;
  return n * (-0.5 * s4 + (2.0 * l - 1.0) * B * s * c + (1.0 - l) * s2 +
              2.0 * l * (1.0 - l) * s4 + 2.0 * (n - 1.0) * l * (1.0 - l) * s4);
}

double q_ii_clone_correlation_term(double lambda1, int n_atoms, double B) {
  const double s2 = std::sin(B) * std::sin(B);
  const double n = n_atoms;
  return n * 2.0 * (n - 1.0) * lambda1 * (1.0 - lambda1) * s2 * s2;
}

double q_ii_closed_z(Complex alpha, Complex beta, int b, double B) {
  const double s = std::sin(B);
  const double c = std::cos(B);
  const double a2 = std::norm(alpha);
  const double b2 = std::norm(beta);
  const double ab = std::abs(alpha * beta);
  const double A = (b == 1 ? 2.0 : -2.0) * a2;
  const double Q = 2.0 * (1.0 + 2.0 * a2) * b2 * s * s * c * c +
                   kSqrt2 * ab * A * s * c * (1.0 - std::cos(2.0 * B)) -
                   0.5 * A * A * s * s * s * s;
  if (b == 1) {
    return 0.5 * A * (s * s * s * s + 2.0 * B * s * c) +
           kSqrt2 * ab * std::cos(2.0 * B) * (B - s * c) - Q;
  }
  return 0.5 * A * s * s * (s * s + 2.0) - 2.0 * B * c +
         kSqrt2 * ab * std::cos(2.0 * B) * (B + s * c) - 2.0 * s * c - Q;
}

double gamma_clone(double CT, double B) { return CT * (1.0 - B / std::tan(B)); }

namespace {
double gamma_z_impl(Complex alpha, Complex beta, int b, double CT, double B,
                    double denominator_factor) {
  const double A = (b == 1 ? 2.0 : -2.0) * std::norm(alpha);
  const double ab = std::abs(alpha * beta);
  const double ctg = 1.0 / std::tan(B);
  const double num = A * ctg + kSqrt2 * ab * (ctg * ctg - 1.0);
  const double den = A + denominator_factor * kSqrt2 * ab * ctg;
  return CT * (1.0 - B * num / den);
}
}  // namespace

double gamma_z(Complex alpha, Complex beta, int b, double CT, double B) {
  return gamma_z_impl(alpha, beta, b, CT, B, 2.0);
}

double gamma_z_printed(Complex alpha, Complex beta, int b, double CT, double B) {
  return gamma_z_impl(alpha, beta, b, CT, B, 1.0);
}

// ---------------------------------------------------------------------------

GainCurve GainCurve::from(const AtomicMoments& m) {
  GainCurve g;
  g.n_atoms = m.n_atoms;
  g.inversion = (m.single[op::s11] - m.single[op::s00]).real();
  g.coherence = std::abs(m.single[op::s01]);
  g.locked_phase = g.coherence > 0.0 ? std::arg(m.single[op::s01]) : 0.0;
  return g;
}

double GainCurve::value(double B) const {
  const double s = std::sin(B);
  return n_atoms * (inversion * s * s + 2.0 * coherence * s * std::cos(B));
}

double GainCurve::derivative(double B) const {
  return n_atoms * (inversion * std::sin(2.0 * B) + 2.0 * coherence * std::cos(2.0 * B));
}

double GainCurve::relative_gamma(double B) const {
  return 1.0 - B * derivative(B) / (2.0 * value(B));
}

std::vector<SteadyState> steady_states(const PumpState& pump, const CavityConfig& cavity,
                                       const SteadyStateSearch& search) {
  cavity.validate();
  if (search.grid_points < 2 || !(search.B_max > search.B_min) || search.B_min <= 0.0) {
    throw std::invalid_argument("invalid steady-state search range");
  }
  const GainCurve gain = GainCurve::from(initial_moments(pump));
  const double slope = cavity.CT / (cavity.gT * cavity.gT);
  auto residual = [&](double B) { return slope * B * B - gain.value(B); };

  std::vector<SteadyState> roots;
  const double step = (search.B_max - search.B_min) / (search.grid_points - 1);
  double prev_B = search.B_min;
  double prev_r = residual(prev_B);
  for (int i = 1; i < search.grid_points; ++i) {
    const double B = search.B_min + i * step;
    const double r = residual(B);
    if (prev_r == 0.0 || (prev_r < 0.0) != (r < 0.0)) {
      const double root = prev_r == 0.0 ? prev_B : bisect(residual, prev_B, B);
      SteadyState s;
      s.B = root;
      s.I = (root / cavity.gT) * (root / cavity.gT);
      s.phi = gain.locked_phase;
      s.Gamma = cavity.CT * gain.relative_gamma(root);
      s.stable = s.Gamma > 0.0;
      roots.push_back(s);
    }
    prev_B = B;
    prev_r = r;
  }
  if (roots.empty() && gain.coherence == 0.0) {
    SteadyState empty;
    // Small-signal gain N w (gT)^2 against the loss CT.
    const double small_signal = gain.n_atoms * gain.inversion * cavity.gT * cavity.gT;
    empty.Gamma = cavity.CT - small_signal;
    empty.stable = empty.Gamma > 0.0;
    roots.push_back(empty);
  }
  return roots;
}

std::vector<SteadyState> steady_state_clone(const PumpState& pump,
                                            const CavityConfig& cavity,
                                            const SteadyStateSearch& search) {
  if (pump.family == PumpFamily::kZState) {
    throw std::invalid_argument("steady_state_clone needs a pump without atomic coherence");
  }
  return steady_states(pump, cavity, search);
}

std::optional<SteadyState> steady_state_z(const PumpState& pump, const CavityConfig& cavity,
                                          const SteadyStateSearch& search) {
  if (pump.family != PumpFamily::kZState) {
    throw std::invalid_argument("steady_state_z needs a Z-state pump");
  }
  for (const auto& s : steady_states(pump, cavity, search)) {
    if (s.stable && s.I > 0.0) return s;
  }
  return std::nullopt;
}

SteadyState steady_state_at(const PumpState& pump, const CavityConfig& cavity, double B) {
  const GainCurve gain = GainCurve::from(initial_moments(pump));
  SteadyState s;
  s.B = B;
  s.I = (B / cavity.gT) * (B / cavity.gT);
  s.phi = gain.locked_phase;
  s.Gamma = cavity.CT * gain.relative_gamma(B);
  s.stable = s.Gamma > 0.0;
  return s;
}

std::optional<CavityConfig> operating_point_for_B(const PumpState& pump, double CT,
                                                  double B) {
  const GainCurve gain = GainCurve::from(initial_moments(pump));
  const double f = gain.value(B);
  if (!(f > 0.0) || !(CT > 0.0) || !(B > 0.0)) return std::nullopt;
  const double I = f / CT;
  return CavityConfig{B / std::sqrt(I), CT};
}

// ---------------------------------------------------------------------------

std::string_view to_string(NoiseMethod m) {
  return m == NoiseMethod::kClosedForm ? "closed-form" : "quadrature";
}

double mandel_from_diffusion(double q_ii, double I, double gamma) { return q_ii / (I * gamma); }

double photocurrent_noise(double xi, double CT, double gamma) {
  return 1.0 + 2.0 * xi * CT / gamma;
}

double photocurrent_noise_clone(double xi, double B) {
  return 1.0 + 2.0 * xi / (1.0 - B / std::tan(B));
}

NoiseReport noise_report_at(const PumpState& pump, const CavityConfig& cavity,
                            const SteadyState& state, const NoiseOptions& options) {
  if (!(state.I > 0.0)) throw NoSteadyState("noise figures need a lasing steady state");
  NoiseReport r;
  r.I_ss = state.I;
  r.B = state.B;
  r.phi_ss = state.phi;
  r.method = std::string(to_string(options.method));
  r.weak_decay = cavity.weak_decay();

  const FpeModel model(pump, cavity);
  const GainCurve gain = GainCurve::from(model.moments());
  r.Gamma = cavity.CT * gain.relative_gamma(state.B);
  r.stable = r.Gamma > 0.0;

  if (options.method == NoiseMethod::kClosedForm) {
    if (is_clone_like(pump)) {
      r.Q_II = q_ii_closed_clone(clone_lambda1(pump), pump.n_atoms, state.B);
    } else if (pump.family == PumpFamily::kZState) {
      r.Q_II = q_ii_closed_z(pump.alpha, pump.beta, pump.b, state.B);
    } else {
      throw std::invalid_argument("no closed form for this pump; use quadrature");
    }
  } else if (gain.coherence > 0.0) {
    r.Q_II = model.coefficients(state.I, state.phi, options.n_points).Q_II;
  } else {
    r.Q_II = model.phase_averaged_q_ii(state.I, options.n_points);
  }

  r.xi = mandel_from_diffusion(r.Q_II, r.I_ss, r.Gamma);
  r.i2_zero = photocurrent_noise(r.xi, cavity.CT, r.Gamma);
  r.sf_valid = r.stable && !(r.xi >= r.I_ss) && !(r.Q_II >= r.Gamma * r.I_ss * r.I_ss) &&
               std::isfinite(r.xi);
  return r;
}

NoiseReport noise_report(const PumpState& pump, const CavityConfig& cavity,
                         const NoiseOptions& options) {
  const auto roots = steady_states(pump, cavity, options.search);
  const SteadyState* chosen = nullptr;
  for (const auto& s : roots) {
    if (!s.stable || !(s.I > 0.0)) continue;
    if (!options.near_B) {
      chosen = &s;
      break;
    }
    if (!chosen || std::abs(s.B - *options.near_B) < std::abs(chosen->B - *options.near_B)) {
      chosen = &s;
    }
  }
  if (!chosen) throw NoSteadyState("no stable lasing steady state in the search range");
  return noise_report_at(pump, cavity, *chosen, options);
}

// ---------------------------------------------------------------------------

void DiscrepancyReport::check(std::string quantity, std::string pump, double B,
                              double closed_form, double quadrature) {
  const double scale = std::max(std::abs(quadrature), 1e-12);
  const double rel = std::abs(closed_form - quadrature) / scale;
  if (rel > tolerance || !std::isfinite(rel)) {
    entries.push_back({std::move(quantity), std::move(pump), B, closed_form, quadrature, rel});
  }
}

std::string DiscrepancyReport::to_json() const {
  nlohmann::json j;
  j["tolerance"] = tolerance;
  j["authoritative"] = "quadrature";
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["entries"].push_back({{"quantity", e.quantity},
                            {"pump", e.pump},
                            {"B", e.B},
                            {"closed_form", e.closed_form},
                            {"quadrature", e.quadrature},
                            {"relative_error", e.relative_error}});
  }
  return j.dump(2);
}

void annotate_discrepancies(const PumpState& pump, const CavityConfig& cavity, double B,
                            double q_ii_quadrature, DiscrepancyReport& report) {
  const std::string name(to_string(pump.family));
  if (is_clone_like(pump)) {
    report.check("Q_II", name, B, q_ii_closed_clone(clone_lambda1(pump), pump.n_atoms, B),
                 q_ii_quadrature);
  } else if (pump.family == PumpFamily::kZState) {
    report.check("Q_II", name, B, q_ii_closed_z(pump.alpha, pump.beta, pump.b, B),
                 q_ii_quadrature);
    // Without coherence there is no gain and no relaxation rate to compare.
    if (std::abs(pump.alpha * pump.beta) > 0.0) {
      report.check("Gamma", name, B,
                   gamma_z_printed(pump.alpha, pump.beta, pump.b, cavity.CT, B),
                   gamma_z(pump.alpha, pump.beta, pump.b, cavity.CT, B));
    }
  }
}

}  // namespace micromaser
