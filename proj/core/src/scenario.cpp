#include "micromaser/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#ifndef MICROMASER_VERSION
#define MICROMASER_VERSION "unknown"
#endif

namespace micromaser {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& text, int line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + text + "'", line);
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& text, int line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'", line);
  }
  return v;
}

int parse_int(const std::string& key, const std::string& text, int line) {
  const long long v = parse_integer(key, text, line);
  if (v < -1'000'000'000LL || v > 1'000'000'000LL) {
    throw ConfigError(key, "integer out of range", line);
  }
  return static_cast<int>(v);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (!std::isfinite(*v)) return fmt12(*v);
  return *v;
}

json pump_json(const PumpState& p) {
  return {{"family", std::string(to_string(p.family))},
          {"alpha", {p.alpha.real(), p.alpha.imag()}},
          {"beta", {p.beta.real(), p.beta.imag()}},
          {"lambda1", p.lambda1},
          {"b", p.b},
          {"n_atoms", p.n_atoms},
          {"inversion", p.inversion()}};
}

json coefficients_json(const DriftDiffusion& d) {
  return {{"I", d.I},       {"phi", d.phi},       {"A_I", d.A_I},
          {"A_phi", d.A_phi}, {"Q_II", d.Q_II},   {"Q_Iphi", d.Q_Iphi},
          {"Q_phiphi", d.Q_phiphi}, {"clamped", d.clamped}};
}

ResultRow noise_row(const NoiseReport& r, int id, std::optional<double> swept) {
  ResultRow row;
  row.point_id = id;
  row.swept_value = swept;
  row.I_ss = r.I_ss;
  row.B = r.B;
  row.phi_ss = r.phi_ss;
  row.Gamma = r.Gamma;
  row.xi = r.xi;
  row.i2_zero = r.i2_zero;
  row.Q_II = r.Q_II;
  row.stable = r.stable;
  row.sf_valid = r.sf_valid;
  row.method = r.method;
  return row;
}

ResultRow flagged_row(int id, std::optional<double> swept, std::string method,
                      std::string why) {
  ResultRow row;
  row.point_id = id;
  row.swept_value = swept;
  row.method = std::move(method);
  row.failure = std::move(why);
  return row;
}

NoiseOptions noise_options(const Scenario& s) {
  NoiseOptions o;
  o.method = s.noise_method;
  o.n_points = s.quadrature_points;
  o.near_B = s.operating_B;
  return o;
}

struct NoiseEval {
  std::optional<NoiseReport> report;
  json details;
};

NoiseEval evaluate_noise(const Scenario& s, const PumpState& pump, const CavityConfig& cavity) {
  NoiseEval out;
  out.details["mode"] = "noise";
  try {
    // A requested operating point is evaluated there even when unstable.
    auto report = [&](const NoiseOptions& o) {
      return s.operating_B
                 ? noise_report_at(pump, cavity, steady_state_at(pump, cavity, *s.operating_B), o)
                 : noise_report(pump, cavity, o);
    };
    NoiseReport r = report(noise_options(s));
    DiscrepancyReport disc;
    double q_quad = r.Q_II;
    if (s.noise_method != NoiseMethod::kQuadrature) {
      NoiseOptions q = noise_options(s);
      q.method = NoiseMethod::kQuadrature;
      q_quad = report(q).Q_II;
    }
    annotate_discrepancies(pump, cavity, r.B, q_quad, disc);
    out.details["weak_decay"] = r.weak_decay;
    out.details["discrepancies"] = json::parse(disc.to_json());
    out.report = r;
  } catch (const NoSteadyState& e) {
    out.details["no_steady_state"] = e.what();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kCoefficients: return "coefficients";
    case Mode::kSteadyState: return "steady-state";
    case Mode::kNoise: return "noise";
    case Mode::kOracle: return "oracle";
    case Mode::kCompare: return "compare";
    case Mode::kSweep: return "sweep";
    case Mode::kSde: return "sde";
  }
  return "noise";
}

Mode parse_mode(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '_', '-');
  for (Mode m : {Mode::kCoefficients, Mode::kSteadyState, Mode::kNoise, Mode::kOracle,
                 Mode::kCompare, Mode::kSweep, Mode::kSde}) {
    if (s == to_string(m)) return m;
  }
  if (s == "steady" || s == "steadystate") return Mode::kSteadyState;
  throw ConfigError("mode", "unknown mode '" + std::string(name) + "'");
}

ConfigError::ConfigError(const std::string& field, const std::string& message, int line)
    : std::runtime_error((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                         field + ": " + message),
      field_(field),
      line_(line) {}

PumpState PumpSpec::resolve() const {
  PumpFamily fam;
  try {
    fam = parse_pump_family(family);
  } catch (const InvalidPumpState& e) {
    throw ConfigError("pump.family", e.what());
  }
  try {
    Complex alpha(alpha_re, alpha_im);
    Complex beta(beta_re, beta_im);
    switch (fam) {
      case PumpFamily::kGhzClass:
      case PumpFamily::kZState: {
        const double norm = std::norm(alpha) + std::norm(beta);
        if (std::abs(norm - 1.0) > 1e-6) {
          throw ConfigError("pump.alpha_re", "|alpha|^2 + |beta|^2 = " + fmt12(norm) +
                                                 ", expected 1");
        }
        alpha /= std::sqrt(norm);
        beta /= std::sqrt(norm);
        if (fam == PumpFamily::kZState) {
          if (n_atoms != 2) throw ConfigError("pump.n_atoms", "the Z state has 2 atoms");
          if (b != 0 && b != 1) throw ConfigError("pump.b", "must be 0 or 1");
          return PumpState::z_state(alpha, beta, b);
        }
        if (n_atoms < 1 || n_atoms > kMaxDenseAtoms) {
          throw ConfigError("pump.n_atoms", "must be in 1.." + std::to_string(kMaxDenseAtoms));
        }
        return PumpState::ghz(alpha, beta, n_atoms);
      }
      case PumpFamily::kCloneMixture:
        if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) {
          throw ConfigError("pump.lambda1", "must lie in [0, 1]");
        }
        if (n_atoms < 1) throw ConfigError("pump.n_atoms", "must be positive");
        return PumpState::clone_mixture(lambda1, n_atoms);
      case PumpFamily::kProductUpper:
        if (n_atoms < 1) throw ConfigError("pump.n_atoms", "must be positive");
        return PumpState::product_upper(n_atoms);
    }
  } catch (const InvalidPumpState& e) {
    throw ConfigError("pump", e.what());
  }
  throw ConfigError("pump.family", "unsupported family");
}

double SweepSpec::value(int index) const {
  if (points <= 1) return from;
  return from + (to - from) * index / (points - 1);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "pump.family",       "pump.alpha_re",     "pump.alpha_im",   "pump.beta_re",
      "pump.beta_im",      "pump.lambda1",      "pump.b",          "pump.n_atoms",
      "cavity.gT",         "cavity.CT",         "operating.B",     "oracle.n_max",
      "oracle.conv_tol",   "oracle.max_cycles", "sde.n_traj",      "sde.dt",
      "sde.t_end",         "noise.method",      "noise.quadrature_points",
      "run.mode",          "run.output",        "run.seed",        "run.threads",
      "sweep.axis",        "sweep.from",        "sweep.to",        "sweep.points",
      "sweep.evaluate"};
  return keys;
}

void Scenario::set(const std::string& key, const std::string& raw, int line) {
  const std::string value = trim(raw);
  auto d = [&] { return parse_double(key, value, line); };
  auto i = [&] { return parse_int(key, value, line); };
  auto ensure_sweep = [&]() -> SweepSpec& {
    if (!sweep) sweep.emplace();
    return *sweep;
  };

  if (key == "pump.family") {
    try {
      parse_pump_family(value);
    } catch (const InvalidPumpState& e) {
      throw ConfigError(key, e.what(), line);
    }
    pump.family = value;
  } else if (key == "pump.alpha_re") {
    pump.alpha_re = d();
  } else if (key == "pump.alpha_im") {
    pump.alpha_im = d();
  } else if (key == "pump.beta_re") {
    pump.beta_re = d();
  } else if (key == "pump.beta_im") {
    pump.beta_im = d();
  } else if (key == "pump.lambda1") {
    pump.lambda1 = d();
  } else if (key == "pump.b") {
    pump.b = i();
  } else if (key == "pump.n_atoms") {
    pump.n_atoms = i();
  } else if (key == "cavity.gT") {
    cavity.gT = d();
  } else if (key == "cavity.CT") {
    cavity.CT = d();
  } else if (key == "operating.B") {
    operating_B = d();
  } else if (key == "oracle.n_max") {
    oracle_n_max = i();
  } else if (key == "oracle.conv_tol") {
    oracle_conv_tol = d();
  } else if (key == "oracle.max_cycles") {
    oracle_max_cycles = i();
  } else if (key == "sde.n_traj") {
    sde_n_traj = i();
  } else if (key == "sde.dt") {
    sde_dt = d();
  } else if (key == "sde.t_end") {
    sde_t_end = d();
  } else if (key == "noise.method") {
    if (value == "quadrature") {
      noise_method = NoiseMethod::kQuadrature;
    } else if (value == "closed_form" || value == "closed-form") {
      noise_method = NoiseMethod::kClosedForm;
    } else {
      throw ConfigError(key, "expected quadrature or closed_form", line);
    }
  } else if (key == "noise.quadrature_points") {
    quadrature_points = i();
  } else if (key == "run.mode") {
    try {
      mode = parse_mode(value);
    } catch (const ConfigError& e) {
      throw ConfigError(key, "unknown mode '" + value + "'", line);
    }
  } else if (key == "run.output") {
    output_path = value;
  } else if (key == "run.seed") {
    const long long v = parse_integer(key, value, line);
    if (v < 0) throw ConfigError(key, "must be non-negative", line);
    seed = static_cast<std::uint64_t>(v);
  } else if (key == "run.threads") {
    threads = i();
  } else if (key == "sweep.axis") {
    ensure_sweep().axis = value;
  } else if (key == "sweep.from") {
    ensure_sweep().from = d();
  } else if (key == "sweep.to") {
    ensure_sweep().to = d();
  } else if (key == "sweep.points") {
    ensure_sweep().points = i();
  } else if (key == "sweep.evaluate") {
    Mode m;
    try {
      m = parse_mode(value);
    } catch (const ConfigError&) {
      throw ConfigError(key, "unknown mode '" + value + "'", line);
    }
    if (m == Mode::kSweep) throw ConfigError(key, "a sweep cannot evaluate a sweep", line);
    ensure_sweep().evaluate = m;
  } else {
    throw ConfigError(key, "unknown key", line);
  }
}

std::vector<std::pair<std::string, std::string>> Scenario::entries() const {
  std::vector<std::pair<std::string, std::string>> e = {
      {"pump.family", pump.family},
      {"pump.alpha_re", fmt(pump.alpha_re)},
      {"pump.alpha_im", fmt(pump.alpha_im)},
      {"pump.beta_re", fmt(pump.beta_re)},
      {"pump.beta_im", fmt(pump.beta_im)},
      {"pump.lambda1", fmt(pump.lambda1)},
      {"pump.b", std::to_string(pump.b)},
      {"pump.n_atoms", std::to_string(pump.n_atoms)},
      {"cavity.gT", fmt(cavity.gT)},
      {"cavity.CT", fmt(cavity.CT)},
  };
  if (operating_B) e.emplace_back("operating.B", fmt(*operating_B));
  e.insert(e.end(), {
                        {"oracle.n_max", std::to_string(oracle_n_max)},
                        {"oracle.conv_tol", fmt(oracle_conv_tol)},
                        {"oracle.max_cycles", std::to_string(oracle_max_cycles)},
                        {"sde.n_traj", std::to_string(sde_n_traj)},
                        {"sde.dt", fmt(sde_dt)},
                        {"sde.t_end", fmt(sde_t_end)},
                        {"noise.method", noise_method == NoiseMethod::kQuadrature
                                             ? "quadrature"
                                             : "closed_form"},
                        {"noise.quadrature_points", std::to_string(quadrature_points)},
                        {"run.mode", std::string(to_string(mode))},
                        {"run.output", output_path},
                        {"run.seed", std::to_string(seed)},
                        {"run.threads", std::to_string(threads)},
                    });
  if (sweep) {
    e.insert(e.end(), {
                          {"sweep.axis", sweep->axis},
                          {"sweep.from", fmt(sweep->from)},
                          {"sweep.to", fmt(sweep->to)},
                          {"sweep.points", std::to_string(sweep->points)},
                          {"sweep.evaluate", std::string(to_string(sweep->evaluate))},
                      });
  }
  return e;
}

CavityConfig Scenario::effective_cavity() const {
  CavityConfig c = cavity;
  if (operating_B) {
    const auto op = operating_point_for_B(pump.resolve(), cavity.CT, *operating_B);
    if (!op) throw ConfigError("operating.B", "the pump has no gain at B = " + fmt12(*operating_B));
    c = *op;
  }
  return c;
}

void Scenario::validate() const {
  if (mode == Mode::kSweep) {
    if (!sweep || sweep->axis.empty()) {
      throw ConfigError("sweep.axis", "sweep mode needs exactly one axis");
    }
    if (!is_sweep_axis(sweep->axis)) {
      throw ConfigError("sweep.axis", "'" + sweep->axis + "' cannot be swept");
    }
    if (sweep->points < 1) throw ConfigError("sweep.points", "must be at least 1");
    // Sweep points are checked one by one; infeasible points become flagged rows.
  } else {
    pump.resolve();
    if (!(cavity.CT > 0.0)) throw ConfigError("cavity.CT", "must be positive");
    if (!operating_B && !(cavity.gT > 0.0)) throw ConfigError("cavity.gT", "must be positive");
    effective_cavity();
  }
  if (!(cavity.CT > 0.0)) throw ConfigError("cavity.CT", "must be positive");
  if (operating_B && !(*operating_B > 0.0)) throw ConfigError("operating.B", "must be positive");
  if (quadrature_points < 8 || quadrature_points % 2) {
    throw ConfigError("noise.quadrature_points", "must be even and at least 8");
  }
  if (threads < 1) throw ConfigError("run.threads", "must be at least 1");
  if (output_path.empty()) throw ConfigError("run.output", "must not be empty");

  const Mode m = mode == Mode::kSweep ? sweep->evaluate : mode;
  if (m == Mode::kOracle || m == Mode::kCompare) {
    if (oracle_n_max < 4) throw ConfigError("oracle.n_max", "must be at least 4");
    if (!(oracle_conv_tol > 0.0)) throw ConfigError("oracle.conv_tol", "must be positive");
    if (oracle_max_cycles < 1) throw ConfigError("oracle.max_cycles", "must be positive");
    if (pump.n_atoms > 3) throw ConfigError("pump.n_atoms", "the oracle handles at most 3 atoms");
    if ((1 << pump.n_atoms) * (oracle_n_max + 1) > kMaxDenseDimension * 4) {
      throw ConfigError("oracle.n_max", "joint dimension too large");
    }
  }
  if (m == Mode::kSde) {
    if (sde_n_traj < 2) throw ConfigError("sde.n_traj", "must be at least 2");
    if (!(sde_dt > 0.0)) throw ConfigError("sde.dt", "must be positive");
    if (!(sde_t_end > 0.0)) throw ConfigError("sde.t_end", "must be positive");
  }
}

OracleConfig Scenario::oracle_config() const {
  OracleConfig c;
  const CavityConfig cav = effective_cavity();
  c.n_max = oracle_n_max;
  c.gT = cav.gT;
  c.CT = cav.CT;
  c.pump = pump.resolve();
  c.max_cycles = oracle_max_cycles;
  c.conv_tol = oracle_conv_tol;
  return c;
}

SdeOptions Scenario::sde_options() const {
  SdeOptions o;
  o.n_traj = sde_n_traj;
  o.dt = sde_dt;
  o.t_end = sde_t_end;
  o.seed = seed;
  o.threads = threads;
  return o;
}

bool is_sweep_axis(const std::string& name) {
  static const std::set<std::string> axes = {
      "pump.alpha_re", "pump.alpha_im",  "pump.beta_re", "pump.beta_im",
      "pump.lambda1",  "pump.b",         "pump.n_atoms", "cavity.gT",
      "cavity.CT",     "operating.B",    "pump.alpha_beta_abs"};
  return axes.count(name) > 0;
}

Scenario apply_axis(const Scenario& base, const std::string& axis, double value) {
  Scenario s = base;
  s.mode = base.sweep ? base.sweep->evaluate : Mode::kNoise;
  s.sweep.reset();
  if (axis == "pump.alpha_beta_abs") {
    if (value < 0.0 || value > 0.5) {
      throw ConfigError(axis, "|alpha beta| = " + fmt12(value) + " is not attainable");
    }
    const Complex a(base.pump.alpha_re, base.pump.alpha_im);
    const Complex b(base.pump.beta_re, base.pump.beta_im);
    const double disc = std::sqrt(std::max(0.0, 1.0 - 4.0 * value * value));
    const double big = 0.5 * (1.0 + disc);
    const double alpha2 = std::abs(a) >= std::abs(b) ? big : 1.0 - big;
    const double pa = std::abs(a) > 0.0 ? std::arg(a) : 0.0;
    const double pb = std::abs(b) > 0.0 ? std::arg(b) : 0.0;
    const Complex na = std::polar(std::sqrt(alpha2), pa);
    const Complex nb = std::polar(std::sqrt(1.0 - alpha2), pb);
    s.pump.alpha_re = na.real();
    s.pump.alpha_im = na.imag();
    s.pump.beta_re = nb.real();
    s.pump.beta_im = nb.imag();
    return s;
  }
  if (axis == "pump.b" || axis == "pump.n_atoms") {
    s.set(axis, std::to_string(static_cast<int>(std::lround(value))));
    return s;
  }
  if (!is_sweep_axis(axis)) throw ConfigError(axis, "cannot be swept");
  s.set(axis, fmt(value));
  return s;
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  Scenario s;
  std::set<std::string> seen;
  auto assign = [&](const std::string& key, const std::string& value, int line) {
    if (!seen.insert(key).second) throw ConfigError(key, "duplicate key", line);
    s.set(key, value, line);
  };

  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(origin, std::string("invalid JSON: ") + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
      throw ConfigError(origin, "manifest has no 'config' object");
    }
    for (const auto& [key, value] : j["config"].items()) {
      assign(key, value.is_string() ? value.get<std::string>() : value.dump(), 0);
    }
    return s;
  }

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string l = raw;
    const auto hash = l.find_first_of("#;");
    if (hash != std::string::npos) l.erase(hash);
    l = trim(l);
    if (l.empty()) continue;
    if (l.front() == '[') {
      if (l.back() != ']') throw ConfigError(origin, "unterminated section header", line);
      section = trim(std::string_view(l).substr(1, l.size() - 2));
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ConfigError(origin, "expected 'key = value'", line);
    std::string key = trim(std::string_view(l).substr(0, eq));
    const std::string value = trim(std::string_view(l).substr(eq + 1));
    if (key.empty()) throw ConfigError(origin, "missing key", line);
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    if (value.empty()) throw ConfigError(key, "missing value", line);
    assign(key, value, line);
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

// ---------------------------------------------------------------------------

std::string format_row(const ResultRow& r) {
  auto num = [](const std::optional<double>& v) { return v ? fmt12(*v) : std::string(); };
  std::string out = std::to_string(r.point_id);
  for (const auto& v : {r.swept_value, r.I_ss, r.B, r.phi_ss, r.Gamma, r.xi, r.i2_zero, r.Q_II}) {
    out += ',';
    out += num(v);
  }
  out += r.stable ? ",1" : ",0";
  out += r.sf_valid ? ",1" : ",0";
  out += r.trunc_ok ? ",1" : ",0";
  out += ',';
  out += r.method;
  return out;
}

bool has_nan(const ResultRow& r) {
  for (const auto& v : {r.swept_value, r.I_ss, r.B, r.phi_ss, r.Gamma, r.xi, r.i2_zero, r.Q_II}) {
    if (v && !std::isfinite(*v)) return true;
  }
  return false;
}

PointOutcome evaluate_point(const Scenario& s, Mode mode, int id, std::optional<double> swept) {
  PointOutcome out;
  json details;
  details["point_id"] = id;
  details["swept_value"] = opt_json(swept);
  details["mode"] = std::string(to_string(mode));

  PumpState pump;
  CavityConfig cavity;
  try {
    pump = s.pump.resolve();
    cavity = s.effective_cavity();
    cavity.validate();
  } catch (const std::exception& e) {
    out.rows.push_back(flagged_row(id, swept, std::string(to_string(mode)), e.what()));
    details["infeasible"] = e.what();
    out.details = details.dump();
    return out;
  }
  details["pump"] = pump_json(pump);
  details["cavity"] = {{"gT", cavity.gT}, {"CT", cavity.CT}, {"weak_decay", cavity.weak_decay()}};

  try {
    switch (mode) {
      case Mode::kSteadyState:
      case Mode::kCoefficients: {
        const auto roots = steady_states(pump, cavity);
        const FpeModel model(pump, cavity);
        json list = json::array();
        for (const auto& r : roots) {
          ResultRow row;
          row.point_id = id;
          row.swept_value = swept;
          row.I_ss = r.I;
          row.B = r.B;
          row.phi_ss = r.phi;
          row.Gamma = r.Gamma;
          row.stable = r.stable;
          row.method = mode == Mode::kSteadyState ? "semiclassical" : "quadrature";
          json entry = {{"I", r.I}, {"B", r.B}, {"phi", r.phi}, {"Gamma", r.Gamma},
                        {"stable", r.stable}};
          if (mode == Mode::kCoefficients && r.I > 0.0) {
            const DriftDiffusion c = model.coefficients(r.I, r.phi, s.quadrature_points);
            row.Q_II = c.Q_II;
            entry["coefficients"] = coefficients_json(c);
          }
          list.push_back(entry);
          out.rows.push_back(row);
        }
        if (roots.empty()) {
          out.rows.push_back(flagged_row(id, swept, std::string(to_string(mode)),
                                         "no steady state in the search range"));
        }
        details["steady_states"] = list;
        break;
      }
      case Mode::kNoise: {
        NoiseEval n = evaluate_noise(s, pump, cavity);
        details.update(n.details);
        details["mode"] = "noise";
        if (n.report) {
          out.rows.push_back(noise_row(*n.report, id, swept));
        } else {
          out.rows.push_back(flagged_row(id, swept, std::string(to_string(s.noise_method)),
                                         "no stable lasing steady state"));
        }
        break;
      }
      case Mode::kOracle:
      case Mode::kCompare: {
        if (mode == Mode::kCompare) {
          NoiseEval n = evaluate_noise(s, pump, cavity);
          details["fpe"] = n.details;
          if (n.report) {
            out.rows.push_back(noise_row(*n.report, id, swept));
          } else {
            out.rows.push_back(flagged_row(id, swept, "quadrature", "no stable lasing steady state"));
          }
        }
        OracleConfig oc = s.oracle_config();
        const OracleResult r = steady_state(oc);
        ResultRow row;
        row.point_id = id;
        row.swept_value = swept;
        row.I_ss = r.mean_n;
        row.B = cavity.gT * std::sqrt(r.mean_n);
        row.xi = r.mandel;
        row.stable = r.converged;
        row.trunc_ok = r.truncation_weight < 1e-6;
        row.method = "oracle";
        out.rows.push_back(row);
        details["oracle"] = {{"mean_n", r.mean_n},
                             {"mandel", r.mandel},
                             {"cycles", r.cycles},
                             {"converged", r.converged},
                             {"truncation_weight", r.truncation_weight},
                             {"last_distance", r.last_distance},
                             {"max_trace_error", r.max_trace_error},
                             {"min_eigenvalue", r.min_eigenvalue},
                             {"seed_mean", r.seed_mean},
                             {"n_max", oc.n_max}};
        if (mode == Mode::kCompare && out.rows.front().I_ss && out.rows.front().xi) {
          const double I = *out.rows.front().I_ss;
          const double xi = *out.rows.front().xi;
          details["relative_deviation"] = {
              {"mean_n", std::abs(r.mean_n - I) / I},
              {"mandel", std::abs(r.mandel - xi) / std::max(std::abs(xi), 1e-12)}};
        }
        if (!r.converged) {
          out.numerical_failure = true;
          out.rows.back().failure =
              "oracle did not converge in " + std::to_string(r.cycles) + " cycles";
        }
        if (!out.rows.back().trunc_ok) {
          out.numerical_failure = true;
          out.rows.back().failure = "truncation leakage " + fmt12(r.truncation_weight) +
                                    " at n_max = " + std::to_string(oc.n_max);
        }
        if (!out.rows.back().failure.empty()) details["failure"] = out.rows.back().failure;
        break;
      }
      case Mode::kSde: {
        SdeOptions o = s.sde_options();
        if (swept) {
          o.seed = substream_seed(s.seed, static_cast<std::uint64_t>(id));
          o.threads = 1;
        }
        const SdeResult r = sde_sample(pump, cavity, o);
        ResultRow row;
        row.point_id = id;
        row.swept_value = swept;
        row.I_ss = r.mean_I;
        row.B = cavity.gT * std::sqrt(r.mean_I);
        row.phi_ss = r.phi_ss;
        row.xi = r.xi_est;
        row.stable = true;
        row.method = "sde";
        out.rows.push_back(row);
        details["sde"] = {{"xi_est", r.xi_est},   {"stderr_xi", r.stderr_xi},
                          {"mean_I", r.mean_I},   {"var_I", r.var_I},
                          {"I_ss", r.I_ss},       {"n_traj", r.n_traj},
                          {"seed", o.seed}};
        break;
      }
      case Mode::kSweep:
        throw std::logic_error("evaluate_point: sweep is not a point mode");
    }
  } catch (const NoSteadyState& e) {
    out.rows.push_back(flagged_row(id, swept, std::string(to_string(mode)), e.what()));
    details["no_steady_state"] = e.what();
  } catch (const NumericalError& e) {
    out.rows.push_back(flagged_row(id, swept, std::string(to_string(mode)), e.what()));
    out.numerical_failure = true;
    details["failure"] = e.what();
  }

  for (const auto& row : out.rows) {
    if (has_nan(row)) {
      out.numerical_failure = true;
      details["failure"] = "non-finite value in point " + std::to_string(id);
    }
  }
  out.details = details.dump();
  return out;
}

std::string manifest_json(const Scenario& s) {
  json j;
  j["tool"] = "micromaser-fpe";
  j["version"] = MICROMASER_VERSION;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
  j["compiler"] = __VERSION__;
#endif
  j["mode"] = std::string(to_string(s.mode));
  j["seed"] = s.seed;
  json cfg = json::object();
  for (const auto& [k, v] : s.entries()) cfg[k] = v;
  j["config"] = cfg;
  j["outputs"] = {{"results", s.output_path},
                  {"details", s.output_path + ".details.json"},
                  {"manifest", s.output_path + ".manifest.json"}};
  return j.dump(2);
}

RunSummary run_scenario(const Scenario& s) {
  s.validate();
  RunSummary summary;

  std::ofstream csv(s.output_path, std::ios::trunc);
  if (!csv) throw ConfigError("run.output", "cannot write '" + s.output_path + "'");
  {
    std::ofstream manifest(s.output_path + ".manifest.json", std::ios::trunc);
    manifest << manifest_json(s) << '\n';
  }
  csv << kCsvHeader << '\n';
  csv.flush();

  const bool sweeping = s.mode == Mode::kSweep;
  const int n_points = sweeping ? s.sweep->points : 1;
  std::vector<std::optional<PointOutcome>> results(n_points);
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<int> next{0};

  auto evaluate = [&](int index) {
    PointOutcome o;
    try {
      if (sweeping) {
        const double x = s.sweep->value(index);
        Scenario point;
        try {
          point = apply_axis(s, s.sweep->axis, x);
        } catch (const ConfigError& e) {
          o.rows.push_back(flagged_row(index, x, std::string(to_string(s.sweep->evaluate)),
                                       e.what()));
          o.details = json{{"point_id", index}, {"swept_value", x}, {"infeasible", e.what()}}.dump();
          return o;
        }
        point.threads = 1;
        return evaluate_point(point, s.sweep->evaluate, index, x);
      }
      return evaluate_point(s, s.mode, 0);
    } catch (const std::exception& e) {
      o.rows.push_back(flagged_row(index, std::nullopt, "error", e.what()));
      o.numerical_failure = true;
      o.details = json{{"point_id", index}, {"failure", e.what()}}.dump();
      return o;
    }
  };

  auto worker = [&] {
    for (int i = next++; i < n_points; i = next++) {
      PointOutcome o = evaluate(i);
      {
        std::lock_guard lock(mu);
        results[i] = std::move(o);
      }
      ready.notify_all();
    }
  };

  const int n_workers = sweeping ? std::clamp(s.threads, 1, n_points) : 1;
  std::vector<std::jthread> pool;
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);

  // Single writer: rows go out in axis order as soon as their point is done.
  json points = json::array();
  for (int i = 0; i < n_points; ++i) {
    PointOutcome o;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return results[i].has_value(); });
      o = std::move(*results[i]);
      results[i].reset();
    }
    for (const auto& row : o.rows) {
      csv << format_row(row) << '\n';
      ++summary.rows;
      if (!row.failure.empty()) {
        summary.messages.push_back("point " + std::to_string(row.point_id) + ": " + row.failure);
      }
    }
    csv.flush();
    if (o.numerical_failure) summary.exit_code = 2;
    points.push_back(json::parse(o.details));
  }
  pool.clear();

  std::ofstream details(s.output_path + ".details.json", std::ios::trunc);
  details << json{{"points", points}}.dump(2) << '\n';
  return summary;
}

}  // namespace micromaser
