#pragma once

// Scenario files, point evaluation and result emission for the command line
// tool. A scenario is a flat set of `section.key = value` settings; results
// go to a CSV table plus JSON sidecars (`<out>.details.json`,
// `<out>.manifest.json`).

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "micromaser/fpe_engine.hpp"
#include "micromaser/oracle.hpp"
#include "micromaser/sde.hpp"

namespace micromaser {

enum class Mode { kCoefficients, kSteadyState, kNoise, kOracle, kCompare, kSweep, kSde };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

/// Config problem with the offending field and, when read from a file, line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message, int line = 0);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_ = 0;
};

/// Raw pump settings as written in the config; resolved into a PumpState on
/// demand so sweeps can vary one field at a time.
struct PumpSpec {
  std::string family = "product_upper";
  double alpha_re = 0.0;
  double alpha_im = 0.0;
  double beta_re = 1.0;
  double beta_im = 0.0;
  double lambda1 = 1.0;
  int b = 1;
  int n_atoms = 2;

  /// Throws ConfigError. Amplitudes normalised to within 1e-6 are rescaled
  /// to unit norm.
  PumpState resolve() const;
};

struct SweepSpec {
  std::string axis;
  double from = 0.0;
  double to = 0.0;
  int points = 0;
  /// Per-point evaluation: noise, oracle, compare or sde.
  Mode evaluate = Mode::kNoise;

  double value(int index) const;
};

struct Scenario {
  PumpSpec pump;
  CavityConfig cavity;
  int oracle_n_max = 64;
  double oracle_conv_tol = 1e-9;
  int oracle_max_cycles = 20000;
  int sde_n_traj = 10000;
  double sde_dt = 0.05;
  double sde_t_end = 200.0;
  NoiseMethod noise_method = NoiseMethod::kQuadrature;
  int quadrature_points = kDefaultPanels;
  /// When set, gT is derived so the steady state sits at this B.
  std::optional<double> operating_B;

  Mode mode = Mode::kNoise;
  std::optional<SweepSpec> sweep;
  std::string output_path = "micromaser_results.csv";
  std::uint64_t seed = 1;
  int threads = 1;

  /// Sets one config key from its text form. Unknown keys throw ConfigError.
  void set(const std::string& key, const std::string& value, int line = 0);
  /// Every config key with its resolved value, in a stable order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  void validate() const;

  /// Cavity with gT resolved from operating_B when that is set.
  CavityConfig effective_cavity() const;
  OracleConfig oracle_config() const;
  SdeOptions sde_options() const;
};

/// Keys understood by Scenario::set.
const std::vector<std::string>& config_keys();

/// Sweep axes: any numeric config key plus `pump.alpha_beta_abs` (Z state and
/// GHZ amplitudes with |alpha beta| fixed, keeping the larger of |alpha|,
/// |beta| on the same side as the base config) and `operating.B` (gT chosen
/// so the steady state sits at that B for the configured CT).
bool is_sweep_axis(const std::string& name);
Scenario apply_axis(const Scenario& base, const std::string& axis, double value);

/// Reads `key = value` lines, optionally grouped under `[section]` headers,
/// or a JSON run manifest.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<config>");
Scenario load_scenario(const std::string& path);

/// One CSV row.
struct ResultRow {
  int point_id = 0;
  std::optional<double> swept_value;
  std::optional<double> I_ss;
  std::optional<double> B;
  std::optional<double> phi_ss;
  std::optional<double> Gamma;
  std::optional<double> xi;
  std::optional<double> i2_zero;
  std::optional<double> Q_II;
  bool stable = false;
  bool sf_valid = false;
  bool trunc_ok = true;
  std::string method;
  /// Set when the point failed numerically; the row is still written.
  std::string failure;
};

inline constexpr const char* kCsvHeader =
    "point_id,swept_value,I_ss,B,phi_ss,Gamma,xi,i2_zero,Q_II,stable,sf_valid,trunc_ok,method";

std::string format_row(const ResultRow& row);
/// True when a present numeric field is not finite.
bool has_nan(const ResultRow& row);

struct PointOutcome {
  std::vector<ResultRow> rows;
  std::string details;  // JSON object text
  bool numerical_failure = false;
};

/// Evaluates one point in the given mode (not kSweep).
PointOutcome evaluate_point(const Scenario& s, Mode mode, int point_id,
                            std::optional<double> swept_value = std::nullopt);

struct RunSummary {
  int exit_code = 0;
  int rows = 0;
  std::vector<std::string> messages;
};

/// Runs the scenario and writes the CSV plus sidecars. Exit code 0 on
/// success, 2 on a numerical failure in any point. Config errors throw
/// ConfigError before anything is written.
RunSummary run_scenario(const Scenario& s);

std::string manifest_json(const Scenario& s);

}  // namespace micromaser
