// micromaser-fpe: run, sweep and compare scenarios from a config file.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "micromaser/scenario.hpp"

using namespace micromaser;

namespace {

struct Overrides {
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void apply(Scenario& s, const Overrides& o) {
  if (o.mode) s.set("run.mode", *o.mode);
  if (o.out) s.output_path = *o.out;
  if (o.seed) s.seed = *o.seed;
  if (o.threads) s.set("run.threads", std::to_string(*o.threads));
}

int execute(const Scenario& s) {
  const RunSummary r = run_scenario(s);
  for (const auto& m : r.messages) std::cerr << "micromaser-fpe: " << m << '\n';
  std::cerr << "micromaser-fpe: wrote " << r.rows << " row(s) to " << s.output_path << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fokker-Planck and exact-model micromaser calculations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(MICROMASER_FPE_VERSION));

  std::string config;
  Overrides common;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config, "Scenario file (key = value, or a run manifest)")
        ->required();
    cmd->add_option("--out", common.out, "Results CSV path");
    cmd->add_option("--seed", common.seed, "Random seed");
    cmd->add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Evaluate one scenario");
  add_common(run);
  run->add_option("--mode", common.mode,
                  "coefficients | steady-state | noise | oracle | compare | sweep | sde");

  auto* sweep = app.add_subcommand("sweep", "Sweep one config axis");
  add_common(sweep);
  std::string axis;
  double from = 0.0;
  double to = 0.0;
  int points = 0;
  std::optional<std::string> evaluate;
  sweep->add_option("--axis", axis, "Config key to vary")->required();
  sweep->add_option("--from", from, "First value")->required();
  sweep->add_option("--to", to, "Last value")->required();
  sweep->add_option("--points", points, "Number of points")->required()->check(CLI::PositiveNumber);
  sweep->add_option("--evaluate", evaluate, "Per-point mode (default noise)");

  auto* compare = app.add_subcommand("compare", "Fokker-Planck vs exact oracle");
  add_common(compare);
  int n_max = 0;
  compare->add_option("--nmax", n_max, "Fock truncation")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    Scenario s = load_scenario(config);
    apply(s, common);
    if (sweep->parsed()) {
      s.mode = Mode::kSweep;
      s.set("sweep.axis", axis);
      s.sweep->from = from;
      s.sweep->to = to;
      s.sweep->points = points;
      if (evaluate) s.set("sweep.evaluate", *evaluate);
    } else if (compare->parsed()) {
      s.mode = Mode::kCompare;
      s.oracle_n_max = n_max;
    }
    return execute(s);
  } catch (const ConfigError& e) {
    std::cerr << "micromaser-fpe: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "micromaser-fpe: " << e.what() << '\n';
    return 2;
  }
}
