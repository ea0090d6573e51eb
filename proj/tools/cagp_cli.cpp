// Experiment runner. Exit codes: 0 success, 1 invalid input or config,
// 2 numerical failure.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cagp/config.hpp"
#include "cagp/experiment.hpp"

namespace {

constexpr int kInvalid = 1;
constexpr int kNumerical = 2;

struct Options {
  std::string config;
  std::string scenario;
  std::optional<long> seed;
  std::string iters;
  std::string mode;
  std::optional<double> tau;
  std::string out;
  bool split = false;
  bool combined = false;
  bool print_config = false;
};

cagp::ExperimentConfig Resolve(const Options& o) {
  using cagp::ConfigError;
  cagp::ExperimentConfig cfg = [&] {
    if (!o.config.empty()) {
      cagp::ExperimentConfig c = cagp::validate_config(o.config);
      if (!o.scenario.empty() && o.scenario != c.scenario()) {
        throw ConfigError({"--scenario " + o.scenario + " conflicts with experiment.scenario = " +
                           c.scenario() + " in " + o.config});
      }
      return c;
    }
    if (o.scenario.empty()) throw ConfigError({"give --config PATH or --scenario NAME"});
    return cagp::ExperimentConfig::Defaults(o.scenario);
  }();
  if (o.seed) cfg.set("experiment", "seed", std::to_string(*o.seed));
  if (!o.iters.empty()) cfg.set("experiment", "cg_iters", o.iters);
  if (!o.mode.empty()) cfg.set("experiment", "mode", o.mode);
  if (o.tau) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *o.tau);
    cfg.set("experiment", "tau", buf);
  }
  if (!o.out.empty()) cfg.set("experiment", "output", o.out);
  if (o.split) cfg.set("experiment", "bound_mode", "split");
  if (o.combined) cfg.set("experiment", "bound_mode", "combined");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Computation-aware GP control experiments"};
  Options o;
  app.add_option("--config", o.config, "experiment config file");
  app.add_option("--scenario", o.scenario, "exp1d, pendulum-roa or tracking3d");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--iters", o.iters, "CG iteration counts, comma separated");
  app.add_option("--mode", o.mode, "aware, agnostic or both");
  app.add_option("--tau", o.tau, "certification grid pitch");
  app.add_option("--out", o.out, "output directory");
  auto* split = app.add_flag("--split", o.split, "bound math and comp terms separately");
  auto* combined = app.add_flag("--combined", o.combined, "bound with the combined variance");
  split->excludes(combined);
  app.add_flag("--print-config", o.print_config, "print the effective config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    const cagp::ExperimentConfig cfg = Resolve(o);
    if (o.print_config) {
      std::cout << cfg.Serialize();
      return 0;
    }
    const auto result = cagp::run_experiment(cfg);
    std::cout << result.summary << "\nwrote " << result.files.size() << " files to "
              << result.directory.string() << "\n";
    return 0;
  } catch (const cagp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const cagp::ConfigError& e) {
    std::cerr << "invalid config:\n" << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
}
