// Seed and parameter sweeps used to choose the scenario defaults. Prints one
// line per candidate; not part of the test suite.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cagp/config.hpp"
#include "cagp/scenarios.hpp"

using namespace cagp;

namespace {

double Endpoint(double c) { return std::sqrt(c); }

void Exp1d(ExperimentConfig cfg, int seed) {
  cfg.set("experiment", "seed", std::to_string(seed));
  const RoaScenario s = make_exp1d(cfg);
  const auto oracle = roa_oracle(s);
  const double truth = oracle_interval_endpoint(s.grid, oracle);
  if (std::abs(truth - 0.921) > 0.005) return;
  std::printf("seed %3d  |f| %.3f  true %.3f |", seed, s.drift->rkhs_norm(), truth);
  for (int i : {0, 4, 12, 25}) {
    const LearnedModel m = learned_model(s, i, true);
    const auto est = certify(s, m, Awareness::kAware, BoundMode::kSplit, i);
    std::printf(" i%d %.3f%s", i, Endpoint(est.c),
                count_exceeding(est.certified_points, oracle) ? "!" : "");
  }
  // Agnostic min-norm controller at i = 4: sign of the true Vdot away from the origin.
  const auto m4 = std::make_shared<LearnedModel>(learned_model(s, 4, true));
  ControllerSettings agn;
  agn.awareness = Awareness::kAgnostic;
  agn.input_box = s.system.input_set;
  ControllerSettings awr = agn;
  awr.awareness = Awareness::kAware;
  double worst_agn = -1e9, worst_aware = -1e9;
  for (int p = 0; p < s.grid.size(); p += 4) {
    const Vector x = s.grid.point(p);
    if (std::abs(x[0]) <= 0.2) continue;
    const auto ua = solve_min_norm_socp(build_socp_constraint(*m4, *s.lyap, x, agn)).u;
    const auto uw = solve_min_norm_socp(build_socp_constraint(*m4, *s.lyap, x, awr)).u;
    worst_agn = std::max(worst_agn, true_vdot(s, x, ua));
    worst_aware = std::max(worst_aware, true_vdot(s, x, uw));
  }
  std::printf(" | socp agn4 %.3f aware4 %.3f\n", worst_agn, worst_aware);
}

// Pendulum: prior-only overreach, agnostic overreach at the first i, aware containment.
void Pendulum(ExperimentConfig cfg, int seed) {
  cfg.set("experiment", "seed", std::to_string(seed));
  const auto start = std::chrono::steady_clock::now();
  const RoaScenario s = make_pendulum_roa(cfg);
  const auto oracle = roa_oracle(s);
  int inside = 0;
  for (bool b : oracle) inside += b ? 1 : 0;
  const auto prior = certify(s, prior_model(s), Awareness::kAware, BoundMode::kSplit, 0);
  std::printf("seed %3d  grid %d oracle %d  L %.1f | prior c %.3f ex %d |", seed, s.grid.size(),
              inside, s.lipschitz, prior.c, count_exceeding(prior.certified_points, oracle));
  for (int i : s.iterations) {
    const LearnedModel m = learned_model(s, i, true);
    const auto aware = certify(s, m, Awareness::kAware, BoundMode::kSplit, i);
    const auto agn = certify(s, m, Awareness::kAgnostic, BoundMode::kSplit, i);
    std::printf(" i%d aware %.3f/%d agn %.3f/%d |", i, aware.c,
                count_exceeding(aware.certified_points, oracle), agn.c,
                count_exceeding(agn.certified_points, oracle));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf(" %.1fs\n", secs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenario calibration sweeps"};
  std::string scenario = "exp1d";
  int first = 0, last = 20;
  std::vector<std::string> overrides;
  app.add_option("scenario", scenario);
  app.add_option("--set", overrides, "section.key=value");
  app.add_option("--first", first);
  app.add_option("--last", last);
  CLI11_PARSE(app, argc, argv);
  ExperimentConfig cfg = ExperimentConfig::Defaults(scenario);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.rfind('.', eq);
    cfg.set(o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  for (int seed = first; seed <= last; ++seed) {
    try {
      if (scenario == "exp1d") Exp1d(cfg, seed);
      if (scenario == "pendulum-roa") Pendulum(cfg, seed);
    } catch (const std::exception& e) {
      std::printf("seed %d failed: %s\n", seed, e.what());
    }
    std::fflush(stdout);
  }
  return 0;
}
