#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cagp/config.hpp"
#include "cagp/controller.hpp"
#include "cagp/dynamics.hpp"
#include "cagp/stability.hpp"

namespace cagp {

/// A region-of-attraction study: true system, nominal model, per-output GP
/// priors with data, quadratic Lyapunov function, fixed policy and the
/// certification grid. Built from a validated config; all randomness is
/// keyed by the config seed.
struct RoaScenario {
  std::string name;
  ControlAffineSystem system;
  NominalModel nominal;
  /// One entry per state dimension; nullopt where the nominal is exact.
  std::vector<std::optional<CompositeKernel>> kernels;
  std::vector<Dataset> data;
  std::vector<RkhsBounds> bounds;
  std::shared_ptr<const QuadraticLyapunov> lyap;
  Policy policy;
  Grid grid;
  double c_max = 1.0;
  double lipschitz = 0.0;
  /// The parts of the Lipschitz constant, for reporting.
  double lipschitz_gp = 0.0;
  double lipschitz_nominal = 0.0;
  CertificationSettings settings;  // awareness and bound mode set per run
  OracleOptions oracle;
  double jitter = 1e-10;
  std::vector<int> iterations;
  /// exp1d only: the sampled drift.
  std::optional<GpSample> drift;
  /// pendulum only: LQR design on the nominal linearization.
  std::optional<LqrResult> lqr;
};

RoaScenario make_exp1d(const ExperimentConfig& cfg);
RoaScenario make_pendulum_roa(const ExperimentConfig& cfg);
RoaScenario make_roa_scenario(const ExperimentConfig& cfg);

/// Learned model after `iterations` CG steps (capped at N per output).
LearnedModel learned_model(const RoaScenario& s, int iterations, bool with_split);
/// The prior model alone: nominal dynamics without uncertainty.
LearnedModel prior_model(const RoaScenario& s);

/// Certification of the scenario's policy under `model`.
CertificationProblem certification_problem(const RoaScenario& s, const LearnedModel& model,
                                           Awareness awareness, BoundMode mode);
RoaEstimate certify(const RoaScenario& s, const LearnedModel& model, Awareness awareness,
                    BoundMode mode, int iteration);

/// Simulation oracle on the scenario grid.
std::vector<bool> roa_oracle(const RoaScenario& s);

/// dV/dx (f(x) + g(x) u) on the true system.
double true_vdot(const RoaScenario& s, const Vector& x, const Vector& u);

/// Grid points certified but not in the oracle set.
int count_exceeding(const std::vector<int>& certified, const std::vector<bool>& oracle);

/// Largest |x| of a contiguous run of oracle points around the origin on a
/// 1D grid (the endpoint of the true interval).
double oracle_interval_endpoint(const Grid& grid, const std::vector<bool>& oracle);

}  // namespace cagp
