#pragma once

#include <cstdint>
#include <vector>

#include "cagp/common.hpp"
#include "cagp/config.hpp"
#include "cagp/dynamics.hpp"
#include "cagp/kernel.hpp"
#include "cagp/stability.hpp"

namespace cagp {

struct TrackingParams {
  double mass = 1.0;
  double radius = 1.0;
  double omega = 1.0;
  double height = 1.0;
  double gravity = 9.81;
};

/// Per-axis disturbance force drawn from a GP over (p, v). `zero` disables it.
struct DisturbanceSpec {
  KernelSpec kernel = KernelSpec::SquaredExponential(1.0, 1.0);
  int centers = 40;
  std::uint64_t seed = 0;
  Box box;  // 6D region the centers are drawn from
  bool zero = false;
};

/// Point mass m vdot = m g_v + f_u + f_d(p, v) following a horizontal circle.
/// State x = (p, v), input f_u (force, 3D). With p~ = p - p_d the sliding
/// variable is s = v - v_d + Lambda p~ and V(s) = m |s|^2 / 2.
class TrackingScenario {
 public:
  struct Reference {
    Vector p, v, a;
  };

  TrackingScenario(Vector lambda, const DisturbanceSpec& disturbance, TrackingParams params);

  const ControlAffineSystem& system() const { return system_; }
  const TrackingParams& params() const { return params_; }
  const Vector& lambda() const { return lambda_; }
  const std::vector<GpSample>& disturbance() const { return disturbance_; }
  /// Disturbance force at x (zero when disabled).
  Vector disturbance_force(const Vector& x) const;

  Reference reference(double t) const;
  Vector sliding(double t, const Vector& x) const;
  double lyapunov(double t, const Vector& x) const;
  /// dV/dt along the true dynamics under force u.
  double vdot(double t, const Vector& x, const Vector& u) const;
  /// Force that makes sdot = 0 on the true system (perfect feedforward).
  Vector ideal_force(double t, const Vector& x) const;

 private:
  Vector lambda_;
  TrackingParams params_;
  Vector gravity_;
  std::vector<GpSample> disturbance_;
  ControlAffineSystem system_;
};

TrackingScenario make_tracking_pointmass(const Vector& lambda, const DisturbanceSpec& disturbance,
                                         const TrackingParams& params = {});

struct TrackingSettings {
  std::optional<KernelSpec> kernel;
  int window = 20;
  double refit_rate = 10.0;
  double u_limit = 40.0;
  /// RKHS bound of each axis' disturbance acceleration.
  double bound = 1.0;
  double dt = 1e-3;
  double horizon = 20.0;
  Vector initial_offset = Vector::Zero(3);
  double relative_jitter = 1e-10;
};

/// One closed-loop run of the explicit controller on the sliding variable,
/// with a sliding-window GP refit at refit_rate.
struct TrackingRun {
  int iterations = 0;
  Awareness awareness = Awareness::kAware;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<double> error;       // |p - p_d|
  std::vector<double> lyapunov;    // V(s)
  std::vector<double> vdot;        // true dV/dt
  std::vector<double> sigma_math;  // sum over axes of B sigma_math |s_k| m
  std::vector<double> sigma_comp;
  double rms = 0.0;
};

TrackingRun run_tracking(const TrackingScenario& scenario, const TrackingSettings& settings,
                         int iterations, Awareness awareness);

/// Scenario and settings from a tracking3d config.
struct TrackingSetup {
  TrackingScenario scenario;
  TrackingSettings settings;
  std::vector<int> iterations;
};
TrackingSetup make_tracking(const ExperimentConfig& cfg);

}  // namespace cagp
