#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cagp/common.hpp"
#include "cagp/composite_kernel.hpp"
#include "cagp/itergp.hpp"
#include "cagp/kernel.hpp"

namespace cagp {

using VectorField = std::function<Vector(const Vector&)>;
using InputMatrixField = std::function<Matrix(const Vector&)>;
using Policy = std::function<Vector(const Vector&)>;

/// xdot = f(x) + g(x) u.
struct ControlAffineSystem {
  int n = 0;
  int m = 0;
  VectorField f;
  InputMatrixField g;
  Box state_domain;
  Box input_set;
  std::string label;

  Vector operator()(const Vector& x, const Vector& u) const;
  /// Throws InputError unless f(0) = 0 and 0 lies in the input set.
  void check_equilibrium(double tol = 1e-12) const;
};

/// Prior-mean model f_hat(x) + g_hat(x) u.
struct NominalModel {
  VectorField f_hat;
  InputMatrixField g_hat;

  Vector operator()(const Vector& x, const Vector& u) const;
  /// Output dimension `d` as a scalar affine mean.
  AffineMean output(int d) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;  // inputs[k] is applied on [times[k], times[k+1])
  bool diverged = false;
};

/// Classical RK4 with u held constant. Throws NumericalError on a
/// non-finite derivative.
Vector step_rk4(const ControlAffineSystem& sys, const Vector& x, const Vector& u, double dt);

struct SimulationOptions {
  double horizon = 10.0;
  double dt = 1e-3;
  /// Stop and flag divergence beyond this norm; <= 0 means 10x the domain
  /// diameter.
  double divergence_radius = -1.0;
  /// Stop once |x| falls below this; <= 0 disables.
  double stop_radius = 0.0;
  /// Clip policy outputs to the system's input set.
  bool clip_inputs = true;
};

Trajectory simulate(const ControlAffineSystem& sys, const Policy& policy, const Vector& x0,
                    const SimulationOptions& options = {});

/// A scalar function drawn from a zero-mean GP and represented by its kernel
/// expansion f(x) = sum_p alpha_p k(x, c_p) over a finite grid of centers.
/// The expansion interpolates the drawn values at the centers and lies in the
/// kernel's RKHS with norm sqrt(alpha' K alpha).
class GpSample {
 public:
  GpSample(KernelSpec kernel, Matrix centers, Vector alpha);
  static GpSample Zero(KernelSpec kernel, int dim);

  double operator()(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  double rkhs_norm() const { return rkhs_norm_; }
  const Matrix& centers() const { return centers_; }
  const Vector& alpha() const { return alpha_; }

 private:
  KernelSpec kernel_;
  Matrix centers_;  // P x n
  Vector alpha_;
  double rkhs_norm_ = 0.0;
};

/// Values the sample must take at given points.
struct SamplePins {
  Matrix points;  // P x n
  Vector values;
};

/// Draws N(0, amplitude^2 K) on the center grid (Cholesky of K + jitter),
/// optionally conditioned on pinned values, and returns the interpolating
/// kernel expansion. Deterministic per seed.
GpSample sample_gp_function(const KernelSpec& kernel, const Matrix& grid, std::uint64_t seed,
                            double amplitude = 1.0, const std::optional<SamplePins>& pins = {});

/// Uniform grid of `count` points on [lo, hi] as a count x 1 matrix.
Matrix linspace_grid(double lo, double hi, int count);

/// One dataset per output dimension: Y = (f(x) + g(x) u)_d, prior mean
/// (f_hat(x) + g_hat(x) u)_d.
std::vector<Dataset> collect_measurements(const ControlAffineSystem& sys,
                                          const NominalModel& nominal, const Matrix& X,
                                          const Matrix& U);

struct PendulumParams {
  double mass = 0.15;
  double length = 0.5;
  double friction = 0.05;
  double gravity = 9.81;
};

/// theta'' = (m g l sin(theta) - mu theta' + u) / (m l^2), state (theta, theta').
ControlAffineSystem make_pendulum(const PendulumParams& params, const Box& state_domain,
                                  const Box& input_set);

/// Upright linearization with its own mass and friction (defaults: 0.05 kg
/// lighter, frictionless).
NominalModel make_pendulum_nominal(const PendulumParams& params = {0.10, 0.5, 0.0, 9.81});

/// A and B of the pendulum linearized at the upright equilibrium.
void pendulum_linearization(const PendulumParams& params, Matrix* A, Matrix* B);

/// Latin-hypercube sample of `count` points in a box.
Matrix latin_hypercube(const Box& box, int count, std::uint64_t seed);

}  // namespace cagp
