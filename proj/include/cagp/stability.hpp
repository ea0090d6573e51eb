#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cagp/common.hpp"
#include "cagp/dynamics.hpp"
#include "cagp/itergp.hpp"
#include "cagp/kernel.hpp"

namespace cagp {

class LyapunovFunction {
 public:
  virtual ~LyapunovFunction() = default;
  virtual int dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  /// sup over the domain of the spectral norm of the Hessian.
  virtual double hessian_sup() const = 0;
  /// sup over the domain of |dV/dx|.
  virtual double grad_sup() const = 0;
};

/// V(x) = x' P x on a box.
class QuadraticLyapunov : public LyapunovFunction {
 public:
  QuadraticLyapunov(Matrix P, Box domain);

  int dim() const override { return static_cast<int>(P_.rows()); }
  double value(const Vector& x) const override { return x.dot(P_ * x); }
  Vector gradient(const Vector& x) const override { return 2.0 * P_ * x; }
  double hessian_sup() const override { return hessian_sup_; }
  double grad_sup() const override { return grad_sup_; }
  const Matrix& P() const { return P_; }

 private:
  Matrix P_;
  double hessian_sup_;
  double grad_sup_;
};

/// The nominal model plus one GP per learned output dimension. Outputs
/// without a posterior are taken from the nominal model and carry no
/// uncertainty.
struct LearnedModel {
  NominalModel nominal;
  std::vector<std::optional<GpPosterior>> posteriors;  // size n
  std::vector<RkhsBounds> bounds;                      // size n

  int dim() const { return static_cast<int>(posteriors.size()); }
  Vector mean(const Vector& x, const Vector& u) const;
  /// Per-output standard deviations; zero for outputs taken from the nominal.
  Vector stddev(const Vector& x, const Vector& u, VarianceMode mode) const;
  bool has_split() const;
};

enum class Awareness { kAware, kAgnostic };
enum class BoundMode { kSplit, kCombined };
std::string to_string(Awareness a);
std::string to_string(BoundMode b);

/// Terms of the upper bound on Vdot at (x, u):
///   mean  = dV/dx . mu_i(x, u)
///   math  = sum_d |dV/dx_d| B_d sigma_math,d
///   comp  = sum_d |dV/dx_d| B_d sigma_comp,d
///   combined = sum_d |dV/dx_d| B_d sigma_combined,d
/// math and comp are zero in combined mode.
struct VdotTerms {
  double mean = 0.0;
  double math = 0.0;
  double comp = 0.0;
  double combined = 0.0;

  /// mean + math + comp (aware, split), mean + combined (aware, combined),
  /// mean + math (agnostic).
  double upper(Awareness awareness, BoundMode mode) const;
};

VdotTerms vdot_decomposition(const LearnedModel& model, const LyapunovFunction& lyap,
                             const Vector& x, const Vector& u, BoundMode mode);

/// Lipschitz constant of Vdot for one learned output:
///   (B_f^2 |k_f| + B_g^2 B_pi |k_g|) hess + sqrt(2) grad (B_f sqrt(|k_f||dk_f|)
///   + B_g B_pi sqrt(|k_g||dk_g|)).
/// Each sup-norm factor B^2 |k| is raised to B sqrt(|k|) when smaller, since
/// B sqrt(|k|) bounds the function itself.
double lipschitz_constant(const RkhsBounds& bounds, const KernelBounds& kf,
                          const KernelBounds& kg, double hessian_sup, double grad_sup);

/// sup |F| and a Lipschitz estimate of the nominal closed loop
/// F(x) = f_hat(x) + g_hat(x) pi(x), from a dense grid and central
/// differences, inflated by 5%.
struct FieldBounds {
  double sup = 0.0;
  double lip = 0.0;
};
FieldBounds closed_loop_field_bounds(const VectorField& field, const Box& domain,
                                     int points_per_dim);

/// Lipschitz estimate of a policy over a box (same procedure).
double policy_lipschitz(const Policy& policy, const Box& domain, int points_per_dim);

/// Per-output kernel bounds used to assemble the closed-loop constant.
struct OutputKernelBounds {
  std::optional<KernelBounds> kf;
  std::vector<std::optional<KernelBounds>> kg;
};

/// Total Lipschitz constant of Vdot for the closed loop: the per-output GP
/// terms, the nominal closed-loop term hess * sup|F| + grad * lip(F), and
/// grad * B_g sqrt(|k_g|) * lip(pi) for every learned input column.
double closed_loop_lipschitz(const std::vector<RkhsBounds>& bounds,
                             const std::vector<OutputKernelBounds>& kernel_bounds,
                             const FieldBounds& nominal, double policy_lip,
                             const LyapunovFunction& lyap);

/// Grid with pitch at most tau per coordinate, endpoints included.
struct Grid {
  double tau = 0.0;
  Matrix points;  // P x n

  static Grid Uniform(const Box& box, double tau);
  int size() const { return static_cast<int>(points.rows()); }
  Vector point(int i) const { return points.row(i).transpose(); }
};

enum class MarginMode { kLipschitz, kPointwise };
std::string to_string(MarginMode m);

struct CertificationSettings {
  Awareness awareness = Awareness::kAware;
  BoundMode bound_mode = BoundMode::kSplit;
  MarginMode margin_mode = MarginMode::kLipschitz;
  /// Points with |x| at or below this radius only need a strictly negative
  /// bound; the grid margin cannot hold where Vdot vanishes quadratically.
  double origin_exclusion = 0.0;
  double lipschitz = 0.0;
};

/// Lyapunov function, policy, learned model and grid: everything needed to
/// certify level sets. The per-point bound is evaluated once and cached.
class CertificationProblem {
 public:
  CertificationProblem(const LearnedModel& model, std::shared_ptr<const LyapunovFunction> lyap,
                       Policy policy, Grid grid, CertificationSettings settings);

  const Grid& grid() const { return grid_; }
  const CertificationSettings& settings() const { return settings_; }
  const LyapunovFunction& lyapunov() const { return *lyap_; }
  /// V at each grid point.
  const Vector& levels() const { return levels_; }
  /// Left side of the decrease condition at each grid point.
  const Vector& margins() const { return margins_; }
  /// Threshold each point must stay strictly below.
  const Vector& thresholds() const { return thresholds_; }
  bool passes(int i) const { return margins_[i] < thresholds_[i]; }
  /// Same bounds judged under another grid-margin rule.
  CertificationProblem with_margin_mode(MarginMode mode) const;
  double max_level() const;

 private:
  Grid grid_;
  CertificationSettings settings_;
  std::shared_ptr<const LyapunovFunction> lyap_;
  Vector levels_;
  Vector margins_;
  Vector thresholds_;

  void set_thresholds();
};

struct CertifyResult {
  bool certified = true;
  bool empty = true;
  std::optional<int> witness;  // first violating grid point
};

/// Checks the decrease condition at every grid point with 0 < V <= c.
CertifyResult certify_level_set(const CertificationProblem& problem, double c);

struct RoaEstimate {
  /// Largest V among certified points (0 when none).
  double c = 0.0;
  /// Level returned by the bisection.
  double c_search = 0.0;
  std::vector<int> certified_points;
  Vector margin;
  int iteration = 0;
  Awareness mode = Awareness::kAware;
};

/// Bisection on c in (0, c_max] to relative precision 1e-3, confirmed by a
/// final direct check.
RoaEstimate max_certified_level(const CertificationProblem& problem, double c_max,
                                int iteration = 0);

struct OracleOptions {
  double horizon = 20.0;
  double dt = 0.01;
  double conv_radius = 1e-2;
  /// Only points with V <= this are simulated (others are reported out);
  /// infinity simulates all.
  double level_cap = std::numeric_limits<double>::infinity();
};

/// True where the simulated closed loop from the grid point reaches and
/// stays near the origin. Points whose trajectory enters the ball of radius
/// conv_radius / 10 are accepted early; otherwise |x(T)| <= conv_radius.
std::vector<bool> true_roa_oracle(const ControlAffineSystem& sys, const Policy& policy,
                                  const Grid& grid, const OracleOptions& options,
                                  const LyapunovFunction* lyap = nullptr);

/// Energy function E (C^2) and power function P with invariant set
/// S = { x : in_set(x) }.
struct EnergyPowerPair {
  std::function<double(const Vector&)> energy;
  std::function<double(const Vector&)> power;
  std::function<bool(const Vector&)> in_set;
};

/// Stability instantiation: E = V, P = -lambda V, S = { 0 < V <= c }.
EnergyPowerPair stability_pair(std::shared_ptr<const LyapunovFunction> lyap, double lambda,
                               double c);
/// Safety instantiation: E = -h for a barrier h, P = alpha(h), S = { h >= 0 }.
/// Edot <= alpha(h) is the usual barrier condition hdot >= -alpha(h).
EnergyPowerPair barrier_pair(std::function<double(const Vector&)> barrier,
                             std::function<double(double)> alpha);

struct InvarianceResult {
  bool certified = true;
  std::optional<Vector> witness;
};

/// True iff Edot_upper(x) - P(x) < -L_E tau at every grid point of S.
InvarianceResult energy_invariance_check(const EnergyPowerPair& pair,
                                         const std::function<double(const Vector&)>& edot_upper,
                                         const Grid& grid, double lipschitz, double tau);

/// max |h(x) - h(x')| / |x - x'| over random pairs in the box.
double sampled_lipschitz_ratio(const std::function<double(const Vector&)>& h, const Box& box,
                               int pairs, std::uint64_t seed);

}  // namespace cagp
