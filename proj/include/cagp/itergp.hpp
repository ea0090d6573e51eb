#pragma once

#include <functional>
#include <optional>
#include <string>

#include "cagp/common.hpp"
#include "cagp/composite_kernel.hpp"

namespace cagp {

/// State of conjugate gradients read as Bayesian inference on the
/// representer weights v* = K^-1 target. After i steps the belief has weights
/// v_i = C_i target with C_i = S_i (S_i' K S_i)^-1 S_i'.
class SolverBelief {
 public:
  /// K must already contain any jitter; `jitter` only sets the breakdown
  /// floor s'Ks <= jitter / 10 * |s|^2.
  SolverBelief(Matrix K, Vector target, double jitter = 0.0);

  int size() const { return static_cast<int>(target_.size()); }
  int iteration() const { return static_cast<int>(directions_.cols()); }
  const Matrix& K() const { return K_; }
  const Vector& target() const { return target_; }
  const Vector& weights() const { return weights_; }
  const Vector& residual() const { return residual_; }
  /// N x i, one search direction per column.
  const Matrix& directions() const { return directions_; }
  /// S_i' K S_i.
  const Matrix& projected_gram() const { return projected_; }

  /// Largest |s_p' K s_q| / (|s_p|_K |s_q|_K) over p != q.
  double conjugacy_error() const;

  /// F with C_i = F F'. N x i.
  Matrix c_factor() const;

  /// Appends one direction. Throws SolverBreakdown on a degenerate direction.
  void step();

 private:
  void refactor();

  Matrix K_;
  Vector target_;
  Vector weights_;
  Vector residual_;
  Matrix directions_;
  Matrix projected_;
  bool diagonal_ = true;
  double last_rr_ = 0.0;
  double breakdown_floor_ = 0.0;
};

/// Raised when CG produces a direction with s'Ks at or below the jitter
/// floor. Carries the belief reached before the failing step.
class SolverBreakdown : public NumericalError {
 public:
  SolverBreakdown(const std::string& what, SolverBelief partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const SolverBelief& partial() const { return partial_; }

 private:
  SolverBelief partial_;
};

/// Functional form of SolverBelief::step.
SolverBelief cg_step(SolverBelief belief);

enum class StopReason { kMaxIterations, kResidualTolerance, kExhausted };
std::string to_string(StopReason reason);

struct SolverRun {
  SolverBelief belief;
  StopReason reason;
};

/// Runs CG until min(max_iters, N) steps or |r| <= residual_tol * |target|.
SolverRun run_solver(const Matrix& K, const Vector& target, int max_iters,
                     double residual_tol = 0.0, double jitter = 0.0);

/// Affine-in-u prior mean mu(x, u) = f_hat(x) + g_hat(x)' u for one output.
struct AffineMean {
  std::function<double(const Vector&)> drift;
  std::function<Vector(const Vector&)> input_gain;

  double operator()(const Vector& x, const Vector& u) const;
  static AffineMean Zero(int input_dim);
};

enum class VarianceMode { kCombined, kMath, kComp };
std::string to_string(VarianceMode mode);

/// Posterior quantities at a fixed state as functions of u. With z = [1; u]:
/// mean = offset + slope' u, variance = z' Q z.
struct AffineQuery {
  double mean_offset = 0.0;
  Vector mean_slope;
  Matrix prior;     // (m+1) x (m+1)
  Matrix combined;
  Matrix math;      // empty unless the split is available
  Matrix comp;

  double mean(const Vector& u) const;
  double variance(const Vector& u, VarianceMode mode) const;
};

/// Clamps values in [-tol, 0) to zero; throws NumericalError below -tol.
double clamp_variance(double value, double tol = 1e-8);

/// GP posterior under a (possibly truncated) solver belief.
class GpPosterior {
 public:
  /// weights: representer weights; c_factor: F with C = F F'. When
  /// with_split is set, K + jitter I is Cholesky-factorized so that the
  /// mathematical/computational split can be queried.
  GpPosterior(CompositeKernel kernel, Dataset data, AffineMean prior, Vector weights,
              Matrix c_factor, int iteration, double jitter, bool with_split);

  const CompositeKernel& kernel() const { return kernel_; }
  const Dataset& data() const { return data_; }
  const AffineMean& prior() const { return prior_; }
  const Vector& weights() const { return weights_; }
  int iteration() const { return iteration_; }
  bool has_split() const { return chol_.has_value(); }
  double jitter() const { return jitter_; }

  double mean(const Vector& x, const Vector& u) const;
  double variance(const Vector& x, const Vector& u, VarianceMode mode) const;
  AffineQuery affine(const Vector& x) const;

 private:
  CompositeKernel kernel_;
  Dataset data_;
  AffineMean prior_;
  Vector weights_;
  Matrix c_factor_;
  int iteration_;
  double jitter_;
  std::optional<Eigen::LLT<Matrix>> chol_;
};

/// Posterior after `iterations` CG steps on K + jitter I. A solver breakdown
/// ends the run early; the posterior then reports the steps actually taken.
GpPosterior iterative_posterior(const CompositeKernel& kernel, const Dataset& data,
                                const AffineMean& prior, int iterations, bool with_split,
                                double relative_jitter = 1e-10);

/// Exact posterior from a Cholesky factorization; the reference solution.
GpPosterior direct_posterior(const CompositeKernel& kernel, const Dataset& data,
                             const AffineMean& prior, double relative_jitter = 1e-10);

/// RKHS norm bounds and the policy sup bound.
struct RkhsBounds {
  double B_f = 0.0;
  double B_g = 0.0;
  double B_fg = 0.0;
  double B_pi = 0.0;
};

/// B_fg * sqrt(combined variance).
double worst_case_bound(const GpPosterior& post, const RkhsBounds& bounds, const Vector& x,
                        const Vector& u);

}  // namespace cagp
