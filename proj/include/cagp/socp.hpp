#pragma once

#include <string>
#include <vector>

#include "cagp/common.hpp"

namespace cagp {

/// min u'Wu + p d^2  s.t.  alpha0 + beta'u + sum_k |A_k [1; u]| + lambda V <= d,
///                          u in the input box.
/// With `hard` set, d is fixed to zero and the constraint must hold exactly.
struct SocpInstance {
  Matrix W;
  double p = 1e4;
  double lambda = 1.0;
  double lyapunov_value = 0.0;
  double alpha0 = 0.0;
  Vector beta;
  /// Cone factors of shape r x (m+1); sigma_k(u) = |A_k [1; u]|.
  std::vector<Matrix> cones;
  Box input_box;
  bool hard = false;

  int input_dim() const { return static_cast<int>(beta.size()); }
  /// Left side of the decrease constraint at u (without d).
  double constraint(const Vector& u) const;
  /// u'Wu + p max(0, constraint(u))^2: the objective with d eliminated.
  double reduced_objective(const Vector& u) const;
  void validate() const;
};

enum class SocpStatus { kOptimal, kInfeasible, kMaxIterations };
std::string to_string(SocpStatus s);

struct SocpSolution {
  Vector u;
  double d = 0.0;
  double objective = 0.0;
  SocpStatus status = SocpStatus::kOptimal;
  int newton_steps = 0;
  /// Duality-gap bound at termination.
  double gap = 0.0;
};

struct SocpOptions {
  int max_newton_steps = 100;  // per centering
  double mu_reduction = 0.2;
  double tolerance = 1e-8;
};

/// Log-barrier interior-point method on the epigraph form
///   variables (u, d, t_1..t_K), cones |A_k [1; u]| <= t_k,
///   linear row alpha0 + beta'u + sum t_k + lambda V - d <= 0, box rows.
SocpSolution solve_min_norm_socp(const SocpInstance& inst, const SocpOptions& options = {});

/// Exhaustive multi-resolution grid search over the input box (tests only).
/// The reduced objective is convex, so zooming on the best cell is exact up
/// to the final resolution.
SocpSolution brute_force_min_norm(const SocpInstance& inst, double resolution);

}  // namespace cagp
