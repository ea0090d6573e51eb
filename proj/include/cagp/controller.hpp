#pragma once

#include <memory>

#include "cagp/common.hpp"
#include "cagp/dynamics.hpp"
#include "cagp/socp.hpp"
#include "cagp/stability.hpp"

namespace cagp {

struct LqrResult {
  Matrix K;  // u = -K x
  Matrix P;  // Riccati solution, V(x) = x' P x
  double residual = 0.0;
};

/// Continuous-time LQR. The Riccati equation is solved from the stable
/// invariant subspace of the Hamiltonian and polished by Newton-Kleinman
/// steps. Throws InputError when (A, B) is not stabilizable.
LqrResult lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

/// |A'P + PA - P B R^-1 B' P + Q| (max abs entry).
double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const Matrix& P);

/// u = clamp(-K x) to the box.
Policy linear_feedback(Matrix K, Box input_box);

struct ControllerSettings {
  Awareness awareness = Awareness::kAware;
  BoundMode bound_mode = BoundMode::kSplit;
  Matrix W;  // empty means identity
  double p = 1e4;
  double lambda = 1.0;
  Box input_box;
};

/// Assembles the min-norm problem at x from the learned model: alpha0 and
/// beta from the affine posterior mean, one cone per learned output and
/// uncertainty kind with A'A = (B_d |dV/dx_d|)^2 Q_d. Agnostic mode keeps only
/// the mathematical cones.
SocpInstance build_socp_constraint(const LearnedModel& model, const LyapunovFunction& lyap,
                                   const Vector& x, const ControllerSettings& settings);

/// Symmetric factor A with A'A = Q, eigenvalues clamped at zero within
/// tol * max(1, |Q|). Throws NumericalError for more negative eigenvalues.
Matrix psd_factor(const Matrix& Q, double tol = 1e-8);

/// Min-norm input for the nominal model: SOCP without cones, hard
/// constraint unless `slack` is set.
SocpSolution solve_clf_qp(const NominalModel& nominal, const LyapunovFunction& lyap,
                          const Vector& x, const ControllerSettings& settings, bool slack = false);

struct ExplicitControl {
  Vector u;
  double a = 0.0;
  Vector b;
  /// a + b'u; equals -sqrt(a^2 + |b|^4) by construction.
  double certificate = 0.0;
};

/// u = -((a + sqrt(a^2 + |b|^4)) / |b|^2) b with
///   a = dV/dx mu_i(x, 0) + sum_d |dV/dx_d| B_d (sigma_comp + sigma_math),
///   b = g_hat(x)' dV/dx'.
/// Requires every input column to be known (no k_g). When |b| is below
/// `threshold` the input is zero if a < 0, otherwise DomainError.
ExplicitControl explicit_policy(const LearnedModel& model, const LyapunovFunction& lyap,
                                const Vector& x, Awareness awareness, BoundMode mode,
                                double threshold = 1e-8);

/// Policy wrappers for simulation.
Policy socp_policy(std::shared_ptr<const LearnedModel> model,
                   std::shared_ptr<const LyapunovFunction> lyap, ControllerSettings settings);
Policy explicit_feedback(std::shared_ptr<const LearnedModel> model,
                         std::shared_ptr<const LyapunovFunction> lyap, Awareness awareness,
                         BoundMode mode);

}  // namespace cagp
