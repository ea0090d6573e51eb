#pragma once

#include <optional>
#include <vector>

#include "cagp/common.hpp"
#include "cagp/kernel.hpp"

namespace cagp {

/// Measurements of one output dimension of ẋ.
struct Dataset {
  Matrix X;                  // N x n states
  Matrix U;                  // N x m inputs
  Vector Y;                  // N measured derivatives
  Vector prior_mean_at_data; // N prior-mean values at (X, U)

  Dataset() = default;
  Dataset(Matrix states, Matrix inputs, Vector measured, Vector prior_mean);

  int size() const { return static_cast<int>(Y.size()); }
  /// Y - mu(X, U).
  Vector residual() const { return Y - prior_mean_at_data; }
};

/// The control-affine kernel
///   k((x, u), (x', u')) = k_f(x, x') + sum_j u_j k_gj(x, x') u'_j.
/// An absent k_f or k_gj means that term is known exactly and contributes no
/// prior uncertainty.
class CompositeKernel {
 public:
  CompositeKernel(std::optional<KernelSpec> kf, std::vector<std::optional<KernelSpec>> kg,
                  int state_dim);

  int state_dim() const { return state_dim_; }
  int input_dim() const { return static_cast<int>(kg_.size()); }
  const std::optional<KernelSpec>& kf() const { return kf_; }
  const std::vector<std::optional<KernelSpec>>& kg() const { return kg_; }

  double operator()(const Vector& x, const Vector& u, const Vector& x2, const Vector& u2) const;

  /// Columns [k_f(x, X), k_g1(x, X) .* U_1, ..., k_gm(x, X) .* U_m], so that
  /// the cross-covariance at (x, u) is this matrix times [1; u].
  Matrix cross_factors(const Vector& x, const Dataset& data) const;

  /// diag(k_f(x, x), k_g1(x, x), ...): the prior variance at (x, u) is the
  /// quadratic form of this matrix in [1; u].
  Vector prior_diagonal(const Vector& x) const;

 private:
  std::optional<KernelSpec> kf_;
  std::vector<std::optional<KernelSpec>> kg_;
  int state_dim_;
};

double composite_eval(const CompositeKernel& ck, const Vector& x, const Vector& u,
                      const Vector& x2, const Vector& u2);

/// K = K_f + U_diag K_g U_diag, without jitter. Throws NumericalError on
/// non-finite entries.
Matrix build_gram(const CompositeKernel& ck, const Dataset& data);

/// Absolute jitter relative_jitter * trace(K) / N (falls back to
/// relative_jitter when the trace vanishes).
double gram_jitter(const Matrix& K, double relative_jitter);

Vector cross_covariance(const CompositeKernel& ck, const Vector& x, const Vector& u,
                        const Dataset& data);

}  // namespace cagp
