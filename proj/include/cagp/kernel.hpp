#pragma once

#include <memory>
#include <string>

#include "cagp/common.hpp"

namespace cagp {

/// A positive semi-definite kernel k(x, x') built from a small algebra of
/// stationary and dot-product base kernels. Values are immutable; children of
/// compound kernels are shared.
class KernelSpec {
 public:
  enum class Kind { kSquaredExponential, kMatern52, kLinear, kConstant, kProduct, kSum, kScaled };

  static KernelSpec SquaredExponential(double variance, double lengthscale);
  /// Matérn with smoothness 5/2.
  static KernelSpec Matern52(double variance, double lengthscale);
  /// k(x, x') = variance * <x, x'>.
  static KernelSpec Linear(double variance);
  /// k(x, x') = variance. Models an unknown constant.
  static KernelSpec Constant(double variance);
  static KernelSpec Product(const KernelSpec& left, const KernelSpec& right);
  static KernelSpec Sum(const KernelSpec& left, const KernelSpec& right);
  static KernelSpec Scaled(const KernelSpec& base, double factor);

  Kind kind() const { return kind_; }
  double variance() const { return variance_; }
  double lengthscale() const { return lengthscale_; }
  double factor() const { return factor_; }
  const KernelSpec& left() const;
  const KernelSpec& right() const;
  bool is_compound() const;

  double operator()(const Vector& x, const Vector& y) const;
  /// Gradient with respect to the first argument.
  Vector gradient(const Vector& x, const Vector& y) const;

  /// Compact textual form, e.g. "product(linear(1), matern52(1, 0.5))".
  std::string describe() const;

 private:
  KernelSpec() = default;

  Kind kind_ = Kind::kSquaredExponential;
  double variance_ = 1.0;
  double lengthscale_ = 1.0;
  double factor_ = 1.0;
  std::shared_ptr<const KernelSpec> left_;
  std::shared_ptr<const KernelSpec> right_;
};

/// Sup-norms of a kernel and of its first-argument gradient over a box.
struct KernelBounds {
  double sup_k = 0.0;
  double sup_dk = 0.0;
};

/// k(x, x'); throws InputError on dimension mismatch.
double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& y);

/// Upper bounds on sup|k| and sup||dk/dx|| for x, x' in the box. Base kernels
/// use closed forms. Compound kernels are evaluated on a dense grid of pairs
/// (inflated by 5%) when the pair grid is small enough, otherwise bounded by
/// the product and sum rules applied to their children.
KernelBounds kernel_bounds(const KernelSpec& spec, const Box& domain,
                           int grid_points_per_dim = 512);

}  // namespace cagp
