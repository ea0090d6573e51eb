#include "cagp/kernel.hpp"

#include <cmath>
#include <sstream>

namespace cagp {
namespace {

constexpr double kSqrt5 = 2.23606797749978969640;
// Maximiser of a(1 + a)exp(-a), the golden ratio.
constexpr double kMaternPeak = 1.61803398874989484820;

void RequirePositive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError(std::string("KernelSpec: ") + what + " must be positive and finite");
  }
}

bool ContainsLinear(const KernelSpec& spec) {
  switch (spec.kind()) {
    case KernelSpec::Kind::kLinear:
      return true;
    case KernelSpec::Kind::kProduct:
    case KernelSpec::Kind::kSum:
      return ContainsLinear(spec.left()) || ContainsLinear(spec.right());
    case KernelSpec::Kind::kScaled:
      return ContainsLinear(spec.left());
    default:
      return false;
  }
}

double MaxCornerNorm(const Box& box) {
  const Matrix c = box.corners();
  return c.colwise().norm().maxCoeff();
}

KernelBounds ClosedFormBounds(const KernelSpec& spec, const Box& domain) {
  switch (spec.kind()) {
    case KernelSpec::Kind::kSquaredExponential:
      return {spec.variance(), spec.variance() * std::exp(-0.5) / spec.lengthscale()};
    case KernelSpec::Kind::kMatern52: {
      const double a = kMaternPeak;
      const double slope = kSqrt5 / spec.lengthscale() * a * (1.0 + a) * std::exp(-a) / 3.0;
      return {spec.variance(), spec.variance() * slope};
    }
    case KernelSpec::Kind::kLinear: {
      const double r = MaxCornerNorm(domain);
      return {spec.variance() * r * r, spec.variance() * r};
    }
    case KernelSpec::Kind::kConstant:
      return {spec.variance(), 0.0};
    default:
      break;
  }
  throw InputError("ClosedFormBounds: not a base kernel");
}

// Sound but loose: |k1 k2| <= |k1||k2|, |d(k1 k2)| <= |dk1||k2| + |k1||dk2|.
KernelBounds CompositionBounds(const KernelSpec& spec, const Box& domain) {
  if (!spec.is_compound()) return ClosedFormBounds(spec, domain);
  const KernelBounds l = CompositionBounds(spec.left(), domain);
  switch (spec.kind()) {
    case KernelSpec::Kind::kScaled:
      return {spec.factor() * l.sup_k, spec.factor() * l.sup_dk};
    case KernelSpec::Kind::kSum: {
      const KernelBounds r = CompositionBounds(spec.right(), domain);
      return {l.sup_k + r.sup_k, l.sup_dk + r.sup_dk};
    }
    case KernelSpec::Kind::kProduct: {
      const KernelBounds r = CompositionBounds(spec.right(), domain);
      return {l.sup_k * r.sup_k, l.sup_dk * r.sup_k + l.sup_k * r.sup_dk};
    }
    default:
      break;
  }
  throw InputError("CompositionBounds: unexpected kernel kind");
}

// Index -> grid point for a tensor grid with `per_dim` points per axis.
Vector GridPoint(const Box& box, long index, int per_dim) {
  const int n = box.dim();
  Vector x(n);
  for (int i = 0; i < n; ++i) {
    const long k = index % per_dim;
    index /= per_dim;
    const double t = per_dim == 1 ? 0.5 : static_cast<double>(k) / (per_dim - 1);
    x[i] = box.lower[i] + t * (box.upper[i] - box.lower[i]);
  }
  return x;
}

}  // namespace

KernelSpec KernelSpec::SquaredExponential(double variance, double lengthscale) {
  RequirePositive(variance, "variance");
  RequirePositive(lengthscale, "lengthscale");
  KernelSpec k;
  k.kind_ = Kind::kSquaredExponential;
  k.variance_ = variance;
  k.lengthscale_ = lengthscale;
  return k;
}

KernelSpec KernelSpec::Matern52(double variance, double lengthscale) {
  KernelSpec k = SquaredExponential(variance, lengthscale);
  k.kind_ = Kind::kMatern52;
  return k;
}

KernelSpec KernelSpec::Linear(double variance) {
  RequirePositive(variance, "variance");
  KernelSpec k;
  k.kind_ = Kind::kLinear;
  k.variance_ = variance;
  return k;
}

KernelSpec KernelSpec::Constant(double variance) {
  KernelSpec k = Linear(variance);
  k.kind_ = Kind::kConstant;
  return k;
}

KernelSpec KernelSpec::Product(const KernelSpec& left, const KernelSpec& right) {
  KernelSpec k;
  k.kind_ = Kind::kProduct;
  k.left_ = std::make_shared<const KernelSpec>(left);
  k.right_ = std::make_shared<const KernelSpec>(right);
  return k;
}

KernelSpec KernelSpec::Sum(const KernelSpec& left, const KernelSpec& right) {
  KernelSpec k = Product(left, right);
  k.kind_ = Kind::kSum;
  return k;
}

KernelSpec KernelSpec::Scaled(const KernelSpec& base, double factor) {
  RequirePositive(factor, "factor");
  KernelSpec k;
  k.kind_ = Kind::kScaled;
  k.factor_ = factor;
  k.left_ = std::make_shared<const KernelSpec>(base);
  return k;
}

const KernelSpec& KernelSpec::left() const {
  if (!left_) throw InputError("KernelSpec::left: base kernel has no children");
  return *left_;
}

const KernelSpec& KernelSpec::right() const {
  if (!right_) throw InputError("KernelSpec::right: kernel has no right child");
  return *right_;
}

bool KernelSpec::is_compound() const {
  return kind_ == Kind::kProduct || kind_ == Kind::kSum || kind_ == Kind::kScaled;
}

double KernelSpec::operator()(const Vector& x, const Vector& y) const {
  switch (kind_) {
    case Kind::kSquaredExponential: {
      const double r2 = (x - y).squaredNorm();
      return variance_ * std::exp(-0.5 * r2 / (lengthscale_ * lengthscale_));
    }
    case Kind::kMatern52: {
      const double a = kSqrt5 * (x - y).norm() / lengthscale_;
      return variance_ * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    case Kind::kLinear:
      return variance_ * x.dot(y);
    case Kind::kConstant:
      return variance_;
    case Kind::kProduct:
      return (*left_)(x, y) * (*right_)(x, y);
    case Kind::kSum:
      return (*left_)(x, y) + (*right_)(x, y);
    case Kind::kScaled:
      return factor_ * (*left_)(x, y);
  }
  return 0.0;
}

Vector KernelSpec::gradient(const Vector& x, const Vector& y) const {
  switch (kind_) {
    case Kind::kSquaredExponential: {
      const double l2 = lengthscale_ * lengthscale_;
      return -(*this)(x, y) / l2 * (x - y);
    }
    case Kind::kMatern52: {
      const Vector diff = x - y;
      const double r = diff.norm();
      if (r == 0.0) return Vector::Zero(x.size());
      const double a = kSqrt5 * r / lengthscale_;
      // dk/dr = -variance * (sqrt5 / l) * a (1 + a) / 3 * exp(-a)
      const double dkdr = -variance_ * kSqrt5 / lengthscale_ * a * (1.0 + a) / 3.0 * std::exp(-a);
      return dkdr / r * diff;
    }
    case Kind::kLinear:
      return variance_ * y;
    case Kind::kConstant:
      return Vector::Zero(x.size());
    case Kind::kProduct:
      return left_->gradient(x, y) * (*right_)(x, y) + (*left_)(x, y) * right_->gradient(x, y);
    case Kind::kSum:
      return left_->gradient(x, y) + right_->gradient(x, y);
    case Kind::kScaled:
      return factor_ * left_->gradient(x, y);
  }
  return Vector::Zero(x.size());
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kSquaredExponential:
      os << "squared_exponential(" << variance_ << ", " << lengthscale_ << ")";
      break;
    case Kind::kMatern52:
      os << "matern52(" << variance_ << ", " << lengthscale_ << ")";
      break;
    case Kind::kLinear:
      os << "linear(" << variance_ << ")";
      break;
    case Kind::kConstant:
      os << "constant(" << variance_ << ")";
      break;
    case Kind::kProduct:
      os << "product(" << left_->describe() << ", " << right_->describe() << ")";
      break;
    case Kind::kSum:
      os << "sum(" << left_->describe() << ", " << right_->describe() << ")";
      break;
    case Kind::kScaled:
      os << "scaled(" << left_->describe() << ", " << factor_ << ")";
      break;
  }
  return os.str();
}

double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw InputError("eval_kernel: points have dimensions " + std::to_string(x.size()) +
                     " and " + std::to_string(y.size()));
  }
  return spec(x, y);
}

KernelBounds kernel_bounds(const KernelSpec& spec, const Box& domain, int grid_points_per_dim) {
  if (ContainsLinear(spec) && !domain.bounded()) {
    throw DomainError("kernel_bounds: dot-product kernel is unbounded on an unbounded domain");
  }
  if (!spec.is_compound()) return ClosedFormBounds(spec, domain);
  if (!domain.bounded() || grid_points_per_dim < 2) return CompositionBounds(spec, domain);

  const int n = domain.dim();
  const double pairs = std::pow(static_cast<double>(grid_points_per_dim), 2.0 * n);
  constexpr double kMaxPairs = 4.2e6;
  if (pairs > kMaxPairs) return CompositionBounds(spec, domain);

  const long count = static_cast<long>(std::llround(std::pow(grid_points_per_dim, n)));
  std::vector<Vector> points;
  points.reserve(count);
  for (long i = 0; i < count; ++i) points.push_back(GridPoint(domain, i, grid_points_per_dim));

  KernelBounds out;
  for (const Vector& x : points) {
    for (const Vector& y : points) {
      out.sup_k = std::max(out.sup_k, std::abs(spec(x, y)));
      out.sup_dk = std::max(out.sup_dk, spec.gradient(x, y).norm());
    }
  }
  constexpr double kInflation = 1.05;
  out.sup_k *= kInflation;
  out.sup_dk *= kInflation;
  return out;
}

}  // namespace cagp
