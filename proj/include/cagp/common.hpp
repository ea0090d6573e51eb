#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cagp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed arguments: dimension mismatches, invalid parameters.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failures of numerical routines (non-finite values, failed factorizations,
/// variances negative beyond tolerance).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A request that only makes sense on a bounded domain was made on an
/// unbounded one, or a point left the domain it must stay in.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Axis-aligned box { x : lower <= x <= upper }.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi);
  static Box Uniform(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool bounded() const { return lower.allFinite() && upper.allFinite(); }
  bool contains(const Vector& x, double slack = 0.0) const;
  Vector clamp(const Vector& x) const;
  /// Euclidean length of the diagonal.
  double diameter() const { return (upper - lower).norm(); }
  /// The 2^n corners, one per column.
  Matrix corners() const;
};

void RequireDim(const Vector& x, int dim, const char* what);

}  // namespace cagp
