#include "cagp/common.hpp"

namespace cagp {

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw InputError("Box: lower and upper have different dimensions");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw InputError("Box: lower bound exceeds upper bound in coordinate " +
                       std::to_string(i));
    }
  }
}

Box Box::Uniform(int dim, double lo, double hi) {
  return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Box::contains(const Vector& x, double slack) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
  }
  return true;
}

Vector Box::clamp(const Vector& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

Matrix Box::corners() const {
  const int n = dim();
  const int count = 1 << n;
  Matrix out(n, count);
  for (int c = 0; c < count; ++c) {
    for (int i = 0; i < n; ++i) {
      out(i, c) = (c >> i) & 1 ? upper[i] : lower[i];
    }
  }
  return out;
}

void RequireDim(const Vector& x, int dim, const char* what) {
  if (x.size() != dim) {
    throw InputError(std::string(what) + ": expected dimension " +
                     std::to_string(dim) + ", got " +
                     std::to_string(x.size()));
  }
}

}  // namespace cagp
