#include "cagp/composite_kernel.hpp"

namespace cagp {

Dataset::Dataset(Matrix states, Matrix inputs, Vector measured, Vector prior_mean)
    : X(std::move(states)), U(std::move(inputs)), Y(std::move(measured)),
      prior_mean_at_data(std::move(prior_mean)) {
  const auto n = Y.size();
  if (X.rows() != n || U.rows() != n || prior_mean_at_data.size() != n) {
    throw InputError("Dataset: X, U, Y and prior mean must have the same number of rows");
  }
  if (!X.allFinite() || !U.allFinite() || !Y.allFinite() || !prior_mean_at_data.allFinite()) {
    throw InputError("Dataset: non-finite entry");
  }
}

CompositeKernel::CompositeKernel(std::optional<KernelSpec> kf,
                                 std::vector<std::optional<KernelSpec>> kg, int state_dim)
    : kf_(std::move(kf)), kg_(std::move(kg)), state_dim_(state_dim) {
  if (state_dim_ < 1) throw InputError("CompositeKernel: state_dim must be positive");
}

double CompositeKernel::operator()(const Vector& x, const Vector& u, const Vector& x2,
                                   const Vector& u2) const {
  RequireDim(x, state_dim_, "CompositeKernel x");
  RequireDim(x2, state_dim_, "CompositeKernel x'");
  RequireDim(u, input_dim(), "CompositeKernel u");
  RequireDim(u2, input_dim(), "CompositeKernel u'");
  double k = kf_ ? (*kf_)(x, x2) : 0.0;
  for (int j = 0; j < input_dim(); ++j) {
    if (kg_[j]) k += u[j] * (*kg_[j])(x, x2) * u2[j];
  }
  return k;
}

Matrix CompositeKernel::cross_factors(const Vector& x, const Dataset& data) const {
  RequireDim(x, state_dim_, "cross_factors x");
  const int n = data.size();
  const int m = input_dim();
  if (n > 0 && (data.X.cols() != state_dim_ || data.U.cols() != m)) {
    throw InputError("cross_factors: dataset dimensions do not match the kernel");
  }
  Matrix phi = Matrix::Zero(n, m + 1);
  for (int p = 0; p < n; ++p) {
    const Vector xp = data.X.row(p).transpose();
    if (kf_) phi(p, 0) = (*kf_)(x, xp);
    for (int j = 0; j < m; ++j) {
      if (kg_[j]) phi(p, j + 1) = (*kg_[j])(x, xp) * data.U(p, j);
    }
  }
  return phi;
}

Vector CompositeKernel::prior_diagonal(const Vector& x) const {
  RequireDim(x, state_dim_, "prior_diagonal x");
  Vector d = Vector::Zero(input_dim() + 1);
  if (kf_) d[0] = (*kf_)(x, x);
  for (int j = 0; j < input_dim(); ++j) {
    if (kg_[j]) d[j + 1] = (*kg_[j])(x, x);
  }
  return d;
}

double composite_eval(const CompositeKernel& ck, const Vector& x, const Vector& u,
                      const Vector& x2, const Vector& u2) {
  return ck(x, u, x2, u2);
}

Matrix build_gram(const CompositeKernel& ck, const Dataset& data) {
  const int n = data.size();
  if (n < 1) throw InputError("build_gram: empty dataset");
  if (data.X.cols() != ck.state_dim() || data.U.cols() != ck.input_dim()) {
    throw InputError("build_gram: dataset dimensions do not match the kernel");
  }
  Matrix K(n, n);
  for (int p = 0; p < n; ++p) {
    const Vector xp = data.X.row(p).transpose();
    const Vector up = data.U.row(p).transpose();
    for (int q = 0; q <= p; ++q) {
      const double k = ck(xp, up, data.X.row(q).transpose(), data.U.row(q).transpose());
      K(p, q) = k;
      K(q, p) = k;
    }
  }
  if (!K.allFinite()) throw NumericalError("build_gram: non-finite Gram entry");
  return K;
}

double gram_jitter(const Matrix& K, double relative_jitter) {
  const double scale = K.rows() > 0 ? K.trace() / static_cast<double>(K.rows()) : 0.0;
  return relative_jitter * (scale > 0.0 ? scale : 1.0);
}

Vector cross_covariance(const CompositeKernel& ck, const Vector& x, const Vector& u,
                        const Dataset& data) {
  RequireDim(u, ck.input_dim(), "cross_covariance u");
  if (data.size() == 0) return Vector(0);
  Vector z(ck.input_dim() + 1);
  z << 1.0, u;
  return ck.cross_factors(x, data) * z;
}

}  // namespace cagp
