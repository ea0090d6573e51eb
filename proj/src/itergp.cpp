#include "cagp/itergp.hpp"

#include <cmath>
#include <limits>

namespace cagp {
namespace {

// Conjugacy drift beyond which S'KS is treated as dense.
constexpr double kConjugacyDrift = 1e-6;

}  // namespace

SolverBelief::SolverBelief(Matrix K, Vector target, double jitter)
    : K_(std::move(K)), target_(std::move(target)), breakdown_floor_(0.1 * jitter) {
  if (K_.rows() != K_.cols() || K_.rows() != target_.size()) {
    throw InputError("SolverBelief: K must be square and match the target length");
  }
  if (!K_.allFinite() || !target_.allFinite()) {
    throw NumericalError("SolverBelief: non-finite system");
  }
  const int n = size();
  weights_ = Vector::Zero(n);
  residual_ = target_;
  directions_.resize(n, 0);
  projected_.resize(0, 0);
}

double SolverBelief::conjugacy_error() const {
  double worst = 0.0;
  for (int p = 0; p < iteration(); ++p) {
    for (int q = 0; q < p; ++q) {
      const double scale = std::sqrt(projected_(p, p) * projected_(q, q));
      worst = std::max(worst, std::abs(projected_(p, q)) / scale);
    }
  }
  return worst;
}

Matrix SolverBelief::c_factor() const {
  const int i = iteration();
  if (i == 0) return Matrix::Zero(size(), 0);
  if (diagonal_) {
    return directions_ * projected_.diagonal().cwiseSqrt().cwiseInverse().asDiagonal();
  }
  // Factor the unit-diagonal form; curvatures can span many decades.
  const Vector d = projected_.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::LLT<Matrix> llt(d.asDiagonal() * projected_ * d.asDiagonal());
  if (llt.info() != Eigen::Success) {
    throw NumericalError("SolverBelief: S'KS is not positive definite");
  }
  const Matrix rinv_st = llt.matrixL().solve((directions_ * d.asDiagonal()).transpose());
  return rinv_st.transpose();
}

void SolverBelief::step() {
  const int i = iteration();
  if (i >= size()) throw InputError("cg_step: all N directions already used");

  // A residual at rounding level carries no direction; stepping on it would
  // append noise to S.
  const double rounding = 8.0 * std::numeric_limits<double>::epsilon() *
                          (target_.norm() + K_.norm() * weights_.norm());
  if (residual_.norm() <= rounding) {
    throw SolverBreakdown("cg_step: residual at rounding level before iteration " +
                              std::to_string(i + 1),
                          *this);
  }

  Vector s = residual_;
  if (i > 0 && last_rr_ > 0.0) {
    s += (residual_.squaredNorm() / last_rr_) * directions_.col(i - 1);
  }
  // Two passes of K-orthogonalization against all previous directions keep
  // the directions conjugate in floating point.
  for (int pass = 0; pass < 2; ++pass) {
    const Vector ks = K_ * s;
    for (int j = 0; j < i; ++j) {
      s -= directions_.col(j) * (directions_.col(j).dot(ks) / projected_(j, j));
    }
  }

  const Vector ks = K_ * s;
  const double curvature = s.dot(ks);
  const double s2 = s.squaredNorm();
  if (!std::isfinite(curvature) || s2 == 0.0 || curvature <= breakdown_floor_ * s2) {
    throw SolverBreakdown("cg_step: degenerate search direction at iteration " +
                              std::to_string(i + 1),
                          *this);
  }

  const double alpha = s.dot(residual_) / curvature;
  last_rr_ = residual_.squaredNorm();
  weights_ += alpha * s;
  residual_ = target_ - K_ * weights_;

  const Vector cross = directions_.transpose() * ks;
  directions_.conservativeResize(Eigen::NoChange, i + 1);
  directions_.col(i) = s;
  projected_.conservativeResize(i + 1, i + 1);
  projected_.row(i).head(i) = cross.transpose();
  projected_.col(i).head(i) = cross;
  projected_(i, i) = curvature;
  refactor();
}

void SolverBelief::refactor() {
  if (diagonal_ && conjugacy_error() > kConjugacyDrift) diagonal_ = false;
}

SolverBelief cg_step(SolverBelief belief) {
  belief.step();
  return belief;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kMaxIterations:
      return "max_iterations";
    case StopReason::kResidualTolerance:
      return "residual_tolerance";
    case StopReason::kExhausted:
      return "exhausted";
  }
  return "unknown";
}

SolverRun run_solver(const Matrix& K, const Vector& target, int max_iters,
                     double residual_tol, double jitter) {
  if (max_iters < 0) throw InputError("run_solver: max_iters must be nonnegative");
  SolverBelief belief(K, target, jitter);
  const int limit = std::min(max_iters, belief.size());
  const double threshold = residual_tol * target.norm();
  while (true) {
    if (belief.residual().norm() <= threshold) {
      return {std::move(belief), StopReason::kResidualTolerance};
    }
    if (belief.iteration() >= limit) break;
    belief.step();
  }
  const StopReason reason =
      belief.iteration() == belief.size() ? StopReason::kExhausted : StopReason::kMaxIterations;
  return {std::move(belief), reason};
}

double AffineMean::operator()(const Vector& x, const Vector& u) const {
  double value = drift ? drift(x) : 0.0;
  if (input_gain) value += input_gain(x).dot(u);
  return value;
}

AffineMean AffineMean::Zero(int input_dim) {
  return {[](const Vector&) { return 0.0; },
          [input_dim](const Vector&) { return Vector(Vector::Zero(input_dim)); }};
}

std::string to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::kCombined:
      return "combined";
    case VarianceMode::kMath:
      return "math";
    case VarianceMode::kComp:
      return "comp";
  }
  return "unknown";
}

double AffineQuery::mean(const Vector& u) const { return mean_offset + mean_slope.dot(u); }

double AffineQuery::variance(const Vector& u, VarianceMode mode) const {
  Vector z(u.size() + 1);
  z << 1.0, u;
  const Matrix* q = &combined;
  if (mode == VarianceMode::kMath) q = &math;
  if (mode == VarianceMode::kComp) q = &comp;
  if (q->size() == 0) throw InputError("AffineQuery: variance split not available");
  return clamp_variance(z.dot(*q * z));
}

double clamp_variance(double value, double tol) {
  if (!std::isfinite(value)) throw NumericalError("variance is not finite");
  if (value >= 0.0) return value;
  if (value >= -tol) return 0.0;
  throw NumericalError("variance " + std::to_string(value) +
                       " is negative beyond tolerance (ill-conditioned Gram matrix)");
}

GpPosterior::GpPosterior(CompositeKernel kernel, Dataset data, AffineMean prior, Vector weights,
                         Matrix c_factor, int iteration, double jitter, bool with_split)
    : kernel_(std::move(kernel)), data_(std::move(data)), prior_(std::move(prior)),
      weights_(std::move(weights)), c_factor_(std::move(c_factor)), iteration_(iteration),
      jitter_(jitter) {
  const int n = data_.size();
  if (weights_.size() != n || c_factor_.rows() != n) {
    throw InputError("GpPosterior: weights and C factor must match the dataset size");
  }
  if (with_split && n > 0) {
    Matrix K = build_gram(kernel_, data_);
    K.diagonal().array() += jitter_;
    chol_.emplace(K);
    if (chol_->info() != Eigen::Success) {
      throw NumericalError("GpPosterior: Cholesky factorization failed");
    }
  } else if (with_split) {
    chol_.emplace(Matrix(0, 0));
  }
}

double GpPosterior::mean(const Vector& x, const Vector& u) const {
  RequireDim(u, kernel_.input_dim(), "GpPosterior::mean u");
  double value = prior_(x, u);
  if (data_.size() > 0) value += cross_covariance(kernel_, x, u, data_).dot(weights_);
  return value;
}

double GpPosterior::variance(const Vector& x, const Vector& u, VarianceMode mode) const {
  RequireDim(u, kernel_.input_dim(), "GpPosterior::variance u");
  if (mode != VarianceMode::kCombined && !has_split()) {
    throw InputError("GpPosterior: math/comp split requested but K^-1 was not computed");
  }
  Vector z(u.size() + 1);
  z << 1.0, u;
  const double prior = z.dot(kernel_.prior_diagonal(x).asDiagonal() * z);
  if (data_.size() == 0) return mode == VarianceMode::kComp ? 0.0 : clamp_variance(prior);
  const Vector c = cross_covariance(kernel_, x, u, data_);
  const double quad_c = (c_factor_.transpose() * c).squaredNorm();
  if (mode == VarianceMode::kCombined) return clamp_variance(prior - quad_c);
  const double quad_inv = chol_->matrixL().solve(c).squaredNorm();
  if (mode == VarianceMode::kMath) return clamp_variance(prior - quad_inv);
  return clamp_variance(quad_inv - quad_c);
}

AffineQuery GpPosterior::affine(const Vector& x) const {
  const int m = kernel_.input_dim();
  AffineQuery q;
  q.mean_offset = prior_.drift ? prior_.drift(x) : 0.0;
  q.mean_slope = prior_.input_gain ? prior_.input_gain(x) : Vector(Vector::Zero(m));
  RequireDim(q.mean_slope, m, "AffineMean input gain");
  q.prior = kernel_.prior_diagonal(x).asDiagonal();
  if (data_.size() == 0) {
    q.combined = q.prior;
    if (has_split()) {
      q.math = q.prior;
      q.comp = Matrix::Zero(m + 1, m + 1);
    }
    return q;
  }
  const Matrix phi = kernel_.cross_factors(x, data_);
  const Vector mean_terms = phi.transpose() * weights_;
  q.mean_offset += mean_terms[0];
  q.mean_slope += mean_terms.tail(m);
  const Matrix g = c_factor_.transpose() * phi;
  const Matrix gram_c = g.transpose() * g;
  q.combined = q.prior - gram_c;
  if (has_split()) {
    const Matrix h = chol_->matrixL().solve(phi);
    const Matrix gram_inv = h.transpose() * h;
    q.math = q.prior - gram_inv;
    q.comp = gram_inv - gram_c;
  }
  return q;
}

GpPosterior iterative_posterior(const CompositeKernel& kernel, const Dataset& data,
                                const AffineMean& prior, int iterations, bool with_split,
                                double relative_jitter) {
  const int n = data.size();
  if (iterations < 0 || iterations > n) {
    throw InputError("iterative_posterior: iterations must lie in [0, N]");
  }
  if (n == 0) {
    return GpPosterior(kernel, data, prior, Vector(0), Matrix(0, 0), 0, 0.0, with_split);
  }
  Matrix K = build_gram(kernel, data);
  const double jitter = gram_jitter(K, relative_jitter);
  K.diagonal().array() += jitter;
  // A breakdown means the remaining residual lies in the numerical null space
  // of K; the partial belief is the best available answer.
  SolverBelief belief(K, data.residual(), jitter);
  try {
    belief = run_solver(K, data.residual(), iterations, 0.0, jitter).belief;
  } catch (const SolverBreakdown& e) {
    belief = e.partial();
  }
  return GpPosterior(kernel, data, prior, belief.weights(), belief.c_factor(),
                     belief.iteration(), jitter, with_split);
}

GpPosterior direct_posterior(const CompositeKernel& kernel, const Dataset& data,
                             const AffineMean& prior, double relative_jitter) {
  const int n = data.size();
  if (n < 1) throw InputError("direct_posterior: empty dataset");
  Matrix K = build_gram(kernel, data);
  const double jitter = gram_jitter(K, relative_jitter);
  K.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("direct_posterior: Cholesky factorization failed");
  }
  const Vector weights = llt.solve(data.residual());
  const Matrix linv = llt.matrixL().solve(Matrix::Identity(n, n));
  return GpPosterior(kernel, data, prior, weights, linv.transpose(), n, jitter, true);
}

double worst_case_bound(const GpPosterior& post, const RkhsBounds& bounds, const Vector& x,
                        const Vector& u) {
  return bounds.B_fg * std::sqrt(post.variance(x, u, VarianceMode::kCombined));
}

}  // namespace cagp
