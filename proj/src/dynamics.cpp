#include "cagp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cagp {

Vector ControlAffineSystem::operator()(const Vector& x, const Vector& u) const {
  RequireDim(x, n, "ControlAffineSystem x");
  RequireDim(u, m, "ControlAffineSystem u");
  return f(x) + g(x) * u;
}

void ControlAffineSystem::check_equilibrium(double tol) const {
  const Vector f0 = f(Vector::Zero(n));
  if (f0.norm() > tol) throw InputError(label + ": f(0) != 0, origin is not an equilibrium");
  if (!input_set.contains(Vector::Zero(m))) throw InputError(label + ": input set excludes 0");
  const Matrix g0 = g(Vector::Zero(n));
  if (!g0.allFinite()) throw InputError(label + ": g(0) is not finite");
}

Vector NominalModel::operator()(const Vector& x, const Vector& u) const {
  return f_hat(x) + g_hat(x) * u;
}

AffineMean NominalModel::output(int d) const {
  return {[f = f_hat, d](const Vector& x) { return f(x)[d]; },
          [g = g_hat, d](const Vector& x) { return Vector(g(x).row(d).transpose()); }};
}

Vector step_rk4(const ControlAffineSystem& sys, const Vector& x, const Vector& u, double dt) {
  if (!(dt > 0.0)) throw InputError("step_rk4: dt must be positive");
  const Vector k1 = sys(x, u);
  const Vector k2 = sys(x + 0.5 * dt * k1, u);
  const Vector k3 = sys(x + 0.5 * dt * k2, u);
  const Vector k4 = sys(x + dt * k3, u);
  if (!k1.allFinite() || !k2.allFinite() || !k3.allFinite() || !k4.allFinite()) {
    throw NumericalError("step_rk4: non-finite derivative");
  }
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory simulate(const ControlAffineSystem& sys, const Policy& policy, const Vector& x0,
                    const SimulationOptions& options) {
  RequireDim(x0, sys.n, "simulate x0");
  if (!(options.dt > 0.0) || !(options.horizon >= 0.0)) {
    throw InputError("simulate: dt must be positive and horizon nonnegative");
  }
  double radius = options.divergence_radius;
  if (radius <= 0.0) {
    radius = sys.state_domain.bounded() ? 10.0 * sys.state_domain.diameter()
                                        : std::numeric_limits<double>::infinity();
  }
  const auto steps = static_cast<long>(std::llround(options.horizon / options.dt));
  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps + 1);

  Vector x = x0;
  for (long k = 0;; ++k) {
    Vector u = policy(x);
    RequireDim(u, sys.m, "policy output");
    if (options.clip_inputs && sys.input_set.dim() == sys.m) u = sys.input_set.clamp(u);
    traj.times.push_back(static_cast<double>(k) * options.dt);
    traj.states.push_back(x);
    traj.inputs.push_back(u);
    if (k == steps) break;
    if (x.norm() > radius) {
      traj.diverged = true;
      break;
    }
    if (options.stop_radius > 0.0 && x.norm() < options.stop_radius) break;
    x = step_rk4(sys, x, u, options.dt);
  }
  return traj;
}

GpSample::GpSample(KernelSpec kernel, Matrix centers, Vector alpha)
    : kernel_(std::move(kernel)), centers_(std::move(centers)), alpha_(std::move(alpha)) {
  if (centers_.rows() != alpha_.size()) {
    throw InputError("GpSample: one weight per center required");
  }
  double sq = 0.0;
  for (int p = 0; p < centers_.rows(); ++p) {
    for (int q = 0; q < centers_.rows(); ++q) {
      sq += alpha_[p] * alpha_[q] *
            kernel_(centers_.row(p).transpose(), centers_.row(q).transpose());
    }
  }
  rkhs_norm_ = std::sqrt(std::max(sq, 0.0));
}

GpSample GpSample::Zero(KernelSpec kernel, int dim) {
  return GpSample(std::move(kernel), Matrix(0, dim), Vector(0));
}

double GpSample::operator()(const Vector& x) const {
  double value = 0.0;
  for (int p = 0; p < centers_.rows(); ++p) {
    value += alpha_[p] * kernel_(x, centers_.row(p).transpose());
  }
  return value;
}

Vector GpSample::gradient(const Vector& x) const {
  Vector grad = Vector::Zero(x.size());
  for (int p = 0; p < centers_.rows(); ++p) {
    grad += alpha_[p] * kernel_.gradient(x, centers_.row(p).transpose());
  }
  return grad;
}

namespace {

Matrix GramOf(const KernelSpec& kernel, const Matrix& a, const Matrix& b) {
  Matrix K(a.rows(), b.rows());
  for (int p = 0; p < a.rows(); ++p) {
    for (int q = 0; q < b.rows(); ++q) {
      K(p, q) = kernel(a.row(p).transpose(), b.row(q).transpose());
    }
  }
  return K;
}

// Symmetric square root through the eigendecomposition; tolerates the
// semidefinite covariances that conditioning produces.
Matrix PsdSqrt(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("sample_gp_function: eig failed");
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

GpSample sample_gp_function(const KernelSpec& kernel, const Matrix& grid, std::uint64_t seed,
                            double amplitude, const std::optional<SamplePins>& pins) {
  if (amplitude < 0.0) throw InputError("sample_gp_function: amplitude must be nonnegative");
  const int m = static_cast<int>(grid.rows());
  const int dim = static_cast<int>(grid.cols());
  const int p = pins ? static_cast<int>(pins->points.rows()) : 0;
  if (pins && (pins->points.cols() != dim || pins->values.size() != p)) {
    throw InputError("sample_gp_function: pins do not match the grid dimension");
  }

  Matrix centers(p + m, dim);
  if (p > 0) centers.topRows(p) = pins->points;
  centers.bottomRows(m) = grid;

  Matrix K = GramOf(kernel, centers, centers);
  const double jitter = gram_jitter(K, 1e-10);
  K.diagonal().array() += jitter;

  Vector mean = Vector::Zero(m);
  Matrix cov = K.bottomRightCorner(m, m);
  if (p > 0) {
    Eigen::LDLT<Matrix> kpp(K.topLeftCorner(p, p));
    const Matrix kgp = K.bottomLeftCorner(m, p);
    mean = kgp * kpp.solve(pins->values);
    cov -= kgp * kpp.solve(kgp.transpose());
    cov = 0.5 * (cov + cov.transpose());
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(m);
  for (int i = 0; i < m; ++i) z[i] = normal(rng);

  Vector values(p + m);
  if (p > 0) values.head(p) = pins->values;
  values.tail(m) = mean + amplitude * (PsdSqrt(cov) * z);

  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("sample_gp_function: Gram factorization failed");
  }
  return GpSample(kernel, centers, llt.solve(values));
}

Matrix linspace_grid(double lo, double hi, int count) {
  if (count < 1) throw InputError("linspace_grid: count must be positive");
  Matrix out(count, 1);
  out.col(0) = count == 1 ? Vector::Constant(1, 0.5 * (lo + hi))
                          : Vector(Vector::LinSpaced(count, lo, hi));
  return out;
}

std::vector<Dataset> collect_measurements(const ControlAffineSystem& sys,
                                          const NominalModel& nominal, const Matrix& X,
                                          const Matrix& U) {
  if (X.rows() != U.rows() || X.cols() != sys.n || U.cols() != sys.m) {
    throw InputError("collect_measurements: X must be N x n and U N x m");
  }
  const auto count = X.rows();
  Matrix Y(count, sys.n);
  Matrix M(count, sys.n);
  for (int p = 0; p < count; ++p) {
    const Vector x = X.row(p).transpose();
    const Vector u = U.row(p).transpose();
    Y.row(p) = sys(x, u).transpose();
    M.row(p) = nominal(x, u).transpose();
  }
  std::vector<Dataset> out;
  out.reserve(sys.n);
  for (int d = 0; d < sys.n; ++d) out.emplace_back(X, U, Y.col(d), M.col(d));
  return out;
}

ControlAffineSystem make_pendulum(const PendulumParams& params, const Box& state_domain,
                                  const Box& input_set) {
  if (!(params.mass > 0.0) || !(params.length > 0.0) || params.friction < 0.0) {
    throw InputError("make_pendulum: need mass > 0, length > 0, friction >= 0");
  }
  const double inertia = params.mass * params.length * params.length;
  ControlAffineSystem sys;
  sys.n = 2;
  sys.m = 1;
  sys.f = [params, inertia](const Vector& x) {
    Vector dx(2);
    dx << x[1], (params.mass * params.gravity * params.length * std::sin(x[0]) -
                 params.friction * x[1]) /
                    inertia;
    return dx;
  };
  sys.g = [inertia](const Vector&) {
    Matrix g(2, 1);
    g << 0.0, 1.0 / inertia;
    return g;
  };
  sys.state_domain = state_domain;
  sys.input_set = input_set;
  sys.label = "pendulum";
  return sys;
}

void pendulum_linearization(const PendulumParams& params, Matrix* A, Matrix* B) {
  const double inertia = params.mass * params.length * params.length;
  A->resize(2, 2);
  B->resize(2, 1);
  *A << 0.0, 1.0, params.gravity / params.length, -params.friction / inertia;
  *B << 0.0, 1.0 / inertia;
}

NominalModel make_pendulum_nominal(const PendulumParams& params) {
  Matrix A, B;
  pendulum_linearization(params, &A, &B);
  return {[A](const Vector& x) { return Vector(A * x); }, [B](const Vector&) { return B; }};
}

Matrix latin_hypercube(const Box& box, int count, std::uint64_t seed) {
  if (!box.bounded()) throw DomainError("latin_hypercube: box must be bounded");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(count, box.dim());
  std::vector<int> perm(count);
  for (int d = 0; d < box.dim(); ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const double width = box.upper[d] - box.lower[d];
    for (int k = 0; k < count; ++k) {
      out(k, d) = box.lower[d] + (perm[k] + unit(rng)) / count * width;
    }
  }
  return out;
}

}  // namespace cagp
