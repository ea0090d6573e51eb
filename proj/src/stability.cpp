#include "cagp/stability.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cagp {
namespace {

constexpr double kInflation = 1.05;

// Sup-norm factor for one kernel term: the literal B^2 |k| of the formula,
// raised to B sqrt(|k|) (the actual sup of an RKHS-ball function) if larger.
double SupFactor(double B, double sup_k) {
  return std::max(B * B * sup_k, B * std::sqrt(sup_k));
}

Matrix GridPoints(const Box& box, int points_per_dim) {
  const int n = box.dim();
  long count = 1;
  for (int d = 0; d < n; ++d) count *= points_per_dim;
  Matrix out(count, n);
  for (long i = 0; i < count; ++i) {
    long index = i;
    for (int d = 0; d < n; ++d) {
      const long k = index % points_per_dim;
      index /= points_per_dim;
      const double t = points_per_dim == 1 ? 0.5 : static_cast<double>(k) / (points_per_dim - 1);
      out(i, d) = box.lower[d] + t * (box.upper[d] - box.lower[d]);
    }
  }
  return out;
}

// Largest spectral norm of a central-difference Jacobian over the grid.
double JacobianSup(const VectorField& field, const Matrix& points, double h) {
  double worst = 0.0;
  for (int i = 0; i < points.rows(); ++i) {
    const Vector x = points.row(i).transpose();
    const Vector f0 = field(x);
    Matrix J(f0.size(), x.size());
    for (int d = 0; d < x.size(); ++d) {
      Vector xp = x, xm = x;
      xp[d] += h;
      xm[d] -= h;
      J.col(d) = (field(xp) - field(xm)) / (2.0 * h);
    }
    worst = std::max(worst, Eigen::JacobiSVD<Matrix>(J).singularValues()(0));
  }
  return worst;
}

}  // namespace

QuadraticLyapunov::QuadraticLyapunov(Matrix P, Box domain) : P_(std::move(P)) {
  if (P_.rows() != P_.cols() || P_.rows() != domain.dim()) {
    throw InputError("QuadraticLyapunov: P must be square and match the domain");
  }
  if ((P_ - P_.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + P_.cwiseAbs().maxCoeff())) {
    throw InputError("QuadraticLyapunov: P must be symmetric");
  }
  P_ = 0.5 * (P_ + P_.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(P_);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw InputError("QuadraticLyapunov: P must be positive definite");
  }
  if (!domain.bounded()) throw DomainError("QuadraticLyapunov: domain must be bounded");
  hessian_sup_ = 2.0 * eig.eigenvalues().maxCoeff();
  // |2 P x| is convex in x, so its maximum over the box sits at a corner.
  grad_sup_ = (2.0 * P_ * domain.corners()).colwise().norm().maxCoeff();
}

Vector LearnedModel::mean(const Vector& x, const Vector& u) const {
  Vector out = nominal(x, u);
  for (int d = 0; d < dim(); ++d) {
    if (posteriors[d]) out[d] = posteriors[d]->mean(x, u);
  }
  return out;
}

Vector LearnedModel::stddev(const Vector& x, const Vector& u, VarianceMode mode) const {
  Vector out = Vector::Zero(dim());
  for (int d = 0; d < dim(); ++d) {
    if (posteriors[d]) out[d] = std::sqrt(posteriors[d]->variance(x, u, mode));
  }
  return out;
}

bool LearnedModel::has_split() const {
  return std::all_of(posteriors.begin(), posteriors.end(),
                     [](const auto& p) { return !p || p->has_split(); });
}

std::string to_string(Awareness a) { return a == Awareness::kAware ? "aware" : "agnostic"; }
std::string to_string(BoundMode b) { return b == BoundMode::kSplit ? "split" : "combined"; }
std::string to_string(MarginMode m) {
  return m == MarginMode::kLipschitz ? "lipschitz" : "pointwise";
}

double VdotTerms::upper(Awareness awareness, BoundMode mode) const {
  if (awareness == Awareness::kAgnostic) return mean + math;
  return mode == BoundMode::kSplit ? mean + math + comp : mean + combined;
}

VdotTerms vdot_decomposition(const LearnedModel& model, const LyapunovFunction& lyap,
                             const Vector& x, const Vector& u, BoundMode mode) {
  if (static_cast<int>(model.bounds.size()) != model.dim()) {
    throw InputError("vdot_decomposition: one RkhsBounds per output required");
  }
  if (mode == BoundMode::kSplit && !model.has_split()) {
    throw InputError("vdot_decomposition: split mode needs K^-1 for every learned output");
  }
  const Vector grad = lyap.gradient(x);
  VdotTerms t;
  t.mean = grad.dot(model.mean(x, u));
  for (int d = 0; d < model.dim(); ++d) {
    if (!model.posteriors[d]) continue;
    const GpPosterior& post = *model.posteriors[d];
    const double w = std::abs(grad[d]) * model.bounds[d].B_fg;
    if (w == 0.0) continue;
    t.combined += w * std::sqrt(post.variance(x, u, VarianceMode::kCombined));
    if (mode == BoundMode::kSplit) {
      t.math += w * std::sqrt(post.variance(x, u, VarianceMode::kMath));
      t.comp += w * std::sqrt(post.variance(x, u, VarianceMode::kComp));
    }
  }
  return t;
}

double lipschitz_constant(const RkhsBounds& b, const KernelBounds& kf, const KernelBounds& kg,
                          double hessian_sup, double grad_sup) {
  const double hess_part = SupFactor(b.B_f, kf.sup_k) + b.B_pi * SupFactor(b.B_g, kg.sup_k);
  const double grad_part = b.B_f * std::sqrt(kf.sup_k * kf.sup_dk) +
                           b.B_g * b.B_pi * std::sqrt(kg.sup_k * kg.sup_dk);
  return hess_part * hessian_sup + std::sqrt(2.0) * grad_sup * grad_part;
}

FieldBounds closed_loop_field_bounds(const VectorField& field, const Box& domain,
                                     int points_per_dim) {
  if (!domain.bounded()) throw DomainError("closed_loop_field_bounds: unbounded domain");
  const Matrix pts = GridPoints(domain, points_per_dim);
  FieldBounds out;
  for (int i = 0; i < pts.rows(); ++i) out.sup = std::max(out.sup, field(pts.row(i).transpose()).norm());
  const double h = 1e-6 * std::max(1.0, (domain.upper - domain.lower).maxCoeff());
  out.lip = JacobianSup(field, pts, h);
  out.sup *= kInflation;
  out.lip *= kInflation;
  return out;
}

double policy_lipschitz(const Policy& policy, const Box& domain, int points_per_dim) {
  if (!domain.bounded()) throw DomainError("policy_lipschitz: unbounded domain");
  const double h = 1e-6 * std::max(1.0, (domain.upper - domain.lower).maxCoeff());
  return kInflation * JacobianSup(policy, GridPoints(domain, points_per_dim), h);
}

double closed_loop_lipschitz(const std::vector<RkhsBounds>& bounds,
                             const std::vector<OutputKernelBounds>& kernel_bounds,
                             const FieldBounds& nominal, double policy_lip,
                             const LyapunovFunction& lyap) {
  if (bounds.size() != kernel_bounds.size()) {
    throw InputError("closed_loop_lipschitz: bounds and kernel bounds differ in length");
  }
  const double hess = lyap.hessian_sup();
  const double grad = lyap.grad_sup();
  double L = hess * nominal.sup + grad * nominal.lip;
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const RkhsBounds& b = bounds[d];
    const OutputKernelBounds& kb = kernel_bounds[d];
    if (kb.kf) L += lipschitz_constant(b, *kb.kf, KernelBounds{}, hess, grad);
    for (const auto& kg : kb.kg) {
      if (!kg) continue;
      RkhsBounds g_only = b;
      g_only.B_f = 0.0;
      L += lipschitz_constant(g_only, KernelBounds{}, *kg, hess, grad);
      // The learned input column times the policy also varies with pi.
      L += grad * b.B_g * std::sqrt(kg->sup_k) * policy_lip;
    }
  }
  return L;
}

Grid Grid::Uniform(const Box& box, double tau) {
  if (!(tau > 0.0)) throw InputError("Grid: tau must be positive");
  if (!box.bounded()) throw DomainError("Grid: box must be bounded");
  const int n = box.dim();
  std::vector<Vector> axes(n);
  long count = 1;
  for (int d = 0; d < n; ++d) {
    const double width = box.upper[d] - box.lower[d];
    const int k = static_cast<int>(std::ceil(width / tau - 1e-9)) + 1;
    axes[d] = k == 1 ? Vector::Constant(1, box.lower[d])
                     : Vector(Vector::LinSpaced(k, box.lower[d], box.upper[d]));
    count *= k;
  }
  Grid g;
  g.tau = tau;
  g.points.resize(count, n);
  for (long i = 0; i < count; ++i) {
    long index = i;
    for (int d = 0; d < n; ++d) {
      const long k = index % axes[d].size();
      index /= axes[d].size();
      g.points(i, d) = axes[d][k];
    }
  }
  return g;
}

CertificationProblem::CertificationProblem(const LearnedModel& model,
                                           std::shared_ptr<const LyapunovFunction> lyap,
                                           Policy policy, Grid grid,
                                           CertificationSettings settings)
    : grid_(std::move(grid)), settings_(settings), lyap_(std::move(lyap)) {
  if (!lyap_) throw InputError("CertificationProblem: missing Lyapunov function");
  if (grid_.points.cols() != lyap_->dim()) {
    throw InputError("CertificationProblem: grid and Lyapunov function differ in dimension");
  }
  const BoundMode mode =
      settings_.awareness == Awareness::kAgnostic ? BoundMode::kSplit : settings_.bound_mode;
  const int count = grid_.size();
  levels_.resize(count);
  margins_.resize(count);
  for (int i = 0; i < count; ++i) {
    const Vector x = grid_.point(i);
    levels_[i] = lyap_->value(x);
    const VdotTerms t = vdot_decomposition(model, *lyap_, x, policy(x), mode);
    margins_[i] = t.upper(settings_.awareness, mode);
  }
  set_thresholds();
}

void CertificationProblem::set_thresholds() {
  const double grid_margin = settings_.margin_mode == MarginMode::kLipschitz
                                 ? -settings_.lipschitz * grid_.tau
                                 : 0.0;
  thresholds_.resize(grid_.size());
  for (int i = 0; i < grid_.size(); ++i) {
    thresholds_[i] = grid_.points.row(i).norm() <= settings_.origin_exclusion ? 0.0 : grid_margin;
  }
}

CertificationProblem CertificationProblem::with_margin_mode(MarginMode mode) const {
  CertificationProblem copy = *this;
  copy.settings_.margin_mode = mode;
  copy.set_thresholds();
  return copy;
}

double CertificationProblem::max_level() const {
  return levels_.size() > 0 ? levels_.maxCoeff() : 0.0;
}

CertifyResult certify_level_set(const CertificationProblem& problem, double c) {
  if (!(c > 0.0)) throw InputError("certify_level_set: c must be positive");
  CertifyResult result;
  const Vector& levels = problem.levels();
  double worst_level = std::numeric_limits<double>::infinity();
  for (int i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0) || levels[i] > c) continue;
    result.empty = false;
    if (!problem.passes(i) && levels[i] < worst_level) {
      worst_level = levels[i];
      result.witness = i;
    }
  }
  result.certified = !result.witness.has_value();
  return result;
}

RoaEstimate max_certified_level(const CertificationProblem& problem, double c_max,
                                int iteration) {
  if (!(c_max > 0.0)) throw InputError("max_certified_level: c_max must be positive");
  double lo = 0.0;
  double hi = c_max;
  if (certify_level_set(problem, c_max).certified) {
    lo = c_max;
  } else {
    while (hi - lo > 1e-3 * hi) {
      const double mid = 0.5 * (lo + hi);
      if (certify_level_set(problem, mid).certified) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    // The bisection presumes monotonicity in c; confirm the answer directly.
    while (lo > 0.0 && !certify_level_set(problem, lo).certified) lo *= 0.5;
  }

  RoaEstimate est;
  est.c_search = lo;
  est.margin = problem.margins();
  est.iteration = iteration;
  est.mode = problem.settings().awareness;
  const Vector& levels = problem.levels();
  for (int i = 0; i < levels.size(); ++i) {
    if (levels[i] > 0.0 && levels[i] <= lo) {
      est.certified_points.push_back(i);
      est.c = std::max(est.c, levels[i]);
    }
  }
  return est;
}

std::vector<bool> true_roa_oracle(const ControlAffineSystem& sys, const Policy& policy,
                                  const Grid& grid, const OracleOptions& options,
                                  const LyapunovFunction* lyap) {
  if (!(options.dt > 0.0) || !(options.conv_radius > 0.0)) {
    throw InputError("true_roa_oracle: dt and conv_radius must be positive");
  }
  const double divergence = sys.state_domain.bounded()
                                ? 10.0 * sys.state_domain.diameter()
                                : std::numeric_limits<double>::infinity();
  const auto steps = static_cast<long>(std::llround(options.horizon / options.dt));
  const double early = 0.1 * options.conv_radius;
  std::vector<bool> out(grid.size(), false);
  for (int i = 0; i < grid.size(); ++i) {
    Vector x = grid.point(i);
    if (lyap && lyap->value(x) > options.level_cap) continue;
    bool accepted = false;
    bool diverged = false;
    for (long k = 0; k < steps; ++k) {
      if (x.norm() <= early) {
        accepted = true;
        break;
      }
      if (x.norm() > divergence || !x.allFinite()) {
        diverged = true;
        break;
      }
      const Vector u = sys.input_set.clamp(policy(x));
      x = step_rk4(sys, x, u, options.dt);
    }
    out[i] = accepted || (!diverged && x.norm() <= options.conv_radius);
  }
  return out;
}

EnergyPowerPair stability_pair(std::shared_ptr<const LyapunovFunction> lyap, double lambda,
                               double c) {
  return {[lyap](const Vector& x) { return lyap->value(x); },
          [lyap, lambda](const Vector& x) { return -lambda * lyap->value(x); },
          [lyap, c](const Vector& x) {
            const double v = lyap->value(x);
            return v > 0.0 && v <= c;
          }};
}

EnergyPowerPair barrier_pair(std::function<double(const Vector&)> barrier,
                             std::function<double(double)> alpha) {
  // Edot <= alpha(h) is the barrier condition hdot >= -alpha(h) with E = -h.
  return {[barrier](const Vector& x) { return -barrier(x); },
          [barrier, alpha](const Vector& x) { return alpha(barrier(x)); },
          [barrier](const Vector& x) { return barrier(x) >= 0.0; }};
}

InvarianceResult energy_invariance_check(const EnergyPowerPair& pair,
                                         const std::function<double(const Vector&)>& edot_upper,
                                         const Grid& grid, double lipschitz, double tau) {
  InvarianceResult result;
  for (int i = 0; i < grid.size(); ++i) {
    const Vector x = grid.point(i);
    if (!pair.in_set(x)) continue;
    if (!(edot_upper(x) - pair.power(x) < -lipschitz * tau)) {
      result.certified = false;
      result.witness = x;
      return result;
    }
  }
  return result;
}

double sampled_lipschitz_ratio(const std::function<double(const Vector&)>& h, const Box& box,
                               int pairs, std::uint64_t seed) {
  if (!box.bounded()) throw DomainError("sampled_lipschitz_ratio: unbounded box");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&]() {
    Vector x(box.dim());
    for (int d = 0; d < box.dim(); ++d) {
      x[d] = box.lower[d] + unit(rng) * (box.upper[d] - box.lower[d]);
    }
    return x;
  };
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const Vector a = draw();
    const Vector b = draw();
    const double dist = (a - b).norm();
    if (dist == 0.0) continue;
    worst = std::max(worst, std::abs(h(a) - h(b)) / dist);
  }
  return worst;
}

}  // namespace cagp
