#include "cagp/socp.hpp"

#include <cmath>
#include <limits>

namespace cagp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Cone factor split into the constant column and the u-block.
struct Cone {
  Vector a;
  Matrix B;
};

class Barrier {
 public:
  Barrier(const SocpInstance& inst, std::vector<Cone> cones)
      : inst_(inst), cones_(std::move(cones)), m_(inst.input_dim()),
        nd_(inst.hard ? 0 : 1), nz_(m_ + nd_ + static_cast<int>(cones_.size())) {
    theta_ = 1.0 + 2.0 * static_cast<double>(cones_.size());
    for (int j = 0; j < m_; ++j) {
      if (std::isfinite(inst.input_box.upper[j])) theta_ += 1.0;
      if (std::isfinite(inst.input_box.lower[j])) theta_ += 1.0;
    }
  }

  int size() const { return nz_; }
  double theta() const { return theta_; }
  Vector u(const Vector& z) const { return z.head(m_); }
  double d(const Vector& z) const { return nd_ ? z[m_] : 0.0; }
  double t(const Vector& z, int k) const { return z[m_ + nd_ + k]; }

  double objective(const Vector& z) const {
    const Vector uu = u(z);
    const double dd = d(z);
    return uu.dot(inst_.W * uu) + inst_.p * dd * dd;
  }

  double linear_row(const Vector& z) const {
    double g = inst_.alpha0 + inst_.beta.dot(u(z)) + inst_.lambda * inst_.lyapunov_value - d(z);
    for (std::size_t k = 0; k < cones_.size(); ++k) g += t(z, static_cast<int>(k));
    return g;
  }

  bool feasible(const Vector& z) const {
    if (!z.allFinite() || !(linear_row(z) < 0.0)) return false;
    const Vector uu = u(z);
    for (int j = 0; j < m_; ++j) {
      if (!(uu[j] < inst_.input_box.upper[j]) || !(uu[j] > inst_.input_box.lower[j])) {
        return false;
      }
    }
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const double tk = t(z, static_cast<int>(k));
      const Vector y = cones_[k].a + cones_[k].B * uu;
      if (!(tk > 0.0) || !(tk * tk - y.squaredNorm() > 0.0)) return false;
    }
    return true;
  }

  // tb * f0(z) + phi(z); +inf outside the domain.
  double value(const Vector& z, double tb) const {
    if (!feasible(z)) return kInf;
    double v = tb * objective(z) - std::log(-linear_row(z));
    const Vector uu = u(z);
    for (int j = 0; j < m_; ++j) {
      if (std::isfinite(inst_.input_box.upper[j])) v -= std::log(inst_.input_box.upper[j] - uu[j]);
      if (std::isfinite(inst_.input_box.lower[j])) v -= std::log(uu[j] - inst_.input_box.lower[j]);
    }
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const double tk = t(z, static_cast<int>(k));
      const Vector y = cones_[k].a + cones_[k].B * uu;
      v -= std::log(tk * tk - y.squaredNorm());
    }
    return v;
  }

  void derivatives(const Vector& z, double tb, Vector* grad, Matrix* hess) const {
    grad->setZero(nz_);
    hess->setZero(nz_, nz_);
    const Vector uu = u(z);
    grad->head(m_) += tb * 2.0 * inst_.W * uu;
    hess->topLeftCorner(m_, m_) += tb * 2.0 * inst_.W;
    if (nd_) {
      (*grad)[m_] += tb * 2.0 * inst_.p * d(z);
      (*hess)(m_, m_) += tb * 2.0 * inst_.p;
    }

    Vector a = Vector::Zero(nz_);
    a.head(m_) = inst_.beta;
    if (nd_) a[m_] = -1.0;
    for (std::size_t k = 0; k < cones_.size(); ++k) a[m_ + nd_ + k] = 1.0;
    const double g = linear_row(z);
    *grad += a / (-g);
    *hess += a * a.transpose() / (g * g);

    for (int j = 0; j < m_; ++j) {
      if (std::isfinite(inst_.input_box.upper[j])) {
        const double s = inst_.input_box.upper[j] - uu[j];
        (*grad)[j] += 1.0 / s;
        (*hess)(j, j) += 1.0 / (s * s);
      }
      if (std::isfinite(inst_.input_box.lower[j])) {
        const double s = uu[j] - inst_.input_box.lower[j];
        (*grad)[j] -= 1.0 / s;
        (*hess)(j, j) += 1.0 / (s * s);
      }
    }

    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const int ti = m_ + nd_ + static_cast<int>(k);
      const double tk = z[ti];
      const Vector y = cones_[k].a + cones_[k].B * uu;
      const double s = tk * tk - y.squaredNorm();
      Vector ds = Vector::Zero(nz_);
      ds.head(m_) = -2.0 * cones_[k].B.transpose() * y;
      ds[ti] = 2.0 * tk;
      *grad -= ds / s;
      *hess += ds * ds.transpose() / (s * s);
      hess->topLeftCorner(m_, m_) += 2.0 * cones_[k].B.transpose() * cones_[k].B / s;
      (*hess)(ti, ti) -= 2.0 / s;
    }
  }

  // A strictly feasible point with u near zero; t and d padded by one.
  Vector initial_point() const {
    Vector z(nz_);
    for (int j = 0; j < m_; ++j) {
      const double lo = inst_.input_box.lower[j];
      const double hi = inst_.input_box.upper[j];
      double margin = 1e-3;
      if (std::isfinite(lo) && std::isfinite(hi)) margin = 1e-3 * (hi - lo);
      z[j] = std::clamp(0.0, lo + margin, hi - margin);
    }
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Vector y = cones_[k].a + cones_[k].B * z.head(m_);
      z[m_ + nd_ + k] = y.norm() + 1.0;
    }
    if (nd_) {
      z[m_] = 0.0;
      z[m_] = linear_row(z) + 1.0;
    }
    return z;
  }

 private:
  const SocpInstance& inst_;
  std::vector<Cone> cones_;
  int m_;
  int nd_;
  int nz_;
  double theta_;
};

std::vector<Cone> SplitCones(const SocpInstance& inst) {
  std::vector<Cone> out;
  for (const Matrix& A : inst.cones) {
    if (A.cwiseAbs().maxCoeff() == 0.0) continue;
    out.push_back({A.col(0), A.rightCols(inst.input_dim())});
  }
  return out;
}

// Initial barrier weight balancing the objective and barrier gradients in
// the barrier's Hessian norm; the starting objective can be 1e5 when the
// slack weight is large, and a unit weight then costs thousands of damped
// Newton steps.
double InitialWeight(const Barrier& barrier, const Vector& z) {
  Vector g_phi, g_obj;
  Matrix h_phi, h_obj;
  barrier.derivatives(z, 0.0, &g_phi, &h_phi);
  barrier.derivatives(z, 1.0, &g_obj, &h_obj);
  g_obj -= g_phi;
  const auto ldlt = h_phi.ldlt();
  const Vector hg = ldlt.solve(g_obj);
  const double denom = g_obj.dot(hg);
  const double fallback = barrier.theta() / std::max(barrier.objective(z), 1e-8);
  if (!(denom > 0.0)) return fallback;
  const double w = -g_phi.dot(hg) / denom;
  return std::isfinite(w) && w > 0.0 ? w : fallback;
}

// Path following from a strictly feasible z.
SocpSolution Follow(const Barrier& barrier, Vector z, const SocpOptions& options) {
  SocpSolution sol;
  double tb = InitialWeight(barrier, z);
  Vector grad;
  Matrix hess;
  bool centered = true;
  while (true) {
    centered = false;
    for (int steps = 0; steps < options.max_newton_steps; ++steps) {
      barrier.derivatives(z, tb, &grad, &hess);
      const Vector dz = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dz);
      if (!std::isfinite(decrement)) break;
      const double f0 = barrier.value(z, tb);
      // The decrement bounds the suboptimality of the centering problem; once
      // it is below the rounding level of f0 no step can make progress.
      if (decrement <= std::max(1e-10, 64.0 * kEps * std::abs(f0))) {
        centered = true;
        break;
      }
      double step = 1.0;
      while (!barrier.feasible(z + step * dz) && step > 1e-20) step *= 0.5;
      while (barrier.value(z + step * dz, tb) > f0 - 0.01 * step * decrement && step > 1e-20) {
        step *= 0.5;
      }
      if (step <= 1e-20) break;
      z += step * dz;
      ++sol.newton_steps;
    }
    const double gap = barrier.theta() / tb;
    sol.gap = gap;
    if (!centered) break;
    if (gap <= options.tolerance * std::max(1.0, std::abs(barrier.objective(z)))) break;
    tb /= options.mu_reduction;
  }
  const SocpStatus status = centered ? SocpStatus::kOptimal : SocpStatus::kMaxIterations;
  sol.u = barrier.u(z);
  sol.d = barrier.d(z);
  sol.objective = barrier.objective(z);
  sol.status = status;
  return sol;
}

}  // namespace

double SocpInstance::constraint(const Vector& u) const {
  double g = alpha0 + beta.dot(u) + lambda * lyapunov_value;
  for (const Matrix& A : cones) {
    Vector z(u.size() + 1);
    z << 1.0, u;
    g += (A * z).norm();
  }
  return g;
}

double SocpInstance::reduced_objective(const Vector& u) const {
  const double g = constraint(u);
  if (hard) return g <= 0.0 ? u.dot(W * u) : kInf;
  const double slack = std::max(0.0, g);
  return u.dot(W * u) + p * slack * slack;
}

void SocpInstance::validate() const {
  const int m = input_dim();
  if (m < 1) throw InputError("SocpInstance: beta must be nonempty");
  if (W.rows() != m || W.cols() != m) throw InputError("SocpInstance: W must be m x m");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (W + W.transpose()));
  if (eig.eigenvalues().minCoeff() <= 0.0) throw InputError("SocpInstance: W must be PD");
  if (!(p > 0.0)) throw InputError("SocpInstance: slack weight p must be positive");
  if (!(lambda > 0.0)) throw InputError("SocpInstance: lambda must be positive");
  if (input_box.dim() != m) throw InputError("SocpInstance: input box dimension");
  for (int j = 0; j < m; ++j) {
    if (!(input_box.lower[j] < input_box.upper[j])) {
      throw InputError("SocpInstance: input box must have nonempty interior");
    }
  }
  for (const Matrix& A : cones) {
    if (A.cols() != m + 1) throw InputError("SocpInstance: cone factors need m + 1 columns");
  }
  if (!std::isfinite(alpha0) || !beta.allFinite() || !std::isfinite(lyapunov_value)) {
    throw InputError("SocpInstance: non-finite data");
  }
}

std::string to_string(SocpStatus s) {
  switch (s) {
    case SocpStatus::kOptimal:
      return "optimal";
    case SocpStatus::kInfeasible:
      return "infeasible";
    case SocpStatus::kMaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

SocpSolution solve_min_norm_socp(const SocpInstance& inst, const SocpOptions& options) {
  inst.validate();
  std::vector<Cone> cones = SplitCones(inst);
  if (!inst.hard) {
    Barrier barrier(inst, cones);
    return Follow(barrier, barrier.initial_point(), options);
  }

  // Phase I: a heavily weighted slack problem finds the most feasible input.
  SocpInstance relaxed = inst;
  relaxed.hard = false;
  relaxed.p = 1e8 * std::max(1.0, inst.W.cwiseAbs().maxCoeff());
  const SocpSolution phase1 = solve_min_norm_socp(relaxed, options);
  const double g = inst.constraint(phase1.u);
  if (!(g < -1e-12)) {
    SocpSolution sol = phase1;
    sol.status = SocpStatus::kInfeasible;
    sol.d = std::max(g, 0.0);
    return sol;
  }
  Barrier barrier(inst, cones);
  const int m = inst.input_dim();
  Vector z(barrier.size());
  z.head(m) = phase1.u.cwiseMax(inst.input_box.lower).cwiseMin(inst.input_box.upper);
  const double pad = -g / (2.0 * static_cast<double>(cones.size() + 1));
  for (std::size_t k = 0; k < cones.size(); ++k) {
    z[m + k] = (cones[k].a + cones[k].B * z.head(m)).norm() + pad;
  }
  if (!barrier.feasible(z)) {
    // Phase I landed on the box boundary; pull toward the box center.
    const Vector center = 0.5 * (inst.input_box.lower + inst.input_box.upper);
    z.head(m) = z.head(m) + 1e-9 * (center - z.head(m));
    for (std::size_t k = 0; k < cones.size(); ++k) {
      z[m + k] = (cones[k].a + cones[k].B * z.head(m)).norm() + pad;
    }
    if (!barrier.feasible(z)) {
      SocpSolution sol = phase1;
      sol.status = SocpStatus::kInfeasible;
      return sol;
    }
  }
  SocpSolution sol = Follow(barrier, z, options);
  sol.newton_steps += phase1.newton_steps;
  return sol;
}

SocpSolution brute_force_min_norm(const SocpInstance& inst, double resolution) {
  inst.validate();
  const int m = inst.input_dim();
  if (m > 3) throw InputError("brute_force_min_norm: m <= 3 only");
  if (!inst.input_box.bounded()) throw DomainError("brute_force_min_norm: unbounded box");
  constexpr int kPoints = 25;
  Vector lo = inst.input_box.lower;
  Vector hi = inst.input_box.upper;
  Vector best_u = Vector::Zero(m);
  double best = kInf;
  Vector previous_u = best_u;
  int fine_levels = 0;
  int levels = 0;
  while (true) {
    const Vector cell = (hi - lo) / (kPoints - 1);
    long total = 1;
    for (int j = 0; j < m; ++j) total *= kPoints;
    for (long idx = 0; idx < total; ++idx) {
      long rest = idx;
      Vector u(m);
      for (int j = 0; j < m; ++j) {
        u[j] = lo[j] + static_cast<double>(rest % kPoints) * cell[j];
        rest /= kPoints;
      }
      const double value = inst.reduced_objective(u);
      if (value < best) {
        best = value;
        best_u = u;
      }
    }
    // A steep slack term can leave the objective far from optimal at a cell
    // of `resolution`, so zooming continues ten levels (about 1000x) past it.
    // A level without improvement proves nothing: the zoomed grid contains
    // the previous best point.
    if (cell.maxCoeff() <= resolution && std::isfinite(best)) ++fine_levels;
    if (fine_levels > 10 || cell.maxCoeff() < 1e-12 || ++levels > 400) break;
    // In a narrow valley the best point creeps along the valley between
    // levels; the window keeps twice that drift so the creep can continue.
    const Vector half = (6.0 * cell).cwiseMax(2.0 * (best_u - previous_u).cwiseAbs());
    previous_u = best_u;
    lo = (best_u - half).cwiseMax(inst.input_box.lower);
    hi = (best_u + half).cwiseMin(inst.input_box.upper);
  }
  // Compass search along coordinate and diagonal directions finishes the
  // valleys the grid cannot resolve; the reduced objective is C1 away from
  // cone apexes, so halving the pattern converges.
  if (std::isfinite(best)) {
    std::vector<Vector> dirs;
    for (int i = 0; i < m; ++i) {
      dirs.push_back(Vector::Unit(m, i));
      for (int j = i + 1; j < m; ++j) {
        dirs.push_back(Vector::Unit(m, i) + Vector::Unit(m, j));
        dirs.push_back(Vector::Unit(m, i) - Vector::Unit(m, j));
      }
    }
    for (double step = resolution; step > 1e-12;) {
      bool moved = false;
      for (const Vector& dir : dirs) {
        for (double sign : {1.0, -1.0}) {
          const Vector u = inst.input_box.clamp(best_u + sign * step * dir);
          const double value = inst.reduced_objective(u);
          if (value < best) {
            best = value;
            best_u = u;
            moved = true;
          }
        }
      }
      if (!moved) step *= 0.5;
    }
  }
  SocpSolution sol;
  sol.u = best_u;
  sol.objective = best;
  sol.d = inst.hard ? 0.0 : std::max(0.0, inst.constraint(best_u));
  sol.status = std::isfinite(best) ? SocpStatus::kOptimal : SocpStatus::kInfeasible;
  return sol;
}

}  // namespace cagp
