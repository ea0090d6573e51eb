#include "cagp/controller.hpp"

#include <cmath>
#include <complex>

namespace cagp {
namespace {

// Solves Ac' P + P Ac = -M for symmetric P via the Kronecker form.
Matrix SolveLyapunov(const Matrix& Ac, const Matrix& M) {
  const int n = static_cast<int>(Ac.rows());
  const Matrix I = Matrix::Identity(n, n);
  Matrix L(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      // vec(Ac' P + P Ac) = (I (x) Ac' + Ac' (x) I) vec(P), column-major vec.
      L.block(i * n, j * n, n, n) = I(i, j) * Ac.transpose() + Ac(j, i) * I;
    }
  }
  const Eigen::Map<const Vector> rhs(M.data(), n * n);
  const Vector p = L.fullPivLu().solve(-Vector(rhs));
  Matrix P = Eigen::Map<const Matrix>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

bool Hurwitz(const Matrix& A) {
  Eigen::EigenSolver<Matrix> eig(A);
  return (eig.eigenvalues().real().array() < 0.0).all();
}

}  // namespace

double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                        const Matrix& P) {
  const Matrix r = A.transpose() * P + P * A - P * B * R.ldlt().solve(B.transpose() * P) + Q;
  return r.cwiseAbs().maxCoeff();
}

LqrResult lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m) {
    throw InputError("lqr_gain: inconsistent dimensions");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> r_eig(0.5 * (R + R.transpose()));
  if (r_eig.eigenvalues().minCoeff() <= 0.0) throw InputError("lqr_gain: R must be PD");
  Eigen::SelfAdjointEigenSolver<Matrix> q_eig(0.5 * (Q + Q.transpose()));
  if (q_eig.eigenvalues().minCoeff() < -1e-12) throw InputError("lqr_gain: Q must be PSD");

  const Matrix S = B * R.ldlt().solve(B.transpose());
  Matrix H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  Eigen::EigenSolver<Matrix> eig(H);
  if (eig.info() != Eigen::Success) throw NumericalError("lqr_gain: Hamiltonian eig failed");

  Eigen::MatrixXcd basis(2 * n, n);
  int found = 0;
  for (int k = 0; k < 2 * n; ++k) {
    const double re = eig.eigenvalues()[k].real();
    if (std::abs(re) < 1e-10 * (1.0 + H.cwiseAbs().maxCoeff())) {
      throw InputError("lqr_gain: Hamiltonian has imaginary-axis eigenvalues; (A, B) is not "
                       "stabilizable or (A, Q) has unobservable modes on the axis");
    }
    if (re < 0.0 && found < n) basis.col(found++) = eig.eigenvectors().col(k);
  }
  if (found != n) throw InputError("lqr_gain: (A, B) is not stabilizable");
  const Eigen::MatrixXcd X1 = basis.topRows(n);
  const Eigen::MatrixXcd X2 = basis.bottomRows(n);
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(X1);
  if (!lu.isInvertible()) throw InputError("lqr_gain: (A, B) is not stabilizable");
  Matrix P = (X2 * lu.inverse()).real();
  P = 0.5 * (P + P.transpose());

  // Newton-Kleinman polishing.
  Matrix K = R.ldlt().solve(B.transpose() * P);
  for (int it = 0; it < 20; ++it) {
    const Matrix Ac = A - B * K;
    if (!Hurwitz(Ac)) break;
    const Matrix next = SolveLyapunov(Ac, Q + K.transpose() * R * K);
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    K = R.ldlt().solve(B.transpose() * P);
    if (change <= 1e-14 * (1.0 + P.cwiseAbs().maxCoeff())) break;
  }
  if (!Hurwitz(A - B * K)) throw InputError("lqr_gain: (A, B) is not stabilizable");
  return {K, P, riccati_residual(A, B, Q, R, P)};
}

Policy linear_feedback(Matrix K, Box input_box) {
  return [K = std::move(K), box = std::move(input_box)](const Vector& x) {
    Vector u = -K * x;
    return box.dim() == u.size() ? box.clamp(u) : u;
  };
}

Matrix psd_factor(const Matrix& Q, double tol) {
  const Matrix sym = 0.5 * (Q + Q.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("psd_factor: eig failed");
  const double floor = -tol * std::max(1.0, sym.cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < floor) {
    throw NumericalError("psd_factor: quadratic form is indefinite beyond jitter");
  }
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return root.asDiagonal() * eig.eigenvectors().transpose();
}

SocpInstance build_socp_constraint(const LearnedModel& model, const LyapunovFunction& lyap,
                                   const Vector& x, const ControllerSettings& settings) {
  const int n = model.dim();
  const Matrix g_hat = model.nominal.g_hat(x);
  const int m = static_cast<int>(g_hat.cols());
  RequireDim(x, n, "build_socp_constraint x");
  const BoundMode mode =
      settings.awareness == Awareness::kAgnostic ? BoundMode::kSplit : settings.bound_mode;

  SocpInstance inst;
  inst.W = settings.W.size() == 0 ? Matrix(Matrix::Identity(m, m)) : settings.W;
  inst.p = settings.p;
  inst.lambda = settings.lambda;
  inst.lyapunov_value = lyap.value(x);
  inst.input_box = settings.input_box;
  inst.beta = Vector::Zero(m);

  const Vector grad = lyap.gradient(x);
  const Vector f_hat = model.nominal.f_hat(x);
  for (int d = 0; d < n; ++d) {
    if (!model.posteriors[d]) {
      inst.alpha0 += grad[d] * f_hat[d];
      inst.beta += grad[d] * g_hat.row(d).transpose();
      continue;
    }
    const AffineQuery q = model.posteriors[d]->affine(x);
    inst.alpha0 += grad[d] * q.mean_offset;
    inst.beta += grad[d] * q.mean_slope;
    const double w = std::abs(grad[d]) * model.bounds[d].B_fg;
    if (w == 0.0) continue;
    if (mode == BoundMode::kCombined) {
      inst.cones.push_back(w * psd_factor(q.combined));
      continue;
    }
    if (q.math.size() == 0) {
      throw InputError("build_socp_constraint: split requested but unavailable");
    }
    inst.cones.push_back(w * psd_factor(q.math));
    if (settings.awareness == Awareness::kAware) inst.cones.push_back(w * psd_factor(q.comp));
  }
  return inst;
}

SocpSolution solve_clf_qp(const NominalModel& nominal, const LyapunovFunction& lyap,
                          const Vector& x, const ControllerSettings& settings, bool slack) {
  const Vector grad = lyap.gradient(x);
  const Matrix g_hat = nominal.g_hat(x);
  const int m = static_cast<int>(g_hat.cols());
  SocpInstance inst;
  inst.W = settings.W.size() == 0 ? Matrix(Matrix::Identity(m, m)) : settings.W;
  inst.p = settings.p;
  inst.lambda = settings.lambda;
  inst.lyapunov_value = lyap.value(x);
  inst.alpha0 = grad.dot(nominal.f_hat(x));
  inst.beta = g_hat.transpose() * grad;
  inst.input_box = settings.input_box;
  inst.hard = !slack;
  return solve_min_norm_socp(inst);
}

ExplicitControl explicit_policy(const LearnedModel& model, const LyapunovFunction& lyap,
                                const Vector& x, Awareness awareness, BoundMode mode,
                                double threshold) {
  const int n = model.dim();
  RequireDim(x, n, "explicit_policy x");
  const Matrix g_hat = model.nominal.g_hat(x);
  const int m = static_cast<int>(g_hat.cols());
  for (const auto& post : model.posteriors) {
    if (!post) continue;
    for (const auto& kg : post->kernel().kg()) {
      if (kg) throw InputError("explicit_policy: input matrix must be known (no k_g)");
    }
  }
  const Vector zero = Vector::Zero(m);
  const VdotTerms t = vdot_decomposition(
      model, lyap, x, zero, awareness == Awareness::kAgnostic ? BoundMode::kSplit : mode);
  ExplicitControl out;
  out.a = t.upper(awareness, mode);
  out.b = g_hat.transpose() * lyap.gradient(x);
  const double b2 = out.b.squaredNorm();
  if (std::sqrt(b2) < threshold) {
    if (out.a < 0.0) {
      out.u = zero;
      out.certificate = out.a;
      return out;
    }
    throw DomainError("explicit_policy: b(x) vanishes where a(x) >= 0");
  }
  const double root = std::sqrt(out.a * out.a + b2 * b2);
  out.u = -((out.a + root) / b2) * out.b;
  out.certificate = out.a + out.b.dot(out.u);
  return out;
}

Policy socp_policy(std::shared_ptr<const LearnedModel> model,
                   std::shared_ptr<const LyapunovFunction> lyap, ControllerSettings settings) {
  return [model = std::move(model), lyap = std::move(lyap),
          settings = std::move(settings)](const Vector& x) {
    return solve_min_norm_socp(build_socp_constraint(*model, *lyap, x, settings)).u;
  };
}

Policy explicit_feedback(std::shared_ptr<const LearnedModel> model,
                         std::shared_ptr<const LyapunovFunction> lyap, Awareness awareness,
                         BoundMode mode) {
  return [model = std::move(model), lyap = std::move(lyap), awareness, mode](const Vector& x) {
    return explicit_policy(*model, *lyap, x, awareness, mode).u;
  };
}

}  // namespace cagp
