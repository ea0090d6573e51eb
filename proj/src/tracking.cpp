#include "cagp/tracking.hpp"

#include <cmath>
#include <deque>

#include "cagp/itergp.hpp"

namespace cagp {

TrackingScenario::TrackingScenario(Vector lambda, const DisturbanceSpec& disturbance,
                                   TrackingParams params)
    : lambda_(std::move(lambda)), params_(params), gravity_(Vector::Zero(3)) {
  if (lambda_.size() != 3 || (lambda_.array() <= 0.0).any()) {
    throw InputError("tracking: Lambda must be a positive 3-vector (diagonal)");
  }
  if (!(params_.mass > 0.0)) throw InputError("tracking: mass must be positive");
  gravity_[2] = -params_.gravity;
  if (!disturbance.zero) {
    if (disturbance.box.dim() != 6) throw InputError("tracking: disturbance box must be 6D");
    const Matrix centers = latin_hypercube(disturbance.box, disturbance.centers, disturbance.seed);
    for (int k = 0; k < 3; ++k) {
      disturbance_.push_back(
          sample_gp_function(disturbance.kernel, centers, disturbance.seed + 1 + k));
    }
  }

  system_.n = 6;
  system_.m = 3;
  const double mass = params_.mass;
  const Vector gravity = gravity_;
  const auto forces = disturbance_;
  system_.f = [mass, gravity, forces](const Vector& x) {
    Vector dx(6);
    dx.head(3) = x.tail(3);
    dx.tail(3) = gravity;
    for (std::size_t k = 0; k < forces.size(); ++k) dx[3 + k] += forces[k](x) / mass;
    return dx;
  };
  system_.g = [mass](const Vector&) {
    Matrix g = Matrix::Zero(6, 3);
    g.bottomRows(3) = Matrix::Identity(3, 3) / mass;
    return g;
  };
  system_.state_domain = disturbance.box;
  system_.input_set = Box();
  system_.label = "tracking3d";
}

Vector TrackingScenario::disturbance_force(const Vector& x) const {
  Vector f = Vector::Zero(3);
  for (std::size_t k = 0; k < disturbance_.size(); ++k) f[k] = disturbance_[k](x);
  return f;
}

TrackingScenario::Reference TrackingScenario::reference(double t) const {
  const double r = params_.radius;
  const double w = params_.omega;
  Reference ref{Vector(3), Vector(3), Vector(3)};
  ref.p << r * std::cos(w * t), r * std::sin(w * t), params_.height;
  ref.v << -r * w * std::sin(w * t), r * w * std::cos(w * t), 0.0;
  ref.a << -r * w * w * std::cos(w * t), -r * w * w * std::sin(w * t), 0.0;
  return ref;
}

Vector TrackingScenario::sliding(double t, const Vector& x) const {
  RequireDim(x, 6, "tracking state");
  const Reference ref = reference(t);
  return x.tail(3) - ref.v + lambda_.cwiseProduct(x.head(3) - ref.p);
}

double TrackingScenario::lyapunov(double t, const Vector& x) const {
  return 0.5 * params_.mass * sliding(t, x).squaredNorm();
}

double TrackingScenario::vdot(double t, const Vector& x, const Vector& u) const {
  const Reference ref = reference(t);
  const Vector vdot = system_(x, u).tail(3);
  const Vector sdot = vdot - ref.a + lambda_.cwiseProduct(x.tail(3) - ref.v);
  return params_.mass * sliding(t, x).dot(sdot);
}

Vector TrackingScenario::ideal_force(double t, const Vector& x) const {
  const Reference ref = reference(t);
  const double m = params_.mass;
  return m * (ref.a - gravity_ - lambda_.cwiseProduct(x.tail(3) - ref.v)) -
         disturbance_force(x);
}

TrackingScenario make_tracking_pointmass(const Vector& lambda, const DisturbanceSpec& disturbance,
                                         const TrackingParams& params) {
  return TrackingScenario(lambda, disturbance, params);
}

TrackingRun run_tracking(const TrackingScenario& sc, const TrackingSettings& settings,
                         int iterations, Awareness awareness) {
  if (!settings.kernel) throw InputError("run_tracking: a GP kernel is required");
  if (iterations < 0 || settings.window < 1 || !(settings.refit_rate > 0.0) ||
      !(settings.dt > 0.0)) {
    throw InputError("run_tracking: invalid settings");
  }
  const double m = sc.params().mass;
  const CompositeKernel kernel(settings.kernel, {}, 6);
  const AffineMean prior = AffineMean::Zero(0);
  const Vector no_input(0);
  const Vector gravity = Vector::Unit(3, 2) * -sc.params().gravity;

  TrackingRun run;
  run.iterations = iterations;
  run.awareness = awareness;

  std::deque<Vector> window_x;
  std::deque<Vector> window_y;
  auto refit = [&]() {
    const int n = static_cast<int>(window_x.size());
    std::vector<GpPosterior> out;
    Matrix X(n, 6);
    for (int p = 0; p < n; ++p) X.row(p) = window_x[p].transpose();
    for (int k = 0; k < 3; ++k) {
      Vector Y(n);
      for (int p = 0; p < n; ++p) Y[p] = window_y[p][k];
      const Dataset data(X, Matrix(n, 0), Y, Vector::Zero(n));
      out.push_back(iterative_posterior(kernel, data, prior, std::min(iterations, n), true,
                                        settings.relative_jitter));
    }
    return out;
  };
  std::vector<GpPosterior> posts = refit();

  const auto steps = static_cast<long>(std::llround(settings.horizon / settings.dt));
  const double sample_period = 1.0 / settings.refit_rate;
  double next_sample = 0.0;
  const auto ref0 = sc.reference(0.0);
  Vector x(6);
  x << ref0.p + settings.initial_offset, ref0.v;
  double sum_sq = 0.0;

  for (long step = 0; step <= steps; ++step) {
    const double t = static_cast<double>(step) * settings.dt;
    if (t + 1e-12 >= next_sample) {
      // Noise-free measurement of the disturbance acceleration at x.
      window_x.push_back(x);
      window_y.push_back(sc.disturbance_force(x) / m);
      if (static_cast<int>(window_x.size()) > settings.window) {
        window_x.pop_front();
        window_y.pop_front();
      }
      posts = refit();
      next_sample += sample_period;
    }

    const auto ref = sc.reference(t);
    const Vector s = sc.sliding(t, x);
    Vector mu(3);
    double unc_math = 0.0;
    double unc_comp = 0.0;
    for (int k = 0; k < 3; ++k) {
      mu[k] = posts[k].mean(x, no_input);
      const double w = m * std::abs(s[k]) * settings.bound;
      unc_math += w * std::sqrt(posts[k].variance(x, no_input, VarianceMode::kMath));
      unc_comp += w * std::sqrt(posts[k].variance(x, no_input, VarianceMode::kComp));
    }
    const Vector drift =
        m * (gravity + mu - ref.a + sc.lambda().cwiseProduct(x.tail(3) - ref.v));
    double a = s.dot(drift) + unc_math;
    if (awareness == Awareness::kAware) a += unc_comp;
    const double b2 = s.squaredNorm();
    Vector u;
    if (std::sqrt(b2) < 1e-8) {
      u = -drift;  // on the manifold: hold it with the model feedforward
    } else {
      u = -((a + std::sqrt(a * a + b2 * b2)) / b2) * s;
    }
    u = u.cwiseMax(-settings.u_limit).cwiseMin(settings.u_limit);

    const double err = (x.head(3) - ref.p).norm();
    sum_sq += err * err;
    run.times.push_back(t);
    run.states.push_back(x);
    run.inputs.push_back(u);
    run.error.push_back(err);
    run.lyapunov.push_back(0.5 * m * b2);
    run.vdot.push_back(sc.vdot(t, x, u));
    run.sigma_math.push_back(unc_math);
    run.sigma_comp.push_back(unc_comp);
    if (step == steps) break;
    x = step_rk4(sc.system(), x, u, settings.dt);
    if (!x.allFinite()) throw NumericalError("run_tracking: state diverged");
  }
  run.rms = std::sqrt(sum_sq / static_cast<double>(run.error.size()));
  return run;
}

TrackingSetup make_tracking(const ExperimentConfig& cfg) {
  if (cfg.scenario() != "tracking3d") {
    throw InputError("make_tracking: config is for " + cfg.scenario());
  }
  TrackingParams params;
  params.mass = cfg.number("tracking", "mass");
  params.radius = cfg.number("tracking", "radius");
  params.omega = cfg.number("tracking", "omega");
  params.height = cfg.number("tracking", "height");

  DisturbanceSpec dist;
  const auto kernel = cfg.kernel("kernel.f");
  if (!kernel) throw InputError("tracking3d: kernel.f is required");
  dist.kernel = *kernel;
  dist.centers = cfg.integer("disturbance", "centers");
  dist.seed = static_cast<std::uint64_t>(cfg.integer("experiment", "seed"));
  dist.box = Box(cfg.vector("disturbance", "lower"), cfg.vector("disturbance", "upper"));
  if (dist.box.dim() != 6) throw InputError("tracking3d: disturbance box must be 6D");

  const double gain = cfg.number("tracking", "gain");
  TrackingScenario scenario(Vector::Constant(3, gain), dist, params);

  TrackingSettings settings;
  settings.kernel = kernel;
  settings.window = cfg.integer("tracking", "window");
  settings.refit_rate = cfg.number("tracking", "refit_rate");
  settings.u_limit = cfg.number("tracking", "u_limit");
  double norm = 0.0;
  for (const auto& d : scenario.disturbance()) norm = std::max(norm, d.rkhs_norm());
  settings.bound = cfg.is_auto("bounds", "B_fg")
                       ? cfg.number("bounds", "safety") * norm / params.mass
                       : cfg.number("bounds", "B_fg");
  settings.dt = cfg.number("simulation", "dt");
  settings.horizon = cfg.number("simulation", "horizon");
  settings.initial_offset = cfg.vector("tracking", "initial_offset");
  if (settings.initial_offset.size() != 3) {
    throw InputError("tracking3d: tracking.initial_offset needs 3 entries");
  }
  settings.relative_jitter = cfg.number("experiment", "jitter");
  return {std::move(scenario), settings, cfg.integers("experiment", "cg_iters")};
}

}  // namespace cagp
