#include <gtest/gtest.h>

#include <cmath>

#include "cagp/tracking.hpp"

using namespace cagp;

namespace {

using TimedPolicy = std::function<Vector(double, const Vector&)>;

// Classic RK4 with the input re-evaluated at every stage, so V(t) along the
// solution is smooth in t.
Vector Step(const TrackingScenario& sc, const TimedPolicy& pi, double t, const Vector& x,
            double dt) {
  const auto& sys = sc.system();
  auto rhs = [&](double s, const Vector& y) { return sys(y, pi(s, y)); };
  const Vector k1 = rhs(t, x);
  const Vector k2 = rhs(t + dt / 2, x + dt / 2 * k1);
  const Vector k3 = rhs(t + dt / 2, x + dt / 2 * k2);
  const Vector k4 = rhs(t + dt, x + dt * k3);
  return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

DisturbanceSpec Smooth(std::uint64_t seed) {
  DisturbanceSpec d;
  d.kernel = KernelSpec::SquaredExponential(4.0, 1.5);
  d.centers = 30;
  d.seed = seed;
  d.box = Box::Uniform(6, -2, 2);
  return d;
}

DisturbanceSpec None() {
  DisturbanceSpec d;
  d.zero = true;
  return d;
}

}  // namespace

TEST(Tracking, ReferenceIsConsistentCircle) {
  const TrackingScenario sc = make_tracking_pointmass(Vector::Ones(3), None());
  const double h = 1e-5;
  for (double t : {0.0, 0.7, 2.3}) {
    const auto r = sc.reference(t);
    const auto rp = sc.reference(t + h), rm = sc.reference(t - h);
    EXPECT_NEAR((r.p.head(2)).norm(), 1.0, 1e-12);
    EXPECT_NEAR(((rp.p - rm.p) / (2 * h) - r.v).norm(), 0.0, 1e-8);
    EXPECT_NEAR(((rp.v - rm.v) / (2 * h) - r.a).norm(), 0.0, 1e-8);
  }
}

TEST(Tracking, IdealForceKeepsSlidingVariableAtZero) {
  const TrackingScenario sc = make_tracking_pointmass(Vector::Constant(3, 2.0), None());
  const auto r0 = sc.reference(0);
  Vector x(6);
  x << r0.p, r0.v;
  const TimedPolicy pi = [&](double t, const Vector& y) { return sc.ideal_force(t, y); };
  double t = 0;
  for (int k = 0; k < 3000; ++k, t += 1e-3) x = Step(sc, pi, t, x, 1e-3);
  EXPECT_LT(sc.sliding(t, x).norm(), 1e-9);
  EXPECT_LT((x.head(3) - sc.reference(t).p).norm(), 1e-9);
}

TEST(Tracking, OnManifoldErrorDecaysExponentially) {
  // s = 0 with p~(0) = e1 forces p~'(0) = -e1 and p~(t) = e1 exp(-t).
  const TrackingScenario sc = make_tracking_pointmass(Vector::Ones(3), Smooth(3));
  const auto r0 = sc.reference(0);
  Vector x(6);
  x << r0.p + Vector::Unit(3, 0), r0.v - Vector::Unit(3, 0);
  ASSERT_LT(sc.sliding(0, x).norm(), 1e-15);
  const TimedPolicy pi = [&](double t, const Vector& y) { return sc.ideal_force(t, y); };
  double t = 0;
  for (int k = 1; k <= 2000; ++k) {
    x = Step(sc, pi, t, x, 1e-3);
    t = k * 1e-3;
    if (k % 500 == 0) {
      const Vector err = x.head(3) - sc.reference(t).p;
      EXPECT_NEAR(err[0], std::exp(-t), 1e-9) << t;
      EXPECT_NEAR(err.tail(2).norm(), 0.0, 1e-9) << t;
    }
  }
}

TEST(Tracking, VdotMatchesFiniteDifference) {
  const TrackingScenario sc = make_tracking_pointmass(Vector::Constant(3, 1.5), Smooth(9));
  const TimedPolicy pi = [&](double t, const Vector& y) {
    Vector u = 0.5 * sc.ideal_force(t, y);
    u[0] += std::sin(3 * t);
    return u;
  };
  Vector x(6);
  x << 0.8, 0.3, 1.2, 0.1, 0.9, -0.2;
  const double dt = 1e-3;
  std::vector<Vector> xs{x};
  for (int k = 0; k < 2000; ++k) xs.push_back(Step(sc, pi, k * dt, xs.back(), dt));
  for (int k = 100; k < 2000; k += 100) {
    const double t = k * dt;
    const double fd =
        (sc.lyapunov(t + dt, xs[k + 1]) - sc.lyapunov(t - dt, xs[k - 1])) / (2 * dt);
    const double exact = sc.vdot(t, xs[k], pi(t, xs[k]));
    EXPECT_NEAR(fd, exact, 1e-4 * std::max(1.0, std::abs(exact))) << t;
  }
}

TEST(Tracking, DisturbanceIsSeededAndSmooth) {
  const TrackingScenario a = make_tracking_pointmass(Vector::Ones(3), Smooth(4));
  const TrackingScenario b = make_tracking_pointmass(Vector::Ones(3), Smooth(4));
  Vector x(6);
  x << 0.3, -0.2, 1.0, 0.5, 0.1, 0.0;
  EXPECT_EQ(a.disturbance_force(x), b.disturbance_force(x));
  EXPECT_GT(a.disturbance_force(x).norm(), 0.0);
  EXPECT_EQ(make_tracking_pointmass(Vector::Ones(3), None()).disturbance_force(x).norm(), 0.0);
}

TEST(Tracking, InvalidGainThrows) {
  EXPECT_THROW(make_tracking_pointmass(Vector::Constant(3, -1.0), None()), InputError);
  EXPECT_THROW(make_tracking_pointmass(Vector::Ones(2), None()), InputError);
}

TEST(Tracking, ShortRunWithoutDisturbanceTracks) {
  const TrackingScenario sc = make_tracking_pointmass(Vector::Constant(3, 2.0), None());
  TrackingSettings s;
  s.kernel = KernelSpec::SquaredExponential(1.0, 1.0);
  s.horizon = 2.0;
  s.initial_offset = Vector::Unit(3, 2) * 0.1;
  const TrackingRun run = run_tracking(sc, s, 5, Awareness::kAware);
  ASSERT_EQ(run.times.size(), run.states.size());
  ASSERT_EQ(run.error.size(), run.states.size());
  EXPECT_NEAR(run.error.front(), 0.1, 1e-12);
  EXPECT_LT(run.error.back(), 0.01);
  for (std::size_t k = 0; k < run.inputs.size(); ++k) {
    EXPECT_LE(run.inputs[k].cwiseAbs().maxCoeff(), s.u_limit + 1e-12);
  }
}

TEST(Tracking, SetupFromDefaultConfig) {
  const TrackingSetup setup = make_tracking(ExperimentConfig::Defaults("tracking3d"));
  EXPECT_EQ(setup.iterations, (std::vector<int>{5, 10, 15}));
  EXPECT_EQ(setup.scenario.disturbance().size(), 3u);
  EXPECT_TRUE(setup.settings.kernel.has_value());
}
