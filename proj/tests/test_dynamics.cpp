#include <gtest/gtest.h>

#include <cmath>

#include "cagp/controller.hpp"
#include "cagp/dynamics.hpp"

using namespace cagp;

namespace {

Vector V1(double a) { return Vector::Constant(1, a); }

// xdot = a x + b u on the real line.
ControlAffineSystem Linear1d(double a, double b) {
  ControlAffineSystem s;
  s.n = 1;
  s.m = 1;
  s.f = [a](const Vector& x) { return Vector(a * x); };
  s.g = [b](const Vector&) { return Matrix::Constant(1, 1, b); };
  s.state_domain = Box::Uniform(1, -1, 1);
  s.input_set = Box::Uniform(1, -10, 10);
  return s;
}

Policy Zero(int m) {
  return [m](const Vector&) { return Vector::Zero(m); };
}

double PendulumEnergy(const PendulumParams& p, const Vector& x) {
  const double inertia = p.mass * p.length * p.length;
  return 0.5 * inertia * x[1] * x[1] + p.mass * p.gravity * p.length * std::cos(x[0]);
}

}  // namespace

TEST(Rk4, ZeroFieldKeepsState) {
  ControlAffineSystem s = Linear1d(0, 0);
  EXPECT_EQ(step_rk4(s, V1(0.7), V1(3.0), 0.1)[0], 0.7);
}

TEST(Rk4, ExponentialDecay) {
  const ControlAffineSystem s = Linear1d(-1, 0);
  Vector x = V1(1.0);
  for (int k = 0; k < 100; ++k) x = step_rk4(s, x, V1(0), 0.01);
  EXPECT_NEAR(x[0], std::exp(-1.0), 1e-6);
}

TEST(Rk4, FourthOrderConvergence) {
  ControlAffineSystem s;
  s.n = 1;
  s.m = 1;
  s.f = [](const Vector& x) { return Vector(Vector::Constant(1, std::sin(x[0]) - 0.5 * x[0])); };
  s.g = [](const Vector&) { return Matrix::Zero(1, 1); };
  auto run = [&](double dt) {
    Vector x = V1(0.8);
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < steps; ++k) x = step_rk4(s, x, V1(0), dt);
    return x[0];
  };
  const double ref = run(0.1 / 64);
  const double ratio = std::abs(run(0.1) - ref) / std::abs(run(0.05) - ref);
  EXPECT_GT(ratio, 13.0);
  EXPECT_LT(ratio, 19.0);
}

TEST(Rk4, NonFiniteDerivativeThrows) {
  ControlAffineSystem s = Linear1d(0, 1);
  s.f = [](const Vector&) { return V1(std::nan("")); };
  EXPECT_THROW(step_rk4(s, V1(0), V1(0), 0.1), NumericalError);
}

TEST(Rk4, FrictionlessPendulumConservesEnergy) {
  const PendulumParams p{0.15, 0.5, 0.0, 9.81};
  const ControlAffineSystem s = make_pendulum(p, Box::Uniform(2, -4, 4), Box::Uniform(1, -1, 1));
  Vector x(2);
  x << 0.3, 0.0;
  const double e0 = PendulumEnergy(p, x);
  for (int k = 0; k < 10000; ++k) x = step_rk4(s, x, V1(0), 1e-3);
  EXPECT_LT(std::abs(PendulumEnergy(p, x) - e0) / std::abs(e0), 1e-5);
}

TEST(Simulate, EquilibriumStaysPut) {
  const Trajectory t = simulate(Linear1d(-1, 1), Zero(1), V1(0.0), {1.0, 0.01});
  for (const auto& x : t.states) EXPECT_EQ(x[0], 0.0);
}

TEST(Simulate, LinearDecayMatchesExponential) {
  const Trajectory t = simulate(Linear1d(-1, 1), Zero(1), V1(0.5), {2.0, 1e-3});
  EXPECT_NEAR(t.states.back()[0], 0.5 * std::exp(-2.0), 1e-5);
  EXPECT_EQ(t.times.size(), t.states.size());
  EXPECT_EQ(t.inputs.size(), t.states.size());
  for (std::size_t k = 1; k < t.times.size(); ++k) EXPECT_GT(t.times[k], t.times[k - 1]);
}

TEST(Simulate, DivergenceIsFlaggedNotThrown) {
  SimulationOptions o;
  o.horizon = 100;
  o.dt = 0.01;
  const Trajectory t = simulate(Linear1d(1, 0), Zero(1), V1(0.5), o);
  EXPECT_TRUE(t.diverged);
}

TEST(Simulate, PendulumUnderLqrSettles) {
  const PendulumParams truth;
  const ControlAffineSystem s =
      make_pendulum(truth, Box(Vector::Constant(2, -2), Vector::Constant(2, 2)),
                    Box::Uniform(1, -1, 1));
  Matrix A, B;
  pendulum_linearization({0.10, 0.5, 0.0, 9.81}, &A, &B);
  const LqrResult lqr = lqr_gain(A, B, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
  Vector x0(2);
  x0 << 0.1, 0.0;
  const Trajectory t = simulate(s, linear_feedback(lqr.K, s.input_set), x0, {10.0, 1e-3});
  EXPECT_LT(t.states.back().norm(), 1e-3);
}

TEST(Pendulum, AccelerationsAndInputGains) {
  const ControlAffineSystem truth =
      make_pendulum(PendulumParams{}, Box::Uniform(2, -2, 2), Box::Uniform(1, -1, 1));
  const NominalModel nominal = make_pendulum_nominal();
  Vector x(2);
  x << M_PI / 6, 0.0;
  EXPECT_NEAR(truth.f(x)[1], 9.81, 1e-12);
  EXPECT_NEAR(nominal.f_hat(x)[1], 9.81 * (M_PI / 6) / 0.5, 1e-12);
  EXPECT_NEAR(truth.g(x)(1, 0), 1.0 / (0.15 * 0.25), 1e-12);
  EXPECT_NEAR(nominal.g_hat(x)(1, 0), 40.0, 1e-12);
  EXPECT_EQ(truth.g(x)(0, 0), 0.0);
}

TEST(Pendulum, EquilibriumCheck) {
  const ControlAffineSystem truth =
      make_pendulum(PendulumParams{}, Box::Uniform(2, -2, 2), Box::Uniform(1, -1, 1));
  EXPECT_NO_THROW(truth.check_equilibrium());
  ControlAffineSystem shifted = truth;
  shifted.f = [](const Vector& x) { return Vector(x.array() + 1.0); };
  EXPECT_THROW(shifted.check_equilibrium(), InputError);
}

TEST(Measurements, ZeroStateZeroInput) {
  const ControlAffineSystem s = Linear1d(-2, 1);
  NominalModel nom{[](const Vector& x) { return Vector(x); },
                   [](const Vector&) { return Matrix::Identity(1, 1); }};
  const auto data = collect_measurements(s, nom, Matrix::Zero(3, 1), Matrix::Zero(3, 1));
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data[0].Y.norm(), 0.0);
}

TEST(Measurements, ExactNominalLeavesNoResidual) {
  const ControlAffineSystem s = Linear1d(-2, 3);
  NominalModel nom{s.f, s.g};
  Matrix X(4, 1), U(4, 1);
  X << -1, -0.2, 0.3, 0.9;
  U << 1, -1, 2, 0.5;
  const auto data = collect_measurements(s, nom, X, U);
  EXPECT_NEAR(data[0].residual().norm(), 0.0, 1e-15);
}

TEST(Measurements, PendulumResidualAgainstClosedForm) {
  const ControlAffineSystem truth =
      make_pendulum(PendulumParams{}, Box::Uniform(2, -2, 2), Box::Uniform(1, -1, 1));
  const NominalModel nominal = make_pendulum_nominal();
  Matrix X(1, 2), U(1, 1);
  X << 0.2, 0.0;
  U << 0.0;
  const auto data = collect_measurements(truth, nominal, X, U);
  // True: g sin(theta) / l. Nominal: g theta / l.
  const double expected = 9.81 / 0.5 * (std::sin(0.2) - 0.2);
  EXPECT_NEAR(data[1].residual()[0], expected, 1e-12);
  EXPECT_NEAR(data[0].residual()[0], 0.0, 1e-15);
}

TEST(GpSample, ZeroAmplitudeIsZeroFunction) {
  const GpSample f =
      sample_gp_function(KernelSpec::SquaredExponential(1, 0.3), linspace_grid(-1, 1, 41), 3, 0.0);
  for (double x = -1; x <= 1; x += 0.05) EXPECT_EQ(f(V1(x)), 0.0);
  EXPECT_EQ(f.rkhs_norm(), 0.0);
}

TEST(GpSample, DeterministicPerSeed) {
  const KernelSpec k = KernelSpec::Matern52(1, 0.5);
  const GpSample a = sample_gp_function(k, linspace_grid(-1, 1, 61), 42);
  const GpSample b = sample_gp_function(k, linspace_grid(-1, 1, 61), 42);
  const GpSample c = sample_gp_function(k, linspace_grid(-1, 1, 61), 43);
  EXPECT_EQ(a.alpha(), b.alpha());
  EXPECT_NE(a(V1(0.37)), c(V1(0.37)));
}

TEST(GpSample, EmpiricalCovarianceMatchesKernel) {
  const KernelSpec k = KernelSpec::SquaredExponential(1, 1);
  const Matrix grid = linspace_grid(0, 1, 11);  // contains 0.3 and 0.7
  double s = 0.0;
  const int draws = 2000;
  for (int seed = 0; seed < draws; ++seed) {
    const GpSample f = sample_gp_function(k, grid, static_cast<std::uint64_t>(seed));
    s += f(V1(0.3)) * f(V1(0.7));
  }
  const double target = k(V1(0.3), V1(0.7));
  EXPECT_NEAR(s / draws, target, 0.05 * target);
}

TEST(GpSample, PinsAreHonoured) {
  SamplePins pins;
  pins.points = Matrix(2, 1);
  pins.points << -0.5, 0.5;
  pins.values = Vector(2);
  pins.values << 1.0, -2.0;
  const GpSample f =
      sample_gp_function(KernelSpec::Matern52(1, 0.5), linspace_grid(-1, 1, 21), 5, 1.0, pins);
  // Interpolation runs through the jittered Gram, so pins hold to jitter level.
  EXPECT_NEAR(f(V1(-0.5)), 1.0, 1e-5);
  EXPECT_NEAR(f(V1(0.5)), -2.0, 1e-5);
}

TEST(GpSample, RkhsNormIsQuadraticForm) {
  const KernelSpec k = KernelSpec::SquaredExponential(2, 0.4);
  const GpSample f = sample_gp_function(k, linspace_grid(-1, 1, 15), 8);
  const Matrix& C = f.centers();
  double q = 0.0;
  for (int a = 0; a < C.rows(); ++a) {
    for (int b = 0; b < C.rows(); ++b) {
      q += f.alpha()[a] * f.alpha()[b] * k(C.row(a).transpose(), C.row(b).transpose());
    }
  }
  EXPECT_NEAR(f.rkhs_norm(), std::sqrt(q), 1e-9);
}

TEST(LatinHypercube, OnePointPerStratum) {
  const Box box(Vector::Constant(2, -1), Vector::Constant(2, 3));
  const Matrix P = latin_hypercube(box, 20, 9);
  for (int d = 0; d < 2; ++d) {
    std::vector<int> seen(20, 0);
    for (int k = 0; k < 20; ++k) {
      const int bin = static_cast<int>((P(k, d) + 1.0) / 4.0 * 20);
      ASSERT_GE(bin, 0);
      ASSERT_LT(bin, 20);
      ++seen[bin];
    }
    for (int c : seen) EXPECT_EQ(c, 1);
  }
}
