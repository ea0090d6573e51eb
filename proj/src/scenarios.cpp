#include "cagp/scenarios.hpp"

#include <algorithm>
#include <cmath>

namespace cagp {
namespace {

Box ConfigBox(const ExperimentConfig& cfg, const std::string& section) {
  return Box(cfg.vector(section, "lower"), cfg.vector(section, "upper"));
}

Box InputBox(const ExperimentConfig& cfg) {
  return Box(Vector::Constant(1, cfg.number("controller", "u_lower")),
             Vector::Constant(1, cfg.number("controller", "u_upper")));
}

CertificationSettings ConfigSettings(const ExperimentConfig& cfg) {
  CertificationSettings s;
  s.bound_mode =
      cfg.text("experiment", "bound_mode") == "combined" ? BoundMode::kCombined : BoundMode::kSplit;
  s.margin_mode = cfg.text("certification", "margin_mode") == "pointwise" ? MarginMode::kPointwise
                                                                          : MarginMode::kLipschitz;
  s.origin_exclusion = cfg.number("certification", "origin_exclusion");
  return s;
}

OracleOptions ConfigOracle(const ExperimentConfig& cfg) {
  OracleOptions o;
  o.horizon = cfg.number("certification", "oracle_horizon");
  o.dt = cfg.number("certification", "oracle_dt");
  o.conv_radius = cfg.number("certification", "conv_radius");
  return o;
}

// Lipschitz constant of the closed-loop Vdot over the state domain.
void AssembleLipschitz(RoaScenario* s, int bound_grid) {
  const Box& domain = s->system.state_domain;
  std::vector<OutputKernelBounds> kb(s->kernels.size());
  for (std::size_t d = 0; d < s->kernels.size(); ++d) {
    if (!s->kernels[d]) continue;
    const auto& ck = *s->kernels[d];
    if (ck.kf()) kb[d].kf = kernel_bounds(*ck.kf(), domain, bound_grid);
    for (const auto& kg : ck.kg()) {
      kb[d].kg.push_back(kg ? std::optional<KernelBounds>(kernel_bounds(*kg, domain, bound_grid))
                            : std::nullopt);
    }
  }
  const NominalModel nominal = s->nominal;
  const Policy policy = s->policy;
  const VectorField closed = [nominal, policy](const Vector& x) {
    return Vector(nominal(x, policy(x)));
  };
  const int field_grid = domain.dim() == 1 ? 2001 : 201;
  const FieldBounds field = closed_loop_field_bounds(closed, domain, field_grid);
  const double pi_lip = policy_lipschitz(policy, domain, field_grid);
  s->lipschitz = closed_loop_lipschitz(s->bounds, kb, field, pi_lip, *s->lyap);
  s->lipschitz_nominal = s->lyap->hessian_sup() * field.sup + s->lyap->grad_sup() * field.lip;
  s->lipschitz_gp = s->lipschitz - s->lipschitz_nominal;
}

double AutoOr(const ExperimentConfig& cfg, const std::string& key, double automatic) {
  return cfg.is_auto("bounds", key) ? automatic : cfg.number("bounds", key);
}

}  // namespace

RoaScenario make_exp1d(const ExperimentConfig& cfg) {
  if (cfg.scenario() != "exp1d") throw InputError("make_exp1d: config is for " + cfg.scenario());
  RoaScenario s;
  s.name = "exp1d";
  const Box domain = ConfigBox(cfg, "domain");
  if (domain.dim() != 1) throw InputError("exp1d: domain must be one-dimensional");
  const double lo = domain.lower[0];
  const double hi = domain.upper[0];
  const auto kf = cfg.kernel("kernel.f");
  if (!kf) throw InputError("exp1d: kernel.f is required");

  // Truth: xdot = f(x) + u with f drawn from the kernel, pinned at +-pin.
  const double pin = cfg.number("truth", "pin");
  const double slope = cfg.number("truth", "pin_slope");
  SamplePins pins;
  pins.points = Matrix(2, 1);
  pins.points << -pin, pin;
  pins.values = slope * pins.points.col(0);
  s.drift = sample_gp_function(*kf, linspace_grid(lo, hi, cfg.integer("truth", "centers")),
                               static_cast<std::uint64_t>(cfg.integer("experiment", "seed")),
                               cfg.number("truth", "amplitude"), pins);
  const GpSample drift = *s.drift;

  const Box input_box = InputBox(cfg);
  s.system.n = 1;
  s.system.m = 1;
  s.system.f = [drift](const Vector& x) { return Vector::Constant(1, drift(x)); };
  s.system.g = [](const Vector&) { return Matrix::Identity(1, 1); };
  s.system.state_domain = domain;
  s.system.input_set = input_box;
  s.system.label = "exp1d";

  s.nominal.f_hat = [](const Vector&) { return Vector::Zero(1); };
  s.nominal.g_hat = [](const Vector&) { return Matrix::Identity(1, 1); };

  const double gain = cfg.number("data", "policy_gain");
  s.policy = [gain, input_box](const Vector& x) { return input_box.clamp(-gain * x); };

  // Training data on a uniform grid with inputs from the policy.
  const int count = cfg.integer("data", "points");
  const Matrix X = linspace_grid(lo, hi, count);
  Matrix U(count, 1);
  for (int p = 0; p < count; ++p) U.row(p) = s.policy(X.row(p).transpose()).transpose();
  s.data = collect_measurements(s.system, s.nominal, X, U);
  s.kernels = {CompositeKernel(kf, {std::nullopt}, 1)};

  const double safety = cfg.number("bounds", "safety");
  RkhsBounds b;
  b.B_f = AutoOr(cfg, "B_f", safety * drift.rkhs_norm());
  b.B_g = cfg.number("bounds", "B_g");
  b.B_fg = AutoOr(cfg, "B_fg", safety * drift.rkhs_norm());
  b.B_pi = AutoOr(cfg, "B_pi", gain * std::max(std::abs(lo), std::abs(hi)));
  s.bounds = {b};

  s.lyap = std::make_shared<QuadraticLyapunov>(Matrix::Identity(1, 1), domain);
  s.grid = Grid::Uniform(domain, cfg.number("experiment", "tau"));
  s.c_max = std::max(lo * lo, hi * hi);
  s.settings = ConfigSettings(cfg);
  s.oracle = ConfigOracle(cfg);
  s.jitter = cfg.number("experiment", "jitter");
  s.iterations = cfg.integers("experiment", "cg_iters");
  AssembleLipschitz(&s, cfg.integer("bounds", "bound_grid"));
  s.settings.lipschitz = s.lipschitz;
  return s;
}

RoaScenario make_pendulum_roa(const ExperimentConfig& cfg) {
  if (cfg.scenario() != "pendulum-roa") {
    throw InputError("make_pendulum_roa: config is for " + cfg.scenario());
  }
  RoaScenario s;
  s.name = "pendulum-roa";
  const Box domain = ConfigBox(cfg, "domain");
  if (domain.dim() != 2) throw InputError("pendulum-roa: domain must be two-dimensional");
  const Box input_box = InputBox(cfg);

  PendulumParams truth{cfg.number("pendulum", "mass"), cfg.number("pendulum", "length"),
                       cfg.number("pendulum", "friction"), cfg.number("pendulum", "gravity")};
  PendulumParams model{cfg.number("pendulum", "nominal_mass"), truth.length,
                       cfg.number("pendulum", "nominal_friction"), truth.gravity};
  s.system = make_pendulum(truth, domain, input_box);
  s.nominal = make_pendulum_nominal(model);

  Matrix A, B;
  pendulum_linearization(model, &A, &B);
  const Vector q = cfg.vector("lqr", "q");
  const Vector r = cfg.vector("lqr", "r");
  if (q.size() != 2 || r.size() != 1) throw InputError("pendulum-roa: lqr.q needs 2, lqr.r 1 entry");
  s.lqr = lqr_gain(A, B, q.asDiagonal(), r.asDiagonal());
  s.policy = linear_feedback(s.lqr->K, input_box);
  s.lyap = std::make_shared<QuadraticLyapunov>(s.lqr->P, domain);

  // Latin hypercube over the bounding box of the data level set.
  const double level = cfg.number("data", "level");
  const Matrix Pinv = s.lqr->P.inverse();
  Vector half(2);
  for (int d = 0; d < 2; ++d) half[d] = std::sqrt(level * Pinv(d, d));
  const Box data_box(domain.clamp(-half), domain.clamp(half));
  const auto seed = static_cast<std::uint64_t>(cfg.integer("experiment", "seed"));
  const Matrix X = latin_hypercube(data_box, cfg.integer("data", "points"), seed);
  Matrix U(X.rows(), 1);
  for (int p = 0; p < X.rows(); ++p) U.row(p) = s.policy(X.row(p).transpose()).transpose();
  s.data = collect_measurements(s.system, s.nominal, X, U);

  // Only the angular acceleration is uncertain.
  s.kernels = {std::nullopt,
               CompositeKernel(cfg.kernel("kernel.f"), {cfg.kernel("kernel.g")}, 2)};
  RkhsBounds b;
  b.B_f = cfg.number("bounds", "B_f");
  b.B_g = cfg.number("bounds", "B_g");
  b.B_fg = cfg.number("bounds", "B_fg");
  b.B_pi = AutoOr(cfg, "B_pi",
                  std::max(std::abs(input_box.lower[0]), std::abs(input_box.upper[0])));
  s.bounds = {RkhsBounds{}, b};

  const double level_max = cfg.number("certification", "level_max");
  const Grid full = Grid::Uniform(domain, cfg.number("experiment", "tau"));
  std::vector<int> keep;
  for (int i = 0; i < full.size(); ++i) {
    if (s.lyap->value(full.point(i)) <= level_max) keep.push_back(i);
  }
  s.grid.tau = full.tau;
  s.grid.points.resize(static_cast<Eigen::Index>(keep.size()), 2);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    s.grid.points.row(static_cast<Eigen::Index>(k)) = full.points.row(keep[k]);
  }
  s.c_max = level_max;
  s.settings = ConfigSettings(cfg);
  s.oracle = ConfigOracle(cfg);
  s.jitter = cfg.number("experiment", "jitter");
  s.iterations = cfg.integers("experiment", "cg_iters");
  AssembleLipschitz(&s, cfg.integer("bounds", "bound_grid"));
  s.settings.lipschitz = s.lipschitz;
  return s;
}

RoaScenario make_roa_scenario(const ExperimentConfig& cfg) {
  if (cfg.scenario() == "exp1d") return make_exp1d(cfg);
  if (cfg.scenario() == "pendulum-roa") return make_pendulum_roa(cfg);
  throw InputError("make_roa_scenario: " + cfg.scenario() + " is not a region-of-attraction study");
}

LearnedModel learned_model(const RoaScenario& s, int iterations, bool with_split) {
  LearnedModel model;
  model.nominal = s.nominal;
  model.bounds = s.bounds;
  for (std::size_t d = 0; d < s.kernels.size(); ++d) {
    if (!s.kernels[d]) {
      model.posteriors.push_back(std::nullopt);
      continue;
    }
    const int iters = std::min(iterations, s.data[d].size());
    model.posteriors.push_back(iterative_posterior(*s.kernels[d], s.data[d],
                                                   s.nominal.output(static_cast<int>(d)), iters,
                                                   with_split, s.jitter));
  }
  return model;
}

LearnedModel prior_model(const RoaScenario& s) {
  LearnedModel model;
  model.nominal = s.nominal;
  model.posteriors.assign(s.kernels.size(), std::nullopt);
  model.bounds.assign(s.kernels.size(), RkhsBounds{});
  return model;
}

CertificationProblem certification_problem(const RoaScenario& s, const LearnedModel& model,
                                           Awareness awareness, BoundMode mode) {
  CertificationSettings settings = s.settings;
  settings.awareness = awareness;
  settings.bound_mode = mode;
  return CertificationProblem(model, s.lyap, s.policy, s.grid, settings);
}

RoaEstimate certify(const RoaScenario& s, const LearnedModel& model, Awareness awareness,
                    BoundMode mode, int iteration) {
  return max_certified_level(certification_problem(s, model, awareness, mode), s.c_max,
                             iteration);
}

std::vector<bool> roa_oracle(const RoaScenario& s) {
  OracleOptions o = s.oracle;
  o.level_cap = std::min(o.level_cap, s.c_max);
  return true_roa_oracle(s.system, s.policy, s.grid, o, s.lyap.get());
}

double true_vdot(const RoaScenario& s, const Vector& x, const Vector& u) {
  return s.lyap->gradient(x).dot(s.system(x, u));
}

int count_exceeding(const std::vector<int>& certified, const std::vector<bool>& oracle) {
  int count = 0;
  for (int i : certified) {
    if (!oracle.at(static_cast<std::size_t>(i))) ++count;
  }
  return count;
}

double oracle_interval_endpoint(const Grid& grid, const std::vector<bool>& oracle) {
  if (grid.points.cols() != 1) throw InputError("oracle_interval_endpoint: grid must be 1D");
  int origin = 0;
  for (int i = 1; i < grid.size(); ++i) {
    if (std::abs(grid.points(i, 0)) < std::abs(grid.points(origin, 0))) origin = i;
  }
  if (!oracle[origin]) return 0.0;
  int lo = origin;
  int hi = origin;
  while (lo > 0 && oracle[lo - 1]) --lo;
  while (hi + 1 < grid.size() && oracle[hi + 1]) ++hi;
  return std::min(std::abs(grid.points(lo, 0)), std::abs(grid.points(hi, 0)));
}

}  // namespace cagp
