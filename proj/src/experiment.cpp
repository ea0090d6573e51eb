#include "cagp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "cagp/controller.hpp"
#include "cagp/scenarios.hpp"
#include "cagp/tracking.hpp"

namespace cagp {
namespace fs = std::filesystem;

namespace {

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string Fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string Indexed(const std::string& prefix, int count) {
  std::string out;
  for (int d = 1; d <= count; ++d) out += "," + prefix + std::to_string(d);
  return out;
}

// Stages files in `<out>.partial` and publishes them on commit().
class Staging {
 public:
  explicit Staging(fs::path out) : out_(std::move(out)) {
    staging_ = out_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~Staging() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(staging_ / name, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + (staging_ / name).string());
    files_.push_back(name);
  }

  void commit() {
    fs::create_directories(out_);
    for (const auto& name : files_) {
      fs::remove(out_ / name);
      fs::rename(staging_ / name, out_ / name);
    }
    fs::remove_all(staging_);
    committed_ = true;
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path out_;
  fs::path staging_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

std::string Tag(Awareness a, int i) { return to_string(a) + "_i" + std::to_string(i); }

// Query points for the posterior CSV: 401 points in 1D, a 41 x 41 lattice in 2D.
std::vector<Vector> PosteriorQueries(const Box& domain) {
  std::vector<Vector> out;
  if (domain.dim() == 1) {
    const Matrix g = linspace_grid(domain.lower[0], domain.upper[0], 401);
    for (int p = 0; p < g.rows(); ++p) out.push_back(g.row(p).transpose());
    return out;
  }
  const int n = 41;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      Vector x(2);
      x[0] = domain.lower[0] + (domain.upper[0] - domain.lower[0]) * a / (n - 1);
      x[1] = domain.lower[1] + (domain.upper[1] - domain.lower[1]) * b / (n - 1);
      out.push_back(x);
    }
  }
  return out;
}

std::string PosteriorCsv(const RoaScenario& s, const LearnedModel& model) {
  const int n = s.system.n;
  const int m = s.system.m;
  std::ostringstream csv;
  csv << "output" << Indexed("x", n) << Indexed("u", m)
      << ",truth,mean,sd_math,sd_comp,sd_combined,bound\n";
  for (const Vector& x : PosteriorQueries(s.system.state_domain)) {
    const Vector u = s.policy(x);
    const Vector truth = s.system(x, u);
    for (int d = 0; d < model.dim(); ++d) {
      const auto& post = model.posteriors[static_cast<std::size_t>(d)];
      if (!post) continue;
      csv << d + 1;
      for (int k = 0; k < n; ++k) csv << ',' << Num(x[k]);
      for (int k = 0; k < m; ++k) csv << ',' << Num(u[k]);
      csv << ',' << Num(truth[d]) << ',' << Num(post->mean(x, u));
      for (auto mode : {VarianceMode::kMath, VarianceMode::kComp, VarianceMode::kCombined}) {
        csv << ',' << Num(std::sqrt(std::max(0.0, post->variance(x, u, mode))));
      }
      csv << ',' << Num(worst_case_bound(*post, model.bounds[static_cast<std::size_t>(d)], x, u))
          << '\n';
    }
  }
  return csv.str();
}

std::string RoaCsv(const RoaScenario& s, const CertificationProblem& problem,
                   const RoaEstimate& est, const std::vector<bool>& oracle) {
  std::vector<char> certified(static_cast<std::size_t>(s.grid.size()), 0);
  for (int i : est.certified_points) certified[static_cast<std::size_t>(i)] = 1;
  std::ostringstream csv;
  csv << Indexed("x", s.system.n).substr(1) << ",V,margin,threshold,certified,true_roa\n";
  for (int p = 0; p < s.grid.size(); ++p) {
    for (int k = 0; k < s.system.n; ++k) csv << (k ? "," : "") << Num(s.grid.points(p, k));
    csv << ',' << Num(problem.levels()[p]) << ',' << Num(problem.margins()[p]) << ','
        << Num(problem.thresholds()[p]) << ',' << int(certified[static_cast<std::size_t>(p)])
        << ',' << int(oracle[static_cast<std::size_t>(p)]) << '\n';
  }
  return csv.str();
}

// Largest |x| reached by a set of points of a 1D grid; for V = p x^2 this is
// the interval endpoint sqrt(c / p).
double Endpoint1d(const RoaScenario& s, double c) {
  return std::sqrt(c / s.lyap->P()(0, 0));
}

// Largest level whose sublevel set (grid points) lies inside the oracle set.
double OracleLevel(const RoaScenario& s, const std::vector<bool>& oracle) {
  double c = s.c_max;
  for (int p = 0; p < s.grid.size(); ++p) {
    if (!oracle[static_cast<std::size_t>(p)]) c = std::min(c, s.lyap->value(s.grid.point(p)));
  }
  return c;
}

struct TrajectoryStats {
  double max_vdot = -std::numeric_limits<double>::infinity();
  double final_norm = 0.0;
  int runs = 0;
};

SimulationOptions SimOptions(const ExperimentConfig& cfg) {
  SimulationOptions o;
  o.dt = cfg.number("simulation", "dt");
  o.horizon = cfg.number("simulation", "horizon");
  o.stop_radius = cfg.number("simulation", "stop_radius");
  return o;
}

std::vector<Vector> InitialStates(const ExperimentConfig& cfg, int n) {
  const Vector flat = cfg.vector("simulation", "x0");
  if (flat.size() % n != 0) {
    throw InputError("simulation.x0 must hold a multiple of " + std::to_string(n) + " values");
  }
  std::vector<Vector> out;
  for (Eigen::Index k = 0; k < flat.size(); k += n) out.push_back(flat.segment(k, n));
  return out;
}

// Closed-loop runs from every x0, written every `stride` steps plus the last.
std::string TrajectoryCsv(const RoaScenario& s, const Policy& policy, const ExperimentConfig& cfg,
                          TrajectoryStats* stats) {
  const SimulationOptions opt = SimOptions(cfg);
  const int stride = std::max(1, static_cast<int>(std::lround(0.01 / opt.dt)));
  const int n = s.system.n;
  const int m = s.system.m;
  std::ostringstream csv;
  csv << "run,t" << Indexed("x", n) << Indexed("u", m) << ",V,vdot_true\n";
  const auto starts = InitialStates(cfg, n);
  for (std::size_t r = 0; r < starts.size(); ++r) {
    const Trajectory traj = simulate(s.system, policy, starts[r], opt);
    const std::size_t last = traj.states.size() - 1;
    for (std::size_t k = 0; k <= last; ++k) {
      const Vector& x = traj.states[k];
      const Vector& u = traj.inputs[k];
      const double vdot = true_vdot(s, x, u);
      if (x.norm() >= opt.stop_radius) stats->max_vdot = std::max(stats->max_vdot, vdot);
      if (k % static_cast<std::size_t>(stride) != 0 && k != last) continue;
      csv << r + 1 << ',' << Num(traj.times[k]);
      for (int d = 0; d < n; ++d) csv << ',' << Num(x[d]);
      for (int d = 0; d < m; ++d) csv << ',' << Num(u[d]);
      csv << ',' << Num(s.lyap->value(x)) << ',' << Num(vdot) << '\n';
    }
    stats->final_norm = std::max(stats->final_norm, traj.states.back().norm());
    ++stats->runs;
  }
  return csv.str();
}

ControllerSettings SocpSettings(const RoaScenario& s, const ExperimentConfig& cfg,
                                Awareness awareness, BoundMode mode) {
  ControllerSettings c;
  c.awareness = awareness;
  c.bound_mode = mode;
  c.W = cfg.number("controller", "weight") * Matrix::Identity(s.system.m, s.system.m);
  c.p = cfg.number("controller", "slack_weight");
  c.lambda = cfg.number("controller", "rate");
  c.input_box = s.system.input_set;
  return c;
}

BoundMode ConfigBoundMode(const ExperimentConfig& cfg) {
  return cfg.text("experiment", "bound_mode") == "combined" ? BoundMode::kCombined
                                                            : BoundMode::kSplit;
}

void RunRoa(const ExperimentConfig& cfg, Staging* out, std::ostringstream* summary) {
  const RoaScenario s = make_roa_scenario(cfg);
  const BoundMode mode = ConfigBoundMode(cfg);
  const auto modes = configured_modes(cfg);
  const bool one_d = s.system.n == 1;
  const MarginMode other_margin = s.settings.margin_mode == MarginMode::kPointwise
                                      ? MarginMode::kLipschitz
                                      : MarginMode::kPointwise;

  const std::vector<bool> oracle = roa_oracle(s);
  int inside = 0;
  for (bool b : oracle) inside += b ? 1 : 0;

  *summary << "grid points " << s.grid.size() << ", tau " << Num(s.grid.tau) << ", c_max "
           << Num(s.c_max) << "\n";
  *summary << "Lipschitz constant of Vdot: " << Fixed(s.lipschitz, 3) << " (GP part "
           << Fixed(s.lipschitz_gp, 3) << ", nominal part " << Fixed(s.lipschitz_nominal, 3)
           << "), L*tau = " << Fixed(s.lipschitz * s.grid.tau, 4) << "\n";
  *summary << "margin mode " << to_string(s.settings.margin_mode) << ", diagnostic column uses "
           << to_string(other_margin) << "\n";
  *summary << "oracle: " << inside << " grid points converge";
  if (one_d) {
    *summary << ", true interval endpoint " << Fixed(oracle_interval_endpoint(s.grid, oracle), 4);
  }
  *summary << ", largest level inside " << Fixed(OracleLevel(s, oracle), 4) << "\n\n";

  *summary << "mode      i     c         " << (one_d ? "endpoint  " : "")
           << "certified  exceeding  c(" << to_string(other_margin) << ")\n";
  auto row = [&](const std::string& label, int i, const CertificationProblem& problem,
                 const RoaEstimate& est) {
    const RoaEstimate alt = max_certified_level(problem.with_margin_mode(other_margin), s.c_max, i);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-9s %-5d %-9.4f ", label.c_str(), i, est.c);
    *summary << buf;
    if (one_d) {
      std::snprintf(buf, sizeof buf, "%-9.4f ", Endpoint1d(s, est.c));
      *summary << buf;
    }
    std::snprintf(buf, sizeof buf, "%-10zu %-10d %.4f\n", est.certified_points.size(),
                  count_exceeding(est.certified_points, oracle), alt.c);
    *summary << buf;
  };

  {
    const LearnedModel prior = prior_model(s);
    const CertificationProblem problem =
        certification_problem(s, prior, Awareness::kAware, BoundMode::kSplit);
    const RoaEstimate est = max_certified_level(problem, s.c_max, 0);
    row("prior", 0, problem, est);
    out->write("roa_prior.csv", RoaCsv(s, problem, est, oracle));
  }

  std::ostringstream traj_summary;
  for (int i : s.iterations) {
    const auto model = std::make_shared<const LearnedModel>(learned_model(s, i, true));
    out->write("posterior_i" + std::to_string(i) + ".csv", PosteriorCsv(s, *model));
    for (Awareness a : modes) {
      const CertificationProblem problem = certification_problem(s, *model, a, mode);
      const RoaEstimate est = max_certified_level(problem, s.c_max, i);
      row(to_string(a), i, problem, est);
      out->write("roa_" + Tag(a, i) + ".csv", RoaCsv(s, problem, est, oracle));

      auto record = [&](const std::string& kind, const Policy& policy) {
        TrajectoryStats stats;
        out->write("traj_" + kind + "_" + Tag(a, i) + ".csv",
                   TrajectoryCsv(s, policy, cfg, &stats));
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-9s %-9s %-5d %-14.6f %.3g\n", kind.c_str(),
                      to_string(a).c_str(), i, stats.max_vdot, stats.final_norm);
        traj_summary << buf;
      };
      // The closed form needs a known input matrix; with a learned g only
      // the cone program applies.
      const bool g_known = std::none_of(s.kernels.begin(), s.kernels.end(), [](const auto& k) {
        return k && std::any_of(k->kg().begin(), k->kg().end(),
                                [](const auto& g) { return g.has_value(); });
      });
      if (g_known) record("explicit", explicit_feedback(model, s.lyap, a, mode));
      record("socp", socp_policy(model, s.lyap, SocpSettings(s, cfg, a, mode)));
    }
  }
  if (s.lqr) {
    TrajectoryStats stats;
    out->write("traj_lqr.csv", TrajectoryCsv(s, s.policy, cfg, &stats));
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-9s %-9s %-5s %-14.6f %.3g\n", "lqr", "-", "-",
                  stats.max_vdot, stats.final_norm);
    traj_summary << buf;
  }
  *summary << "\nclosed loop (max true Vdot while |x| >= stop_radius, largest final |x|)\n"
           << "policy    mode      i     max_vdot       final\n"
           << traj_summary.str();
}

void RunTracking(const ExperimentConfig& cfg, Staging* out, std::ostringstream* summary) {
  const TrackingSetup setup = make_tracking(cfg);
  const auto& sc = setup.scenario;
  const int stride = std::max(1, static_cast<int>(std::lround(0.01 / setup.settings.dt)));
  *summary << "disturbance bound per axis " << Fixed(setup.settings.bound, 4) << ", window "
           << setup.settings.window << ", refit rate " << Num(setup.settings.refit_rate)
           << " Hz\n\nmode      i     rms_error    max_error    max_|u|\n";
  for (int i : setup.iterations) {
    for (Awareness a : configured_modes(cfg)) {
      const TrackingRun run = run_tracking(sc, setup.settings, i, a);
      std::ostringstream csv;
      csv << "t,x1,x2,x3,r1,r2,r3,error,V,vdot_true,u1,u2,u3,unc_math,unc_comp\n";
      double max_u = 0.0;
      for (std::size_t k = 0; k < run.times.size(); ++k) {
        max_u = std::max(max_u, run.inputs[k].cwiseAbs().maxCoeff());
        if (k % static_cast<std::size_t>(stride) != 0 && k + 1 != run.times.size()) continue;
        const auto ref = sc.reference(run.times[k]);
        csv << Num(run.times[k]);
        for (int d = 0; d < 3; ++d) csv << ',' << Num(run.states[k][d]);
        for (int d = 0; d < 3; ++d) csv << ',' << Num(ref.p[d]);
        csv << ',' << Num(run.error[k]) << ',' << Num(run.lyapunov[k]) << ','
            << Num(run.vdot[k]);
        for (int d = 0; d < 3; ++d) csv << ',' << Num(run.inputs[k][d]);
        csv << ',' << Num(run.sigma_math[k]) << ',' << Num(run.sigma_comp[k]) << '\n';
      }
      out->write("tracking_" + Tag(a, i) + ".csv", csv.str());
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-9s %-5d %-12.6f %-12.6f %.3f\n", to_string(a).c_str(), i,
                    run.rms, *std::max_element(run.error.begin(), run.error.end()), max_u);
      *summary << buf;
    }
  }
}

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plots for one experiment directory. Usage: python3 plot.py [DIR]

Reads the CSVs written next to this script and saves PNG files beside them.
Needs matplotlib.
"""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def read(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


def name(path):
    return os.path.splitext(os.path.basename(path))[0]


def save(fig, stem):
    fig.tight_layout()
    fig.savefig(os.path.join(root, stem + ".png"), dpi=120)
    plt.close(fig)


for path in sorted(glob.glob(os.path.join(root, "posterior_i*.csv"))):
    d = read(path)
    if not d or "x2" in d:
        continue
    x = d["x1"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, d["truth"], "k", label="truth")
    ax.plot(x, d["mean"], "C0", label="mean")
    lo = [m - 2 * s for m, s in zip(d["mean"], d["sd_combined"])]
    hi = [m + 2 * s for m, s in zip(d["mean"], d["sd_combined"])]
    ax.fill_between(x, lo, hi, color="C0", alpha=0.2, label="2 sd combined")
    lo = [m - 2 * s for m, s in zip(d["mean"], d["sd_math"])]
    hi = [m + 2 * s for m, s in zip(d["mean"], d["sd_math"])]
    ax.fill_between(x, lo, hi, color="C1", alpha=0.3, label="2 sd math")
    ax.set_xlabel("x")
    ax.legend()
    ax.set_title(name(path))
    save(fig, name(path))

for path in sorted(glob.glob(os.path.join(root, "roa_*.csv"))):
    d = read(path)
    if not d:
        continue
    fig, ax = plt.subplots(figsize=(6, 4))
    if "x2" in d:
        for flag, style, label in (("true_roa", "0.8", "true ROA"), ("certified", "C0", "certified")):
            pts = [(a, b) for a, b, f in zip(d["x1"], d["x2"], d[flag]) if f > 0]
            if pts:
                ax.scatter(*zip(*pts), s=1, c=style, label=label)
        ax.set_xlabel("theta")
        ax.set_ylabel("theta_dot")
    else:
        ax.plot(d["x1"], d["margin"], "C0", label="Vdot upper bound")
        ax.plot(d["x1"], d["threshold"], "k--", lw=0.8, label="threshold")
        cert = [x for x, f in zip(d["x1"], d["certified"]) if f > 0]
        if cert:
            ax.axvspan(min(cert), max(cert), color="C2", alpha=0.15, label="certified")
        ax.set_xlabel("x")
    ax.legend(markerscale=8)
    ax.set_title(name(path))
    save(fig, name(path))

for path in sorted(glob.glob(os.path.join(root, "traj_*.csv"))):
    d = read(path)
    if not d:
        continue
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for run in sorted(set(d["run"])):
        idx = [k for k, r in enumerate(d["run"]) if r == run]
        t = [d["t"][k] for k in idx]
        ax1.plot(t, [d["x1"][k] for k in idx])
        ax2.plot(t, [d["vdot_true"][k] for k in idx])
    ax1.set_ylabel("x1")
    ax2.set_ylabel("true Vdot")
    ax2.axhline(0.0, color="k", lw=0.5)
    ax2.set_xlabel("t")
    ax1.set_title(name(path))
    save(fig, name(path))

tracking = sorted(glob.glob(os.path.join(root, "tracking_*.csv")))
if tracking:
    fig, ax = plt.subplots(figsize=(7, 4))
    for path in tracking:
        d = read(path)
        ax.plot(d["t"], d["error"], lw=0.8, label=name(path)[len("tracking_"):])
    ax.set_xlabel("t")
    ax.set_ylabel("|p - p_d|")
    ax.legend()
    save(fig, "tracking_error")
)PY";

}  // namespace

std::vector<Awareness> configured_modes(const ExperimentConfig& cfg) {
  const std::string mode = cfg.text("experiment", "mode");
  if (mode == "aware") return {Awareness::kAware};
  if (mode == "agnostic") return {Awareness::kAgnostic};
  return {Awareness::kAware, Awareness::kAgnostic};
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.text("experiment", "output");
  if (dir.empty()) throw InputError("experiment.output must name a directory");
  Staging out(dir);

  std::ostringstream summary;
  summary << "scenario " << cfg.scenario() << ", seed " << cfg.integer("experiment", "seed")
          << ", bound mode " << cfg.text("experiment", "bound_mode") << "\n";
  if (cfg.scenario() == "tracking3d") {
    RunTracking(cfg, &out, &summary);
  } else {
    RunRoa(cfg, &out, &summary);
  }
  out.write("summary.txt", summary.str());
  out.write("config.cfg", cfg.Serialize());
  out.write("plot.py", kPlotScript);
  out.commit();
  return {dir, out.files(), summary.str()};
}

}  // namespace cagp
