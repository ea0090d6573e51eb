#include "cagp/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cagp {
namespace {

// Scenario defaults, written in the config format itself so that the sample
// files under configs/ and these tables cannot drift apart.

constexpr const char* kExp1dDefaults = R"(
[experiment]
scenario = exp1d
seed = 190
cg_iters = 0,4,12,25
mode = both
bound_mode = split
tau = 0.005
output = out/exp1d
jitter = 1e-10

[domain]
lower = -1
upper = 1

# Unknown drift: a GP sample pinned so that f(x) = pin_slope * x at +-pin.
[truth]
centers = 8
amplitude = 1.5
pin = 0.921
pin_slope = 2.5

[kernel.f]
type = product

[kernel.f.left]
type = linear
variance = 2

[kernel.f.right]
type = matern52
variance = 1
lengthscale = 0.5

[data]
points = 25
policy_gain = 2.5

# auto: safety times the RKHS norm of the sampled function.
[bounds]
B_f = auto
B_g = 0
B_fg = auto
B_pi = auto
safety = 1.2
bound_grid = 512

[certification]
margin_mode = pointwise
origin_exclusion = 0.3
oracle_horizon = 20
oracle_dt = 0.01
conv_radius = 0.01

[controller]
weight = 1
slack_weight = 1e4
rate = 1
u_lower = -10
u_upper = 10

[simulation]
dt = 0.001
horizon = 10
x0 = 0.9,-0.9,0.5,-0.5
stop_radius = 0.001
)";

constexpr const char* kPendulumDefaults = R"(
[experiment]
scenario = pendulum-roa
seed = 10
cg_iters = 5,10,25,100
mode = both
bound_mode = split
tau = 0.01
output = out/pendulum-roa
jitter = 1e-10

[domain]
lower = -1.2,-6
upper = 1.2,6

[pendulum]
mass = 0.15
length = 0.5
friction = 0.05
gravity = 9.81
nominal_mass = 0.1
nominal_friction = 0

[lqr]
q = 1,0.1
r = 10

# Residual of the angular acceleration: a drift over (theta, theta_dot) that
# vanishes at the upright equilibrium, plus an unknown constant input gain.
[kernel.f]
type = product

[kernel.f.left]
type = linear
variance = 1

[kernel.f.right]
type = squared_exponential
variance = 1
lengthscale = 1.5

[kernel.g]
type = constant
variance = 400

[data]
points = 100
level = 0.6

[bounds]
B_f = 3
B_g = 1
B_fg = 3
B_pi = auto
safety = 1.2
bound_grid = 64

[certification]
margin_mode = pointwise
origin_exclusion = 0.05
oracle_horizon = 20
oracle_dt = 0.01
conv_radius = 0.01
level_max = 1.5

[controller]
weight = 1
slack_weight = 1e4
rate = 1
u_lower = -0.5
u_upper = 0.5

[simulation]
dt = 0.001
horizon = 10
x0 = 0.4,0
stop_radius = 0.001
)";

constexpr const char* kTrackingDefaults = R"(
[experiment]
scenario = tracking3d
seed = 5
cg_iters = 5,10,15
mode = both
bound_mode = split
tau = 0.01
output = out/tracking3d
jitter = 1e-10

[tracking]
mass = 1
gain = 1
radius = 1
omega = 1
height = 1
window = 20
refit_rate = 10
u_limit = 40
initial_offset = 0,0,0

# Disturbance force per axis: a sample of kernel.f over (p, v), expanded on
# Latin-hypercube centers drawn from this box.
[disturbance]
centers = 40
lower = -1.5,-1.5,0.5,-1.5,-1.5,-0.5
upper = 1.5,1.5,1.5,1.5,1.5,0.5

[kernel.f]
type = squared_exponential
variance = 9
lengthscale = 1.5

[bounds]
B_fg = auto
safety = 1.2

[simulation]
dt = 0.001
horizon = 20
)";

const char* DefaultsText(const std::string& scenario) {
  if (scenario == "exp1d") return kExp1dDefaults;
  if (scenario == "pendulum-roa") return kPendulumDefaults;
  if (scenario == "tracking3d") return kTrackingDefaults;
  return nullptr;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Trim(item));
  return out;
}

bool ParseDouble(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, *out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(*out);
}

bool ParseInt(const std::string& s, long long* out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), *out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool ParseNumberList(const std::string& s, std::vector<double>* out) {
  out->clear();
  for (const auto& item : SplitList(s)) {
    double v = 0.0;
    if (!ParseDouble(item, &v)) return false;
    out->push_back(v);
  }
  return !out->empty();
}

bool IsKernelSection(const std::string& name) { return name.rfind("kernel.", 0) == 0; }

const std::set<std::string> kKernelKeys = {"type", "variance", "lengthscale", "factor"};

const std::map<std::string, std::set<std::string>> kEnums = {
    {"experiment.mode", {"aware", "agnostic", "both"}},
    {"experiment.bound_mode", {"split", "combined"}},
    {"certification.margin_mode", {"lipschitz", "pointwise"}},
};

std::string Where(const ConfigFile::Entry* e) {
  return e && e->line > 0 ? "line " + std::to_string(e->line) + ": " : "";
}

// Parses a kernel subtree, appending problems instead of throwing.
std::optional<KernelSpec> ParseKernel(const ConfigFile& file, const std::string& name,
                                      std::vector<std::string>* problems) {
  const auto* section = file.find_section(name);
  if (!section) {
    problems->push_back("missing kernel section [" + name + "]");
    return std::nullopt;
  }
  const auto* type = file.find(name, "type");
  if (!type) {
    problems->push_back("[" + name + "] needs a type");
    return std::nullopt;
  }
  auto num = [&](const std::string& key) -> double {
    const auto* e = file.find(name, key);
    double v = 0.0;
    if (!e) {
      problems->push_back("[" + name + "] type " + type->value + " needs " + key);
    } else if (!ParseDouble(e->value, &v)) {
      problems->push_back(Where(e) + name + "." + key + ": not a number: '" + e->value + "'");
    }
    return v;
  };
  const std::string& t = type->value;
  try {
    if (t == "none") return std::nullopt;
    if (t == "squared_exponential") {
      const double var = num("variance");
      const double ell = num("lengthscale");
      return KernelSpec::SquaredExponential(var, ell);
    }
    if (t == "matern52") {
      const double var = num("variance");
      const double ell = num("lengthscale");
      return KernelSpec::Matern52(var, ell);
    }
    if (t == "linear") return KernelSpec::Linear(num("variance"));
    if (t == "constant") return KernelSpec::Constant(num("variance"));
    if (t == "product" || t == "sum") {
      auto l = ParseKernel(file, name + ".left", problems);
      auto r = ParseKernel(file, name + ".right", problems);
      if (!l || !r) return std::nullopt;
      return t == "product" ? KernelSpec::Product(*l, *r) : KernelSpec::Sum(*l, *r);
    }
    if (t == "scaled") {
      const double factor = num("factor");
      auto base = ParseKernel(file, name + ".base", problems);
      if (!base) return std::nullopt;
      return KernelSpec::Scaled(*base, factor);
    }
  } catch (const InputError& e) {
    if (problems->empty()) problems->push_back(Where(type) + "[" + name + "]: " + e.what());
    return std::nullopt;
  }
  problems->push_back(Where(type) + name + ".type: unknown kernel '" + t + "'");
  return std::nullopt;
}

std::string JoinProblems(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

}  // namespace

ConfigError::ConfigError(const std::vector<std::string>& problems)
    : InputError(JoinProblems(problems)), problems_(problems) {}

ConfigFile ConfigFile::Parse(const std::string& text, const std::string& origin) {
  ConfigFile file;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  Section* current = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = Trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const std::string at = origin + ":" + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        problems.push_back(at + "malformed section header '" + s + "'");
        current = nullptr;
        continue;
      }
      const std::string name = Trim(s.substr(1, s.size() - 2));
      if (file.find_section(name)) {
        problems.push_back(at + "duplicate section [" + name + "]");
        current = nullptr;
        continue;
      }
      file.sections.push_back({name, {}, line});
      current = &file.sections.back();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      problems.push_back(at + "expected 'key = value', got '" + s + "'");
      continue;
    }
    const std::string key = Trim(s.substr(0, eq));
    std::string value = Trim(s.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = Trim(value.substr(0, hash));
    if (!current) {
      problems.push_back(at + "key '" + key + "' outside of any section");
      continue;
    }
    if (key.empty()) {
      problems.push_back(at + "empty key");
      continue;
    }
    const bool dup = std::any_of(current->entries.begin(), current->entries.end(),
                                 [&](const Entry& e) { return e.key == key; });
    if (dup) {
      problems.push_back(at + "duplicate key " + current->name + "." + key);
      continue;
    }
    current->entries.push_back({key, value, line});
  }
  if (!problems.empty()) throw ConfigError(problems);
  return file;
}

std::string ConfigFile::Serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : sections) {
    if (!first) out << '\n';
    first = false;
    out << '[' << s.name << "]\n";
    for (const auto& e : s.entries) out << e.key << " = " << e.value << '\n';
  }
  return out.str();
}

const ConfigFile::Section* ConfigFile::find_section(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section,
                                          const std::string& key) const {
  const auto* s = find_section(section);
  if (!s) return nullptr;
  for (const auto& e : s->entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
  auto it = std::find_if(sections.begin(), sections.end(),
                         [&](const Section& s) { return s.name == section; });
  if (it == sections.end()) {
    sections.push_back({section, {}, 0});
    it = std::prev(sections.end());
  }
  for (auto& e : it->entries) {
    if (e.key == key) {
      e.value = value;
      return;
    }
  }
  it->entries.push_back({key, value, 0});
}

void ConfigFile::erase_subtree(const std::string& prefix) {
  std::erase_if(sections, [&](const Section& s) {
    return s.name == prefix || s.name.rfind(prefix + ".", 0) == 0;
  });
}

bool ConfigFile::operator==(const ConfigFile& other) const {
  if (sections.size() != other.sections.size()) return false;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& a = sections[i];
    const auto& b = other.sections[i];
    if (a.name != b.name || a.entries.size() != b.entries.size()) return false;
    for (std::size_t j = 0; j < a.entries.size(); ++j) {
      if (a.entries[j].key != b.entries[j].key || a.entries[j].value != b.entries[j].value) {
        return false;
      }
    }
  }
  return true;
}

const std::vector<std::string>& ExperimentConfig::Scenarios() {
  static const std::vector<std::string> names = {"exp1d", "pendulum-roa", "tracking3d"};
  return names;
}

ExperimentConfig ExperimentConfig::Defaults(const std::string& scenario) {
  const char* text = DefaultsText(scenario);
  if (!text) {
    std::string known;
    for (const auto& s : Scenarios()) known += (known.empty() ? "" : ", ") + s;
    throw ConfigError({"unknown scenario '" + scenario + "' (known: " + known + ")"});
  }
  ExperimentConfig cfg;
  cfg.scenario_ = scenario;
  cfg.file_ = ConfigFile::Parse(text, "<defaults:" + scenario + ">");
  for (auto& s : cfg.file_.sections) {
    s.line = 0;
    for (auto& e : s.entries) e.line = 0;
  }
  return cfg;
}

std::string ExperimentConfig::text(const std::string& section, const std::string& key) const {
  const auto* e = file_.find(section, key);
  if (!e) throw InputError("config: no key " + section + "." + key);
  return e->value;
}

double ExperimentConfig::number(const std::string& section, const std::string& key) const {
  double v = 0.0;
  if (!ParseDouble(text(section, key), &v)) {
    throw InputError("config: " + section + "." + key + " is not a number");
  }
  return v;
}

int ExperimentConfig::integer(const std::string& section, const std::string& key) const {
  long long v = 0;
  if (!ParseInt(text(section, key), &v)) {
    throw InputError("config: " + section + "." + key + " is not an integer");
  }
  return static_cast<int>(v);
}

bool ExperimentConfig::boolean(const std::string& section, const std::string& key) const {
  const std::string v = text(section, key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw InputError("config: " + section + "." + key + " is not true/false");
}

std::vector<double> ExperimentConfig::numbers(const std::string& section,
                                              const std::string& key) const {
  std::vector<double> out;
  if (!ParseNumberList(text(section, key), &out)) {
    throw InputError("config: " + section + "." + key + " is not a number list");
  }
  return out;
}

std::vector<int> ExperimentConfig::integers(const std::string& section,
                                            const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : SplitList(text(section, key))) {
    long long v = 0;
    if (!ParseInt(item, &v)) {
      throw InputError("config: " + section + "." + key + " is not an integer list");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

Vector ExperimentConfig::vector(const std::string& section, const std::string& key) const {
  const auto v = numbers(section, key);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool ExperimentConfig::is_auto(const std::string& section, const std::string& key) const {
  return text(section, key) == "auto";
}

std::optional<KernelSpec> ExperimentConfig::kernel(const std::string& section) const {
  std::vector<std::string> problems;
  auto k = ParseKernel(file_, section, &problems);
  if (!problems.empty()) throw ConfigError(problems);
  return k;
}

void ExperimentConfig::set(const std::string& section, const std::string& key,
                           const std::string& value) {
  if (!IsKernelSection(section) && !file_.find(section, key)) {
    throw ConfigError({"unknown key " + section + "." + key});
  }
  ExperimentConfig next = *this;
  next.file_.set(section, key, value);
  next.check();
  *this = std::move(next);
}

// Values are typed by their default: numbers stay numbers, lists stay lists,
// "auto" admits a number, booleans stay booleans.
void ExperimentConfig::check() const {
  std::vector<std::string> problems;
  // Keys with a type error skip the semantic checks below, which would only
  // repeat the complaint.
  std::set<std::string> bad;
  const ExperimentConfig defaults = Defaults(scenario_);
  for (const auto& section : file_.sections) {
    if (IsKernelSection(section.name)) continue;
    for (const auto& e : section.entries) {
      const std::string path = section.name + "." + e.key;
      const auto* d = defaults.file_.find(section.name, e.key);
      if (!d) {
        problems.push_back(Where(&e) + "unknown key " + path);
        continue;
      }
      const auto en = kEnums.find(path);
      if (en != kEnums.end()) {
        if (!en->second.count(e.value)) {
          std::string allowed;
          for (const auto& a : en->second) allowed += (allowed.empty() ? "" : "|") + a;
          problems.push_back(Where(&e) + path + ": expected " + allowed + ", got '" + e.value +
                             "'");
          bad.insert(path);
        }
        continue;
      }
      std::vector<double> nums;
      if (d->value == "auto") {
        if (e.value != "auto" && !ParseNumberList(e.value, &nums)) {
          problems.push_back(Where(&e) + path + ": expected a number or auto, got '" + e.value +
                             "'");
          bad.insert(path);
        }
      } else if (d->value == "true" || d->value == "false") {
        if (e.value != "true" && e.value != "false") {
          problems.push_back(Where(&e) + path + ": expected true or false");
          bad.insert(path);
        }
      } else if (ParseNumberList(d->value, &nums)) {
        if (!ParseNumberList(e.value, &nums)) {
          problems.push_back(Where(&e) + path + ": expected a number list, got '" + e.value +
                             "'");
          bad.insert(path);
        }
      } else if (e.value.empty()) {
        problems.push_back(Where(&e) + path + ": empty value");
        bad.insert(path);
      }
    }
  }
  for (const auto& section : file_.sections) {
    if (!IsKernelSection(section.name)) continue;
    for (const auto& e : section.entries) {
      if (!kKernelKeys.count(e.key)) {
        problems.push_back(Where(&e) + "unknown key " + section.name + "." + e.key);
      }
    }
  }

  // Semantic checks.
  auto entry = [&](const std::string& s, const std::string& k) { return file_.find(s, k); };
  auto typed = [&](const std::string& s, const std::string& k) {
    return file_.find(s, k) && !bad.count(s + "." + k);
  };
  auto positive = [&](const std::string& s, const std::string& k) {
    if (typed(s, k) && !(number(s, k) > 0.0)) {
      problems.push_back(Where(entry(s, k)) + s + "." + k + ": must be positive");
    }
  };
  if (text("experiment", "scenario") != scenario_) {
    problems.push_back(Where(entry("experiment", "scenario")) + "scenario mismatch");
  }
  if (typed("experiment", "seed")) {
    try {
      if (integer("experiment", "seed") < 0) throw InputError("");
    } catch (const InputError&) {
      problems.push_back(Where(entry("experiment", "seed")) +
                         "experiment.seed: expected a non-negative integer");
    }
  }
  const bool has_data = file_.find("data", "points") != nullptr;
  const std::string cap_section = has_data ? "data" : "tracking";
  const std::string cap_key = has_data ? "points" : "window";
  if (typed("experiment", "cg_iters") && typed(cap_section, cap_key)) {
    try {
      const auto iters = integers("experiment", "cg_iters");
      const int cap = integer(cap_section, cap_key);
      for (int i : iters) {
        if (i < 0 || i > cap) {
          problems.push_back(Where(entry("experiment", "cg_iters")) +
                             "experiment.cg_iters: " + std::to_string(i) + " outside [0, " +
                             std::to_string(cap) + "]");
        }
      }
    } catch (const InputError&) {
      problems.push_back(Where(entry("experiment", "cg_iters")) +
                         "experiment.cg_iters: expected an integer list");
    }
  }
  positive("experiment", "tau");
  positive("experiment", "jitter");
  positive("simulation", "dt");
  positive("simulation", "horizon");
  positive("bounds", "safety");
  positive("certification", "oracle_horizon");
  positive("certification", "oracle_dt");
  positive("certification", "conv_radius");
  if (typed("domain", "lower") && typed("domain", "upper")) {
    const Vector lo = vector("domain", "lower");
    const Vector hi = vector("domain", "upper");
    if (lo.size() != hi.size() || (lo.array() >= hi.array()).any()) {
      problems.push_back(Where(entry("domain", "lower")) +
                         "domain: lower and upper must have equal length with lower < upper");
    }
  }
  if (typed("controller", "u_lower") && typed("controller", "u_upper") &&
      !(number("controller", "u_lower") < number("controller", "u_upper"))) {
    problems.push_back(Where(entry("controller", "u_lower")) +
                       "controller: u_lower must be below u_upper");
  }
  for (const auto& name : {"kernel.f", "kernel.g"}) {
    if (file_.find_section(name)) ParseKernel(file_, name, &problems);
  }
  if (!problems.empty()) throw ConfigError(problems);
}

ExperimentConfig validate_config_text(const std::string& text, const std::string& origin) {
  const ConfigFile user = ConfigFile::Parse(text, origin);
  const auto* scenario = user.find("experiment", "scenario");
  if (!scenario) throw ConfigError({origin + ": experiment.scenario is required"});
  ExperimentConfig cfg = ExperimentConfig::Defaults(scenario->value);

  std::vector<std::string> problems;
  auto root_of = [](const std::string& name) {
    if (!IsKernelSection(name)) return name;
    const auto dot = name.find('.', 7);
    return dot == std::string::npos ? name : name.substr(0, dot);
  };
  std::vector<std::string> roots;  // default section order
  for (const auto& s : cfg.file_.sections) {
    if (std::find(roots.begin(), roots.end(), root_of(s.name)) == roots.end()) {
      roots.push_back(root_of(s.name));
    }
  }
  auto known_root = [&](const std::string& name) {
    return std::find(roots.begin(), roots.end(), root_of(name)) != roots.end();
  };
  // A user kernel subtree replaces the default one wholesale.
  std::set<std::string> replaced;
  for (const auto& s : user.sections) {
    if (!IsKernelSection(s.name) || !known_root(s.name)) continue;
    if (replaced.insert(root_of(s.name)).second) cfg.file_.erase_subtree(root_of(s.name));
  }
  for (const auto& s : user.sections) {
    if (IsKernelSection(s.name) && !known_root(s.name)) {
      problems.push_back(origin + ":" + std::to_string(s.line) + ": unknown section [" + s.name +
                         "] (" + cfg.scenario() + " has no " + root_of(s.name) + ")");
      continue;
    }
    if (!IsKernelSection(s.name) && !cfg.file_.find_section(s.name)) {
      problems.push_back(origin + ":" + std::to_string(s.line) + ": unknown section [" +
                         s.name + "]");
      continue;
    }
    if (IsKernelSection(s.name) && !cfg.file_.find_section(s.name)) {
      cfg.file_.sections.push_back({s.name, {}, s.line});
    }
    for (const auto& e : s.entries) {
      if (!IsKernelSection(s.name) && !cfg.file_.find(s.name, e.key)) {
        problems.push_back(origin + ":" + std::to_string(e.line) + ": unknown key " + s.name +
                           "." + e.key);
        continue;
      }
      cfg.file_.set(s.name, e.key, e.value);
      // Keep the user's line for error messages.
      for (auto& sec : cfg.file_.sections) {
        if (sec.name != s.name) continue;
        for (auto& ce : sec.entries) {
          if (ce.key == e.key) ce.line = e.line;
        }
      }
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  // Replaced kernel subtrees go back where the defaults had them.
  auto rank = [&](const ConfigFile::Section& sec) {
    return std::find(roots.begin(), roots.end(), root_of(sec.name)) - roots.begin();
  };
  std::stable_sort(cfg.file_.sections.begin(), cfg.file_.sections.end(),
                   [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
  try {
    cfg.check();
  } catch (const ConfigError& e) {
    // "line N: ..." becomes "origin:N: ..." to match the parse errors.
    std::vector<std::string> located;
    for (const auto& p : e.problems()) {
      if (p.rfind("line ", 0) == 0) {
        located.push_back(origin + ":" + p.substr(5));
      } else {
        located.push_back(origin + ": " + p);
      }
    }
    throw ConfigError(located);
  }
  return cfg;
}

ExperimentConfig validate_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return validate_config_text(ss.str(), path);
}

}  // namespace cagp
