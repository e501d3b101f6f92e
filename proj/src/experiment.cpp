#include "maxent/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "maxent/csv.hpp"
#include "maxent/diagnostics.hpp"
#include "maxent/kernels.hpp"
#include "maxent/random.hpp"
#include "maxent/variational.hpp"

namespace maxent {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Toy: return "toy";
    case ExperimentKind::Gravity: return "gravity";
    case ExperimentKind::Seair: return "seair";
    case ExperimentKind::External: return "external";
  }
  return "unknown";
}

std::string content_hash(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// Object whose keys must all come from an allowed list.
class Fields {
 public:
  Fields(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!ok.count(it.key())) fail(join(path_, it.key()), "unknown field");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const {
    if (!j_.contains(key)) fail(join(path_, key), "required field missing");
    return j_.at(key);
  }
  std::string path(const char* key) const { return join(path_, key); }

 private:
  const json& j_;
  std::string path_;
};

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) fail(path, "must be > 0");
  return v;
}

std::size_t count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer()) {
    if (j.get<long long>() < 0) fail(path, "must be >= 0");
    return static_cast<std::size_t>(j.get<long long>());
  }
  fail(path, "expected a non-negative integer");
}

std::uint64_t seed_value(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  fail(path, "expected a non-negative integer");
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::size_t> counts(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of non-negative integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(count(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Point2 point(const json& j, const std::string& path) {
  const auto v = numbers(j, path);
  if (v.size() != 2) fail(path, "expected [x, y]");
  return {v[0], v[1]};
}

ErrorPrior parse_error(const json& j, const std::string& path) {
  Fields f(j, path, {"kind", "sigma", "b"});
  const auto kind = text(f.at("kind"), f.path("kind"));
  if (kind == "delta") {
    if (f.has("sigma") || f.has("b")) fail(path, "delta error prior takes no parameters");
    return ErrorPrior::delta();
  }
  if (kind == "gaussian") {
    if (f.has("b")) fail(f.path("b"), "unknown field for a gaussian error prior (use sigma)");
    return ErrorPrior::gaussian(positive(f.at("sigma"), f.path("sigma")));
  }
  if (kind == "laplace") {
    if (f.has("sigma")) fail(f.path("sigma"), "unknown field for a laplace error prior (use b)");
    return ErrorPrior::laplace(positive(f.at("b"), f.path("b")));
  }
  fail(join(path, "kind"), "expected \"delta\", \"gaussian\" or \"laplace\", got \"" + kind + "\"");
}

Prior parse_prior(const json& j, const std::string& path) {
  Fields f(j, path, {"kind", "mean", "variance", "lower_bound"});
  const auto kind = text(f.at("kind"), f.path("kind"));
  auto mean = numbers(f.at("mean"), f.path("mean"));
  auto variance = numbers(f.at("variance"), f.path("variance"));
  if (mean.empty()) fail(f.path("mean"), "must not be empty");
  if (variance.size() != mean.size()) fail(f.path("variance"), "length must match mean");
  for (std::size_t i = 0; i < variance.size(); ++i)
    if (!(variance[i] > 0.0)) fail(f.path("variance") + "[" + std::to_string(i) + "]", "must be > 0");
  if (kind == "gaussian") {
    if (f.has("lower_bound")) fail(f.path("lower_bound"), "only valid for a truncated_normal prior");
    return DiagonalGaussianPrior(std::move(mean), std::move(variance));
  }
  if (kind == "truncated_normal") {
    auto lower = numbers(f.at("lower_bound"), f.path("lower_bound"));
    if (lower.size() != mean.size()) fail(f.path("lower_bound"), "length must match mean");
    return TruncatedNormalPrior(std::move(mean), std::move(variance), std::move(lower));
  }
  fail(f.path("kind"), "expected \"gaussian\" or \"truncated_normal\", got \"" + kind + "\"");
}

OptimizerOptions parse_optimizer(const json& j, const std::string& path) {
  Fields f(j, path, {"method", "learning_rate", "epochs", "tolerance", "beta1", "beta2", "epsilon"});
  OptimizerOptions o;
  if (f.has("method")) {
    const auto m = text(f.at("method"), f.path("method"));
    if (m == "adam")
      o.optimizer = Optimizer::Adam;
    else if (m == "gradient_descent")
      o.optimizer = Optimizer::GradientDescent;
    else
      fail(f.path("method"), "expected \"adam\" or \"gradient_descent\", got \"" + m + "\"");
  }
  if (f.has("learning_rate")) o.learning_rate = positive(f.at("learning_rate"), f.path("learning_rate"));
  if (f.has("epochs")) {
    o.epochs = count(f.at("epochs"), f.path("epochs"));
    if (o.epochs < 1) fail(f.path("epochs"), "must be >= 1");
  }
  if (f.has("tolerance")) o.tolerance = positive(f.at("tolerance"), f.path("tolerance"));
  if (f.has("beta1")) o.beta1 = number(f.at("beta1"), f.path("beta1"));
  if (f.has("beta2")) o.beta2 = number(f.at("beta2"), f.path("beta2"));
  if (f.has("epsilon")) o.epsilon = positive(f.at("epsilon"), f.path("epsilon"));
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return o;
}

std::vector<RestraintSpec> parse_restraints(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  std::vector<RestraintSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    Fields f(j[i], p, {"observable", "target", "error"});
    RestraintSpec r;
    if (f.has("observable")) {
      const auto& sel = f.at("observable");
      if (sel.is_string())
        r.column = sel.get<std::string>();
      else
        r.index = count(sel, f.path("observable"));
    } else {
      r.index = 0;
    }
    r.target = number(f.at("target"), f.path("target"));
    r.error = f.has("error") ? parse_error(f.at("error"), f.path("error")) : ErrorPrior::delta();
    out.push_back(r);
  }
  return out;
}

VariationalSettings parse_variational(const json& j, const std::string& path) {
  Fields f(j, path, {"enabled", "rounds", "ess_floor", "learning_rate"});
  VariationalSettings v;
  if (f.has("enabled")) v.enabled = boolean(f.at("enabled"), f.path("enabled"));
  if (f.has("rounds")) {
    v.rounds = count(f.at("rounds"), f.path("rounds"));
    if (v.rounds < 1) fail(f.path("rounds"), "must be >= 1");
  }
  if (f.has("ess_floor")) {
    v.ess_floor = number(f.at("ess_floor"), f.path("ess_floor"));
    if (!(v.ess_floor >= 0.0 && v.ess_floor < 1.0)) fail(f.path("ess_floor"), "must lie in [0, 1)");
  }
  if (f.has("learning_rate")) v.learning_rate = positive(f.at("learning_rate"), f.path("learning_rate"));
  return v;
}

BaselineSettings parse_baselines(const json& j, const std::string& path) {
  Fields f(j, path, {"abc", "least_squares", "cross_validation"});
  BaselineSettings b;
  if (f.has("abc")) {
    Fields a(f.at("abc"), f.path("abc"), {"enabled", "n_simulations", "acceptance_quantile"});
    if (a.has("enabled")) b.abc = boolean(a.at("enabled"), a.path("enabled"));
    if (a.has("n_simulations")) b.abc_options.n_simulations = count(a.at("n_simulations"), a.path("n_simulations"));
    if (a.has("acceptance_quantile"))
      b.abc_options.acceptance_quantile = number(a.at("acceptance_quantile"), a.path("acceptance_quantile"));
    try {
      b.abc_options.validate();
    } catch (const std::invalid_argument& e) {
      fail(f.path("abc"), e.what());
    }
  }
  if (f.has("least_squares")) {
    Fields l(f.at("least_squares"), f.path("least_squares"), {"enabled", "max_iterations"});
    if (l.has("enabled")) b.least_squares = boolean(l.at("enabled"), l.path("enabled"));
    if (l.has("max_iterations")) {
      b.least_squares_iterations = count(l.at("max_iterations"), l.path("max_iterations"));
      if (b.least_squares_iterations < 1) fail(l.path("max_iterations"), "must be >= 1");
    }
  }
  if (f.has("cross_validation")) b.cross_validation = boolean(f.at("cross_validation"), f.path("cross_validation"));
  return b;
}

GravitySettings parse_gravity(const json& j, const std::string& path) {
  Fields f(j, path, {"gravitational_constant", "softening", "dt", "steps", "start", "attractors", "truth",
                     "observation_steps", "noise_std", "error"});
  GravitySettings g;
  if (f.has("gravitational_constant"))
    g.scene.gravitational_constant = positive(f.at("gravitational_constant"), f.path("gravitational_constant"));
  if (f.has("softening")) g.scene.softening = positive(f.at("softening"), f.path("softening"));
  if (f.has("dt")) g.scene.dt = positive(f.at("dt"), f.path("dt"));
  if (f.has("steps")) {
    g.scene.steps = count(f.at("steps"), f.path("steps"));
    if (g.scene.steps < 1) fail(f.path("steps"), "must be >= 1");
  }
  if (f.has("start")) g.scene.start = point(f.at("start"), f.path("start"));
  if (f.has("attractors")) {
    const auto& a = f.at("attractors");
    if (!a.is_array() || a.size() != 3) fail(f.path("attractors"), "expected three [x, y] pairs");
    for (std::size_t i = 0; i < 3; ++i)
      g.scene.attractors[i] = point(a[i], f.path("attractors") + "[" + std::to_string(i) + "]");
  }
  if (f.has("truth")) {
    g.truth = numbers(f.at("truth"), f.path("truth"));
    if (g.truth.size() != 5) fail(f.path("truth"), "expected 5 values {m1, m2, m3, v0x, v0y}");
  }
  if (f.has("observation_steps")) {
    g.observation_steps = counts(f.at("observation_steps"), f.path("observation_steps"));
    if (g.observation_steps.empty()) fail(f.path("observation_steps"), "must not be empty");
    for (std::size_t s : g.observation_steps)
      if (s > g.scene.steps) fail(f.path("observation_steps"), "step " + std::to_string(s) + " beyond steps");
  }
  if (f.has("noise_std")) {
    g.noise_std = number(f.at("noise_std"), f.path("noise_std"));
    if (g.noise_std < 0.0) fail(f.path("noise_std"), "must be >= 0");
  }
  if (f.has("error")) g.error = parse_error(f.at("error"), f.path("error"));
  return g;
}

std::size_t parse_compartment(const json& j, const std::string& path) {
  const auto name = text(j, path);
  static const char* names[] = {"S", "E", "A", "I", "R"};
  for (std::size_t c = 0; c < kCompartments; ++c)
    if (name == names[c]) return c;
  fail(path, "expected one of S, E, A, I, R, got \"" + name + "\"");
}

SeairSettings parse_seair(const json& j, const std::string& path) {
  Fields f(j, path, {"patches", "beta", "dt", "steps", "diagonal_floor", "truth", "observation_patch",
                     "observation_compartment", "observation_count", "observation_window", "noise_fraction",
                     "evaluation_patch", "error"});
  SeairSettings s;
  if (f.has("patches")) s.patches = count(f.at("patches"), f.path("patches"));
  if (s.patches < 1) fail(f.path("patches"), "must be >= 1");
  if (f.has("beta")) {
    s.beta = number(f.at("beta"), f.path("beta"));
    if (s.beta < 0.0) fail(f.path("beta"), "must be >= 0");
  }
  if (f.has("dt")) s.dt = positive(f.at("dt"), f.path("dt"));
  if (f.has("steps")) s.steps = count(f.at("steps"), f.path("steps"));
  if (s.steps < 1) fail(f.path("steps"), "must be >= 1");
  if (f.has("diagonal_floor")) {
    s.diagonal_floor = number(f.at("diagonal_floor"), f.path("diagonal_floor"));
    if (!(s.diagonal_floor > 0.5 && s.diagonal_floor < 1.0)) fail(f.path("diagonal_floor"), "must lie in (0.5, 1)");
  }
  if (f.has("truth")) {
    s.truth = numbers(f.at("truth"), f.path("truth"));
    if (s.truth.size() != 5) fail(f.path("truth"), "expected 5 values {start_I, start_A, E_period, A_period, I_period}");
  }
  if (!SeairParams::from_vector(s.truth).valid()) fail(f.path("truth"), "not a valid SEAIR parameter vector");
  if (f.has("observation_patch")) s.observation_patch = count(f.at("observation_patch"), f.path("observation_patch"));
  if (s.observation_patch >= s.patches) fail(f.path("observation_patch"), "must be < patches");
  if (f.has("observation_compartment"))
    s.observation_compartment = parse_compartment(f.at("observation_compartment"), f.path("observation_compartment"));
  if (f.has("observation_count")) s.observation_count = count(f.at("observation_count"), f.path("observation_count"));
  if (s.observation_count < 1) fail(f.path("observation_count"), "must be >= 1");
  if (f.has("observation_window")) s.observation_window = count(f.at("observation_window"), f.path("observation_window"));
  else s.observation_window = s.steps / 2;
  if (s.observation_window > s.steps) fail(f.path("observation_window"), "must be <= steps");
  if (s.observation_count > s.observation_window + 1)
    fail(f.path("observation_count"), "more observations than distinct times in the window");
  if (f.has("noise_fraction")) {
    s.noise_fraction = number(f.at("noise_fraction"), f.path("noise_fraction"));
    if (s.noise_fraction < 0.0) fail(f.path("noise_fraction"), "must be >= 0");
  }
  if (f.has("evaluation_patch")) s.evaluation_patch = count(f.at("evaluation_patch"), f.path("evaluation_patch"));
  if (s.evaluation_patch >= s.patches) fail(f.path("evaluation_patch"), "must be < patches");
  if (f.has("error")) s.error = parse_error(f.at("error"), f.path("error"));
  return s;
}

Prior default_gravity_prior() { return DiagonalGaussianPrior({85.0, 40.0, 70.0, 12.0, -30.0}, std::vector<double>(5, 50.0)); }

Prior default_seair_prior() {
  return TruncatedNormalPrior({0.001, 0.001, 2.0, 2.0, 10.0}, {0.8, 0.8, 1.0, 4.0, 5.0}, {0.0, 0.0, 1.0, 1.0, 1.0});
}

fs::path resolve_input(const fs::path& p, const fs::path& base_dir) {
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  Fields f(doc, "", {"kind", "seed", "ensemble_size", "batch_size", "prior", "restraints", "optimizer", "variational",
                     "baselines", "gravity", "seair", "observables_csv", "output_dir"});
  ExperimentConfig c;
  const auto kind = text(f.at("kind"), "kind");
  if (kind == "toy")
    c.kind = ExperimentKind::Toy;
  else if (kind == "gravity")
    c.kind = ExperimentKind::Gravity;
  else if (kind == "seair")
    c.kind = ExperimentKind::Seair;
  else if (kind == "external")
    c.kind = ExperimentKind::External;
  else
    fail("kind", "expected \"toy\", \"gravity\", \"seair\" or \"external\", got \"" + kind + "\"");

  if (f.has("seed")) c.seed = seed_value(f.at("seed"), "seed");
  if (f.has("ensemble_size")) c.ensemble_size = count(f.at("ensemble_size"), "ensemble_size");
  if (f.has("batch_size")) c.batch_size = count(f.at("batch_size"), "batch_size");
  if (f.has("prior")) c.prior = parse_prior(f.at("prior"), "prior");
  if (f.has("restraints")) c.restraints = parse_restraints(f.at("restraints"), "restraints");
  if (f.has("optimizer")) c.optimizer = parse_optimizer(f.at("optimizer"), "optimizer");
  if (f.has("variational")) c.variational = parse_variational(f.at("variational"), "variational");
  if (f.has("baselines")) c.baselines = parse_baselines(f.at("baselines"), "baselines");
  if (f.has("gravity")) c.gravity = parse_gravity(f.at("gravity"), "gravity");
  if (f.has("seair")) c.seair = parse_seair(f.at("seair"), "seair");
  if (f.has("observables_csv"))
    c.observables_csv = resolve_input(text(f.at("observables_csv"), "observables_csv"), base_dir);
  if (f.has("output_dir")) {
    c.output_dir = text(f.at("output_dir"), "output_dir");
    if (c.output_dir.empty()) fail("output_dir", "must not be empty");
  }

  // Cross-field checks.
  auto only_for = [&](const char* key, ExperimentKind k) {
    if (f.has(key) && c.kind != k) fail(key, "only valid when kind is \"" + to_string(k) + "\"");
  };
  only_for("gravity", ExperimentKind::Gravity);
  only_for("seair", ExperimentKind::Seair);
  only_for("observables_csv", ExperimentKind::External);

  const bool simulated = c.kind == ExperimentKind::Gravity || c.kind == ExperimentKind::Seair;
  if (simulated && f.has("restraints"))
    fail("restraints", "not valid for kind \"" + kind + "\"; restraints come from the synthetic observations");
  if (!simulated && c.restraints.empty()) fail("restraints", "required field missing");
  if (c.kind != ExperimentKind::External && c.ensemble_size < 2) fail("ensemble_size", "must be >= 2");
  if (c.baselines.cross_validation && c.kind != ExperimentKind::Seair)
    fail("baselines.cross_validation", "only valid when kind is \"seair\"");

  switch (c.kind) {
    case ExperimentKind::Toy:
      if (!c.prior) fail("prior", "required field missing");
      for (std::size_t i = 0; i < c.restraints.size(); ++i) {
        const std::string p = "restraints[" + std::to_string(i) + "].observable";
        if (c.restraints[i].column) fail(p, "toy observables are selected by parameter index");
        if (*c.restraints[i].index >= dimension(*c.prior))
          fail(p, "index " + std::to_string(*c.restraints[i].index) + " out of range for a " +
                      std::to_string(dimension(*c.prior)) + "-dimensional prior");
      }
      break;
    case ExperimentKind::Gravity:
      if (!c.prior) c.prior = default_gravity_prior();
      if (dimension(*c.prior) != 5) fail("prior", "gravity needs a 5-dimensional prior {m1, m2, m3, v0x, v0y}");
      try {
        c.gravity.scene.validate();
      } catch (const std::invalid_argument& e) {
        fail("gravity", e.what());
      }
      if (c.gravity.observation_steps.empty()) c.gravity.observation_steps = default_gravity_observation_steps(c.gravity.scene);
      break;
    case ExperimentKind::Seair:
      if (!c.prior) c.prior = default_seair_prior();
      if (dimension(*c.prior) != 5)
        fail("prior", "seair needs a 5-dimensional prior {start_I, start_A, E_period, A_period, I_period}");
      if (c.variational.enabled) fail("variational.enabled", "not supported for kind \"seair\"");
      break;
    case ExperimentKind::External:
      if (c.observables_csv.empty()) fail("observables_csv", "required field missing");
      if (c.prior) fail("prior", "not valid for kind \"external\"");
      if (c.variational.enabled) fail("variational.enabled", "not valid for kind \"external\"");
      if (c.baselines.abc || c.baselines.least_squares)
        fail("baselines", "baselines need a simulator and are not valid for kind \"external\"");
      break;
  }
  return c;
}

ExperimentConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("<root>: malformed JSON: ") + e.what());
  }
  auto c = parse_config(doc, base_dir);
  c.source_text = text;
  return c;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ExperimentConfig load_config(const fs::path& path) {
  return parse_config_text(read_file(path), path.parent_path());
}

ExperimentConfig load_external_config(const fs::path& observables_csv, const fs::path& restraints_path) {
  const std::string raw = read_file(restraints_path);
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("<root>: malformed JSON: ") + e.what());
  }
  Fields(doc, "", {"restraints", "optimizer", "output_dir", "seed"});
  doc["kind"] = "external";
  doc["observables_csv"] = fs::absolute(observables_csv).string();
  auto c = parse_config(doc, {});
  // Hash the inputs rather than absolute paths so the bundle does not depend on the working directory.
  c.source_text = raw + "\n" + read_file(observables_csv);
  return c;
}

fs::path resolve_output_dir(const ExperimentConfig& config) {
  const char* root = std::getenv(kOutputRootEnv);
  if (root && *root && config.output_dir.is_relative()) return fs::path(root) / config.output_dir;
  return config.output_dir;
}

// ---------------------------------------------------------------------------
// Leave-one-out

std::vector<double> column_std(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  if (m.rows() < 2) return out;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) mean += m(r, c);
    mean /= static_cast<double>(m.rows());
    double ss = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) ss += (m(r, c) - mean) * (m(r, c) - mean);
    out[c] = std::sqrt(ss / static_cast<double>(m.rows() - 1));
  }
  return out;
}

LeaveOneOutResult leave_one_out(const LeaveOneOutInput& in) {
  if (!in.ensemble || !in.predictions) throw std::invalid_argument("leave_one_out: ensemble and predictions required");
  const std::size_t folds = in.restraints.size();
  if (folds < 2) throw std::invalid_argument("leave_one_out: need at least 2 restraints");
  const std::size_t p = in.predictions->cols();
  LeaveOneOutResult out{Matrix(folds, p), Matrix(folds, p), {}, {}};

  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Restraint> kept;
    std::vector<double> targets;
    for (std::size_t k = 0; k < folds; ++k) {
      if (k == f) continue;
      kept.push_back(in.restraints[k]);
      targets.push_back(in.restraints[k].target);
    }
    const auto state = solve_lambda(*in.ensemble, kept, in.optimizer);
    std::vector<double> w(state.log_weights.size());
    kernels::exponentiate(state.log_weights, w);
    const auto pred = kernels::weighted_column_means(*in.predictions, w);
    std::copy(pred.begin(), pred.end(), out.maxent.row(f).begin());

    ObservableFn reduced = [&](std::span<const double> theta) {
      auto all = in.observables(theta);
      all.erase(all.begin() + static_cast<std::ptrdiff_t>(f));
      return all;
    };
    const auto fit = least_squares_fit(reduced, targets, in.initial_params, in.least_squares);
    std::vector<double> ls_pred;
    try {
      ls_pred = in.predict(fit.params);
    } catch (const std::exception&) {
      ls_pred.assign(p, std::numeric_limits<double>::quiet_NaN());
    }
    std::copy(ls_pred.begin(), ls_pred.end(), out.least_squares.row(f).begin());
  }
  out.maxent_std = column_std(out.maxent);
  out.least_squares_std = column_std(out.least_squares);
  return out;
}

// ---------------------------------------------------------------------------
// Running

namespace {

const char* kCompartmentNames[] = {"S", "E", "A", "I", "R"};

json error_json(const ErrorPrior& e) {
  json j;
  j["kind"] = to_string(e.kind);
  if (e.kind == ErrorPrior::Kind::Gaussian) j["sigma"] = e.scale;
  if (e.kind == ErrorPrior::Kind::Laplace) j["b"] = e.scale;
  return j;
}

json prior_json(const Prior& prior) {
  json j;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        j["mean"] = p.mean;
        j["variance"] = p.variance;
        if constexpr (std::is_same_v<T, TruncatedNormalPrior>) {
          j["kind"] = "truncated_normal";
          j["lower_bound"] = p.lower_bound;
        } else {
          j["kind"] = "gaussian";
        }
      },
      prior);
  return j;
}

std::vector<double> uniform_log_weights(std::size_t m) {
  return std::vector<double>(m, -std::log(static_cast<double>(m)));
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

Moments weighted_moments(std::span<const double> values, std::span<const double> log_w) {
  Moments m;
  m.mean = weighted_expectation(values, log_w);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - m.mean) * (values[i] - m.mean);
  m.variance = weighted_expectation(sq, log_w);
  return m;
}

/// Everything the solver and the bundle writer need, independent of the experiment kind.
struct Problem {
  std::vector<std::string> parameter_names;
  std::vector<std::string> observable_names;
  Ensemble ensemble;
  std::vector<Restraint> restraints;
  std::vector<double> reference;  // noise-free observable values at the truth
  ObservableFn observables;       // throws on invalid parameters
  ObservableFn safe_observables;  // +infinity instead of throwing
  std::vector<double> truth;
};

std::vector<ParameterSample> sample_valid(const Prior& prior, std::uint64_t seed, std::size_t n,
                                          const std::function<bool(const ParameterSample&)>& ok) {
  std::vector<ParameterSample> out;
  out.reserve(n);
  for (std::size_t batch = 0; out.size() < n; ++batch) {
    if (batch > 1000) throw std::runtime_error("prior puts almost no mass on valid parameters");
    for (auto& s : sample(prior, mix_seed(seed + batch), n)) {
      if (!ok(s)) continue;
      out.push_back(std::move(s));
      if (out.size() == n) break;
    }
  }
  return out;
}

std::vector<Restraint> resolve_restraints(const std::vector<RestraintSpec>& specs,
                                          const std::vector<std::string>& names) {
  std::vector<Restraint> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string p = "restraints[" + std::to_string(i) + "].observable";
    std::size_t idx = 0;
    if (specs[i].column) {
      auto it = std::find(names.begin(), names.end(), *specs[i].column);
      if (it == names.end()) throw ConfigError(p + ": no column named \"" + *specs[i].column + "\"");
      idx = static_cast<std::size_t>(it - names.begin());
    } else {
      idx = *specs[i].index;
      if (idx >= names.size())
        throw ConfigError(p + ": index " + std::to_string(idx) + " out of range for " +
                          std::to_string(names.size()) + " observables");
    }
    out.push_back({idx, specs[i].target, specs[i].error});
  }
  return out;
}

Problem build_toy(const ExperimentConfig& c) {
  Problem p;
  const std::size_t d = dimension(*c.prior);
  for (std::size_t k = 0; k < d; ++k) p.parameter_names.push_back("theta_" + std::to_string(k));
  p.observable_names = p.parameter_names;
  p.observables = [](std::span<const double> theta) { return std::vector<double>(theta.begin(), theta.end()); };
  p.safe_observables = p.observables;
  p.ensemble.samples = sample(*c.prior, stream_seed(c.seed, "prior"), c.ensemble_size);
  p.ensemble.observables = evaluate_observables(p.ensemble.samples, p.observables);
  p.restraints = resolve_restraints(c.restraints, p.observable_names);
  return p;
}

Problem build_gravity(const ExperimentConfig& c) {
  const auto& g = c.gravity;
  Problem p;
  p.parameter_names = {"m1", "m2", "m3", "v0x", "v0y"};
  for (std::size_t s : g.observation_steps) {
    p.observable_names.push_back("x_" + std::to_string(s));
    p.observable_names.push_back("y_" + std::to_string(s));
  }
  const auto scene = g.scene;
  const auto steps = g.observation_steps;
  p.observables = [scene, steps](std::span<const double> theta) {
    return gravity_observables(simulate_gravity(GravityParams::from_vector(theta), scene), steps);
  };
  p.safe_observables = p.observables;
  p.truth = g.truth;
  p.reference = p.observables(g.truth);
  const auto targets = synthesize_observations(p.reference, NoiseSpec::gaussian(g.noise_std), stream_seed(c.seed, "noise"));
  for (std::size_t k = 0; k < targets.size(); ++k) p.restraints.push_back({k, targets[k], g.error});
  p.ensemble.samples = sample(*c.prior, stream_seed(c.seed, "prior"), c.ensemble_size);
  p.ensemble.observables = evaluate_observables(p.ensemble.samples, p.observables);
  return p;
}

struct SeairScene {
  SeairConfig config;
  std::vector<std::size_t> times;
  SeairTrajectory reference;
};

SeairScene seair_scene(const ExperimentConfig& c) {
  const auto& s = c.seair;
  SeairScene scene;
  scene.config.mobility = make_mobility_matrix(s.patches, stream_seed(c.seed, "mobility"), s.diagonal_floor);
  scene.config.beta = s.beta;
  scene.config.dt = s.dt;
  scene.config.steps = s.steps;
  scene.times = random_observation_times(s.observation_count, s.observation_window, stream_seed(c.seed, "observation-times"));
  scene.reference = simulate_seair(SeairParams::from_vector(s.truth), scene.config);
  return scene;
}

Problem build_seair(const ExperimentConfig& c, const SeairScene& scene) {
  const auto& s = c.seair;
  Problem p;
  p.parameter_names = {"start_I", "start_A", "E_period", "A_period", "I_period"};
  for (std::size_t t : scene.times)
    p.observable_names.push_back(std::string(kCompartmentNames[s.observation_compartment]) + "_p" +
                                 std::to_string(s.observation_patch) + "_t" + std::to_string(t));
  const auto config = scene.config;
  const auto times = scene.times;
  const std::size_t patch = s.observation_patch, comp = s.observation_compartment;
  p.observables = [config, times, patch, comp](std::span<const double> theta) {
    return seair_observables(simulate_seair(SeairParams::from_vector(theta), config), patch, comp, times);
  };
  const auto strict = p.observables;
  const std::size_t n = times.size();
  p.safe_observables = [strict, n](std::span<const double> theta) {
    if (!SeairParams::from_vector(theta).valid()) return std::vector<double>(n, std::numeric_limits<double>::infinity());
    return strict(theta);
  };
  p.truth = s.truth;
  p.reference = seair_observables(scene.reference, patch, comp, times);
  const double peak = compartment_peak(scene.reference, patch, comp);
  const auto targets = synthesize_observations(p.reference, NoiseSpec::fraction_of_peak(s.noise_fraction),
                                               stream_seed(c.seed, "noise"), peak);
  for (std::size_t k = 0; k < targets.size(); ++k) p.restraints.push_back({k, targets[k], s.error});
  p.ensemble.samples = sample_valid(*c.prior, stream_seed(c.seed, "prior"), c.ensemble_size,
                                    [](const ParameterSample& t) { return SeairParams::from_vector(t).valid(); });
  p.ensemble.observables = evaluate_observables(p.ensemble.samples, p.observables);
  return p;
}

Problem build_external(const ExperimentConfig& c) {
  Problem p;
  auto table = read_numeric_csv(c.observables_csv);
  if (table.values.rows() < 2)
    throw std::invalid_argument(c.observables_csv.string() + ": need at least 2 sample rows, got " +
                                std::to_string(table.values.rows()));
  p.observable_names = table.header;
  p.ensemble.observables = std::move(table.values);
  p.restraints = resolve_restraints(c.restraints, p.observable_names);
  return p;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_weights(const fs::path& path, std::span<const double> log_weights) {
  Matrix m(log_weights.size(), 2);
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    m(i, 0) = static_cast<double>(i);
    m(i, 1) = std::exp(log_weights[i]);
  }
  const std::vector<std::string> header{"sample_index", "weight"};
  write_numeric_csv(path, header, m);
}

void write_samples(const fs::path& path, const std::vector<std::string>& names,
                   std::span<const ParameterSample> samples) {
  Matrix m(samples.size(), names.size() + 1);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m(i, 0) = static_cast<double>(i);
    for (std::size_t d = 0; d < names.size(); ++d) m(i, d + 1) = samples[i][d];
  }
  std::vector<std::string> header{"sample_index"};
  header.insert(header.end(), names.begin(), names.end());
  write_numeric_csv(path, header, m);
}

/// Long-format band table; one row per (step, series), with a column per band kind.
struct BandTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void write(const fs::path& path) const {
    Matrix m(rows.size(), header.size());
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    write_numeric_csv(path, header, m);
  }
};

std::vector<double> mean_rows(const Matrix& m) {
  std::vector<double> w(m.rows(), 1.0 / static_cast<double>(m.rows()));
  return kernels::weighted_column_means(m, w);
}

void gravity_outputs(const ExperimentConfig& c, const Problem& p, const std::vector<double>& log_w,
                     const std::vector<double>& prior_log_w, const std::optional<LeastSquaresResult>& ls,
                     const std::optional<AbcResult>& abc, const fs::path& dir) {
  const auto& scene = c.gravity.scene;
  const std::size_t t = scene.steps + 1;
  auto flatten = [&](std::span<const double> theta, std::span<double> out) {
    const auto traj = simulate_gravity(GravityParams::from_vector(theta), scene);
    for (std::size_t s = 0; s < t; ++s) {
      out[2 * s] = traj.positions[s].x;
      out[2 * s + 1] = traj.positions[s].y;
    }
  };
  Matrix traj(p.ensemble.samples.size(), 2 * t);
  kernels::parallel_for(p.ensemble.samples.size(), [&](std::size_t i) { flatten(p.ensemble.samples[i], traj.row(i)); });
  const auto post = weighted_trajectory_band(traj, log_w);
  const auto prior = weighted_trajectory_band(traj, prior_log_w);
  std::vector<double> ref(2 * t), ls_traj(2 * t);
  flatten(p.truth, ref);
  if (ls) flatten(ls->params, ls_traj);
  std::vector<double> abc_mean;
  if (abc) {
    Matrix a(abc->accepted.size(), 2 * t);
    for (std::size_t i = 0; i < abc->accepted.size(); ++i) flatten(abc->accepted[i], a.row(i));
    abc_mean = mean_rows(a);
  }

  BandTable table;
  table.header = {"step", "reference_x", "reference_y", "prior_mean_x", "prior_mean_y",
                  "mean_x", "low_x", "high_x", "mean_y", "low_y", "high_y"};
  if (ls) table.header.insert(table.header.end(), {"least_squares_x", "least_squares_y"});
  if (abc) table.header.insert(table.header.end(), {"abc_mean_x", "abc_mean_y"});
  for (std::size_t s = 0; s < t; ++s) {
    const std::size_t x = 2 * s, y = 2 * s + 1;
    std::vector<double> row{static_cast<double>(s), ref[x], ref[y], prior.mean[x], prior.mean[y],
                            post.mean[x], post.low[x], post.high[x], post.mean[y], post.low[y], post.high[y]};
    if (ls) row.insert(row.end(), {ls_traj[x], ls_traj[y]});
    if (abc) row.insert(row.end(), {abc_mean[x], abc_mean[y]});
    table.rows.push_back(std::move(row));
  }
  table.write(dir / "trajectory_band.csv");
}

double rmse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

json seair_outputs(const ExperimentConfig& c, const SeairScene& scene, const Problem& p,
                   const std::vector<double>& log_w, const std::vector<double>& prior_log_w,
                   const std::optional<LeastSquaresResult>& ls, const std::optional<AbcResult>& abc,
                   const fs::path& dir) {
  const auto& s = c.seair;
  const std::size_t t = s.steps + 1;
  const std::size_t m = p.ensemble.samples.size();
  std::optional<SeairTrajectory> ls_traj;
  if (ls && SeairParams::from_vector(ls->params).valid()) ls_traj = simulate_seair(SeairParams::from_vector(ls->params), scene.config);
  std::vector<SeairTrajectory> abc_traj;
  if (abc)
    for (const auto& theta : abc->accepted) abc_traj.push_back(simulate_seair(SeairParams::from_vector(theta), scene.config));

  BandTable table;
  table.header = {"step", "patch", "compartment", "reference", "prior_mean", "mean", "low", "high"};
  if (ls) table.header.push_back("least_squares");
  if (abc) table.header.push_back("abc_mean");
  table.rows.assign(t * s.patches * kCompartments, {});

  json metrics;
  for (std::size_t patch = 0; patch < s.patches; ++patch) {
    // One patch at a time keeps the trajectory matrix at M x (T * 5).
    Matrix traj(m, t * kCompartments);
    kernels::parallel_for(m, [&](std::size_t i) {
      const auto tr = simulate_seair(SeairParams::from_vector(p.ensemble.samples[i]), scene.config);
      auto row = traj.row(i);
      for (std::size_t step = 0; step < t; ++step)
        for (std::size_t comp = 0; comp < kCompartments; ++comp) row[step * kCompartments + comp] = tr.at(step, patch, comp);
    });
    const auto post = weighted_trajectory_band(traj, log_w);
    const auto prior_mean = weighted_trajectory_band(traj, prior_log_w).mean;
    for (std::size_t step = 0; step < t; ++step) {
      for (std::size_t comp = 0; comp < kCompartments; ++comp) {
        const std::size_t col = step * kCompartments + comp;
        std::vector<double> row{static_cast<double>(step), static_cast<double>(patch), static_cast<double>(comp),
                                scene.reference.at(step, patch, comp), prior_mean[col], post.mean[col], post.low[col],
                                post.high[col]};
        if (ls) row.push_back(ls_traj ? ls_traj->at(step, patch, comp) : std::numeric_limits<double>::quiet_NaN());
        if (abc) {
          double a = 0.0;
          for (const auto& tr : abc_traj) a += tr.at(step, patch, comp);
          row.push_back(a / static_cast<double>(abc_traj.size()));
        }
        table.rows[(step * s.patches + patch) * kCompartments + comp] = std::move(row);
      }
    }
    if (patch == s.evaluation_patch) {
      std::vector<double> ref(t), post_i(t), prior_i(t);
      for (std::size_t step = 0; step < t; ++step) {
        ref[step] = scene.reference.at(step, patch, kI);
        post_i[step] = post.mean[step * kCompartments + kI];
        prior_i[step] = prior_mean[step * kCompartments + kI];
      }
      metrics["evaluation_patch"] = patch;
      metrics["rmse_posterior_I"] = rmse(post_i, ref);
      metrics["rmse_prior_I"] = rmse(prior_i, ref);
      if (ls_traj) {
        std::vector<double> ls_i(t);
        for (std::size_t step = 0; step < t; ++step) ls_i[step] = ls_traj->at(step, patch, kI);
        metrics["rmse_least_squares_I"] = rmse(ls_i, ref);
      }
    }
  }
  table.write(dir / "trajectory_band.csv");
  metrics["observation_times"] = scene.times;
  metrics["reference_clamp_events"] = scene.reference.clamp_events;
  json mob = json::array();
  for (std::size_t i = 0; i < scene.config.mobility.rows(); ++i) {
    const auto r = scene.config.mobility.row(i);
    mob.push_back(std::vector<double>(r.begin(), r.end()));
  }
  metrics["mobility"] = mob;
  return metrics;
}

json seair_cross_validation(const ExperimentConfig& c, const SeairScene& scene, const Problem& p,
                            const fs::path& dir) {
  const auto& s = c.seair;
  const std::vector<std::size_t> eval_times{0, s.steps / 2, s.steps};
  const auto config = scene.config;
  const std::size_t patch = s.evaluation_patch;
  ObservableFn predict = [config, eval_times, patch](std::span<const double> theta) {
    return seair_observables(simulate_seair(SeairParams::from_vector(theta), config), patch, kI, eval_times);
  };
  const Matrix predictions = evaluate_observables(p.ensemble.samples, predict);

  LeaveOneOutInput in;
  in.ensemble = &p.ensemble;
  in.restraints = p.restraints;
  in.predictions = &predictions;
  in.optimizer = c.optimizer;
  in.observables = p.safe_observables;
  in.predict = predict;
  in.initial_params = family_parameters(*c.prior);
  in.initial_params.resize(dimension(*c.prior));
  in.least_squares.max_iterations = c.baselines.least_squares_iterations;
  const auto res = leave_one_out(in);

  BandTable table;
  table.header = {"fold", "time", "maxent", "least_squares"};
  for (std::size_t f = 0; f < res.maxent.rows(); ++f)
    for (std::size_t j = 0; j < eval_times.size(); ++j)
      table.rows.push_back({static_cast<double>(f), static_cast<double>(eval_times[j]), res.maxent(f, j),
                            res.least_squares(f, j)});
  table.write(dir / "cross_validation.csv");

  json j;
  j["times"] = eval_times;
  j["maxent_std"] = res.maxent_std;
  j["least_squares_std"] = res.least_squares_std;
  return j;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& c) {
  const fs::path dir = resolve_output_dir(c);
  fs::create_directories(dir);

  std::optional<SeairScene> scene;
  Problem p;
  switch (c.kind) {
    case ExperimentKind::Toy: p = build_toy(c); break;
    case ExperimentKind::Gravity: p = build_gravity(c); break;
    case ExperimentKind::Seair:
      scene = seair_scene(c);
      p = build_seair(c, *scene);
      break;
    case ExperimentKind::External: p = build_external(c); break;
  }
  p.ensemble.validate();

  json summary;
  LagrangeState state;
  bool converged = false;
  if (c.variational.enabled) {
    VariationalOptions vo;
    vo.rounds = c.variational.rounds;
    vo.ensemble_size = c.ensemble_size;
    vo.ess_floor_fraction = c.variational.ess_floor;
    vo.learning_rate = c.variational.learning_rate;
    vo.seed = stream_seed(c.seed, "variational");
    vo.solver = c.optimizer;
    auto res = variational_fit(*c.prior, p.observables, p.restraints, vo);
    std::ofstream log(dir / "variational.jsonl", std::ios::binary);
    write_round_log(log, res.rounds);
    json v;
    v["rounds"] = res.rounds.size();
    v["converged"] = res.converged;
    v["ess_history"] = res.sampler.ess_history;
    v["sampler"] = prior_json(res.sampler.sampler);
    summary["variational"] = v;
    p.ensemble = std::move(res.ensemble);
    state = std::move(res.state);
    converged = res.converged;
  } else {
    state = solve_lambda(p.ensemble, p.restraints, c.optimizer);
    converged = state.converged;
  }

  const std::size_t m = p.ensemble.size();
  std::vector<double> prior_log_w = p.ensemble.base_log_weights.empty() ? uniform_log_weights(m)
                                                                          : p.ensemble.base_log_weights;
  if (!p.ensemble.base_log_weights.empty()) kernels::normalize_log_weights(prior_log_w);

  write_weights(dir / "weights.csv", state.log_weights);
  if (!p.ensemble.base_log_weights.empty()) write_weights(dir / "base_weights.csv", prior_log_w);
  if (!p.ensemble.samples.empty()) write_samples(dir / "samples.csv", p.parameter_names, p.ensemble.samples);
  write_numeric_csv(dir / "observables.csv", p.observable_names, p.ensemble.observables);

  // Restraint table: target, achieved expectation, tilted error mean, residual.
  json restraints = json::array();
  {
    std::vector<std::string> header{"restraint", "observable", "target", "expectation", "tilted_mean", "lambda",
                                    "residual"};
    if (!p.reference.empty()) header.push_back("reference");
    Matrix rows(p.restraints.size(), header.size());
    for (std::size_t k = 0; k < p.restraints.size(); ++k) {
      const auto& r = p.restraints[k];
      const double expect = weighted_expectation(p.ensemble.observables.column(r.observable_index), state.log_weights);
      const double xi = tilted_mean(r.error, state.lambda[k]);
      json j;
      j["observable"] = p.observable_names[r.observable_index];
      j["target"] = r.target;
      j["error"] = error_json(r.error);
      j["expectation"] = expect;
      j["tilted_mean"] = xi;
      j["lambda"] = state.lambda[k];
      j["residual"] = state.residuals[k];
      std::vector<double> row{static_cast<double>(k), static_cast<double>(r.observable_index), r.target, expect, xi,
                              state.lambda[k], state.residuals[k]};
      if (!p.reference.empty()) {
        j["reference"] = p.reference[r.observable_index];
        row.push_back(p.reference[r.observable_index]);
      }
      std::copy(row.begin(), row.end(), rows.row(k).begin());
      restraints.push_back(j);
    }
    write_numeric_csv(dir / "observations.csv", header, rows);
  }

  summary["kind"] = to_string(c.kind);
  summary["converged"] = converged;
  summary["flagged"] = !converged;
  summary["ensemble_size"] = m;
  summary["ess"] = effective_sample_size(state.log_weights);
  summary["weight_entropy"] = weight_entropy(state.log_weights);
  summary["restraints"] = restraints;
  json solver;
  solver["epochs"] = state.epochs;
  solver["loss"] = state.loss;
  solver["max_abs_residual"] = state.max_abs_residual();
  solver["converged"] = state.converged;
  solver["lambda"] = state.lambda;
  solver["residuals"] = state.residuals;
  solver["method"] = c.optimizer.optimizer == Optimizer::Adam ? "adam" : "gradient_descent";
  solver["learning_rate"] = c.optimizer.learning_rate;
  solver["max_epochs"] = c.optimizer.epochs;
  solver["tolerance"] = c.optimizer.tolerance;
  summary["solver"] = solver;
  if (c.prior) summary["prior"] = prior_json(*c.prior);

  if (!p.ensemble.samples.empty()) {
    json params = json::array();
    for (std::size_t d = 0; d < p.parameter_names.size(); ++d) {
      std::vector<double> col(m);
      for (std::size_t i = 0; i < m; ++i) col[i] = p.ensemble.samples[i][d];
      const auto post = weighted_moments(col, state.log_weights);
      const auto prior = weighted_moments(col, prior_log_w);
      json j;
      j["name"] = p.parameter_names[d];
      j["prior_mean"] = prior.mean;
      j["prior_variance"] = prior.variance;
      j["posterior_mean"] = post.mean;
      j["posterior_variance"] = post.variance;
      j["posterior_low"] = weighted_quantile(col, state.log_weights, kBandLow);
      j["posterior_high"] = weighted_quantile(col, state.log_weights, kBandHigh);
      if (!p.truth.empty()) j["truth"] = p.truth[d];
      params.push_back(j);
    }
    summary["parameters"] = params;
    json ce;
    ce["posterior"] = cross_entropy_estimate(p.ensemble.samples, state.log_weights, *c.prior);
    ce["prior"] = cross_entropy_estimate(p.ensemble.samples, prior_log_w, *c.prior);
    summary["cross_entropy"] = ce;
  }

  // Baselines.
  std::optional<AbcResult> abc;
  std::optional<LeastSquaresResult> ls;
  json baselines = json::object();
  if (c.baselines.abc) {
    std::vector<double> targets;
    for (const auto& r : p.restraints) targets.push_back(r.target);
    abc = rejection_abc(*c.prior, p.safe_observables, targets, c.baselines.abc_options, stream_seed(c.seed, "abc"));
    Matrix rows(abc->accepted.size(), p.parameter_names.size() + 1);
    for (std::size_t i = 0; i < abc->accepted.size(); ++i) {
      std::copy(abc->accepted[i].begin(), abc->accepted[i].end(), rows.row(i).begin());
      rows(i, p.parameter_names.size()) = abc->distances[i];
    }
    auto header = p.parameter_names;
    header.push_back("distance");
    write_numeric_csv(dir / "abc_samples.csv", header, rows);
    json j;
    j["accepted"] = abc->accepted.size();
    j["threshold"] = abc->threshold;
    std::vector<double> means(p.parameter_names.size(), 0.0);
    for (const auto& a : abc->accepted)
      for (std::size_t d = 0; d < means.size(); ++d) means[d] += a[d] / static_cast<double>(abc->accepted.size());
    j["parameter_means"] = means;
    baselines["abc"] = j;
  }
  if (c.baselines.least_squares) {
    std::vector<double> targets;
    for (const auto& r : p.restraints) targets.push_back(r.target);
    auto start = family_parameters(*c.prior);
    start.resize(dimension(*c.prior));
    NelderMeadOptions nm;
    nm.max_iterations = c.baselines.least_squares_iterations;
    ls = least_squares_fit(p.safe_observables, targets, start, nm);
    Matrix row(1, p.parameter_names.size() + 1);
    std::copy(ls->params.begin(), ls->params.end(), row.row(0).begin());
    row(0, p.parameter_names.size()) = ls->residual;
    auto header = p.parameter_names;
    header.push_back("sum_of_squares");
    write_numeric_csv(dir / "least_squares.csv", header, row);
    json j;
    j["params"] = ls->params;
    j["sum_of_squares"] = ls->residual;
    j["iterations"] = ls->iterations;
    j["converged"] = ls->converged;
    j["restarted"] = ls->restarted;
    j["flagged"] = ls->flagged;
    baselines["least_squares"] = j;
  }

  if (c.kind == ExperimentKind::Gravity) {
    gravity_outputs(c, p, state.log_weights, prior_log_w, ls, abc, dir);
  } else if (c.kind == ExperimentKind::Seair) {
    summary["seair"] = seair_outputs(c, *scene, p, state.log_weights, prior_log_w, ls, abc, dir);
    if (c.baselines.cross_validation) baselines["cross_validation"] = seair_cross_validation(c, *scene, p, dir);
  }
  if (!baselines.empty()) summary["baselines"] = baselines;

  json prov;
  prov["config_hash"] = content_hash(c.source_text);
  prov["seed"] = c.seed;
  prov["version"] = kVersion;
  prov["batch_size"] = c.batch_size.value_or(m);
  summary["provenance"] = prov;

  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return {converged ? 0 : 2, dir, summary};
}

// ---------------------------------------------------------------------------
// Plot data

PlotData parse_plot_data(const std::string& name) {
  if (name == "posterior_kde") return PlotData::PosteriorKde;
  if (name == "trajectory_band") return PlotData::TrajectoryBand;
  if (name == "entropy_curve") return PlotData::EntropyCurve;
  throw std::invalid_argument("unknown plot data \"" + name +
                              "\"; expected posterior_kde, trajectory_band or entropy_curve");
}

namespace {

fs::path require(const fs::path& bundle, const std::string& name) {
  const auto p = bundle / name;
  if (!fs::exists(p)) throw BundleError("bundle " + bundle.string() + " is missing " + name);
  return p;
}

json read_summary(const fs::path& bundle) {
  const auto path = require(bundle, "summary.json");
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw BundleError(path.string() + ": " + e.what());
  }
}

std::vector<double> log_weights_from(const CsvTable& t, const std::string& name) {
  if (t.header.size() != 2 || t.header[1] != "weight") throw BundleError(name + ": expected columns sample_index,weight");
  std::vector<double> lw(t.values.rows());
  for (std::size_t i = 0; i < lw.size(); ++i) lw[i] = std::log(t.values(i, 1));
  kernels::normalize_log_weights(lw);
  return lw;
}

constexpr std::size_t kKdeGridPoints = 512;

}  // namespace

std::vector<fs::path> emit_plot_data(const fs::path& bundle, PlotData which) {
  const auto summary = read_summary(bundle);
  const fs::path out_dir = bundle / "plots";
  std::vector<fs::path> written;

  switch (which) {
    case PlotData::PosteriorKde: {
      const auto samples = read_numeric_csv(require(bundle, "samples.csv"));
      const auto post = log_weights_from(read_numeric_csv(require(bundle, "weights.csv")), "weights.csv");
      const std::size_t m = samples.values.rows();
      if (post.size() != m) throw BundleError("weights.csv and samples.csv disagree on the number of samples");
      std::vector<double> prior = uniform_log_weights(m);
      if (fs::exists(bundle / "base_weights.csv"))
        prior = log_weights_from(read_numeric_csv(bundle / "base_weights.csv"), "base_weights.csv");
      fs::create_directories(out_dir);
      for (std::size_t c = 1; c < samples.header.size(); ++c) {
        const auto col = samples.values.column(c);
        const double h_post = silverman_bandwidth(col, post);
        const double h_prior = silverman_bandwidth(col, prior);
        const double pad = 4.0 * std::max(h_post, h_prior);
        const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        std::vector<double> grid(kKdeGridPoints);
        for (std::size_t g = 0; g < grid.size(); ++g)
          grid[g] = (*lo - pad) + (*hi - *lo + 2.0 * pad) * static_cast<double>(g) / static_cast<double>(grid.size() - 1);
        const auto dp = kde_1d(col, prior, h_prior, grid);
        const auto dq = kde_1d(col, post, h_post, grid);
        Matrix rows(grid.size(), 3);
        for (std::size_t g = 0; g < grid.size(); ++g) {
          rows(g, 0) = grid[g];
          rows(g, 1) = dp[g];
          rows(g, 2) = dq[g];
        }
        const auto path = out_dir / ("posterior_kde_" + samples.header[c] + ".csv");
        const std::vector<std::string> header{"value", "prior_density", "posterior_density"};
        write_numeric_csv(path, header, rows);
        written.push_back(path);
      }
      break;
    }
    case PlotData::TrajectoryBand: {
      const auto src = require(bundle, "trajectory_band.csv");
      fs::create_directories(out_dir);
      const auto path = out_dir / "trajectory_band.csv";
      fs::copy_file(src, path, fs::copy_options::overwrite_existing);
      written.push_back(path);
      break;
    }
    case PlotData::EntropyCurve: {
      if (!summary.contains("kind") || summary["kind"] != "toy")
        throw BundleError("entropy_curve needs a toy bundle (summary.json kind is not \"toy\")");
      if (!summary.contains("prior")) throw BundleError("summary.json is missing prior");
      const auto& pr = summary["prior"];
      if (pr.value("kind", "") != "gaussian" || pr["mean"].size() != 1)
        throw BundleError("entropy_curve needs a one-dimensional gaussian prior");
      const double mean = pr["mean"][0].get<double>();
      const double var = pr["variance"][0].get<double>();
      const double tol = kEntropyCurveMatchTolerance * std::sqrt(var);
      Matrix rows(11, 3);
      for (std::size_t k = 0; k <= 10; ++k) {
        const double r_bar = static_cast<double>(k);
        const double noise = bayes_matching_noise_variance(mean, var, r_bar, tol);
        rows(k, 0) = r_bar;
        rows(k, 1) = maxent_toy_posterior(mean, var, r_bar).entropy();
        rows(k, 2) = bayes_toy_posterior(mean, var, r_bar, noise).entropy();
      }
      fs::create_directories(out_dir);
      const auto path = out_dir / "entropy_curve.csv";
      const std::vector<std::string> header{"r_bar", "maxent_entropy", "bayes_entropy"};
      write_numeric_csv(path, header, rows);
      written.push_back(path);
      break;
    }
  }
  return written;
}

}  // namespace maxent
