#pragma once

#include <adaprox/error.hpp>
#include <adaprox/estimator.hpp>
#include <adaprox/metrics.hpp>
#include <adaprox/problems.hpp>
#include <adaprox/solver.hpp>
#include <adaprox/verify.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace adaprox {

inline constexpr const char* kCacheDirEnv = "ADAPROX_CACHE_DIR";

/// Flat `key = value` settings. '#' starts a comment; later keys win.
class Settings {
 public:
  static Settings parse(std::istream& is) {
    Settings s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw ParseError(lineno, "expected key = value");
      const auto key = detail::trim(body.substr(0, eq));
      if (key.empty()) throw ParseError(lineno, "empty key");
      s.values_[std::string(key)] = std::string(detail::trim(body.substr(eq + 1)));
    }
    return s;
  }

  static Settings load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    try {
      return parse(in);
    } catch (const ParseError& e) {
      throw InvalidConfig(path + ": " + e.what());
    }
  }

  /// Applies a `key=value` override.
  void assign(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig("override '" + std::string(kv) + "' lacks '='");
    set(std::string(detail::trim(kv.substr(0, eq))), std::string(detail::trim(kv.substr(eq + 1))));
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  template <typename T>
  T number(const std::string& key, T fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    T v{};
    if (!detail::parse_number(std::string_view(it->second), v))
      throw InvalidConfig("key '" + key + "': bad number '" + it->second + "'");
    return v;
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw InvalidConfig("key '" + key + "': expected a boolean");
  }

  std::vector<std::string> list(const std::string& key, const std::string& fallback) const {
    std::vector<std::string> out;
    std::stringstream ss(text(key, fallback));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto t = detail::trim(item);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Parses "0.1,1e-2,..." into numbers.
inline std::vector<double> parse_grid(std::string_view csv) {
  std::vector<double> out;
  std::stringstream ss{std::string(csv)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = detail::trim(item);
    if (t.empty()) continue;
    double v = 0.0;
    if (!detail::parse_number(t, v) || !(v > 0.0))
      throw InvalidConfig("grid entry '" + std::string(t) + "' is not a positive number");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidConfig("step-size grid is empty");
  return out;
}

struct QuadraticSpec {
  Index d = 10;
  Index n = 10'000;
  double kappa = 1'000.0;
  std::uint64_t seed = 1;
};

struct LogisticSpec {
  std::string path;  // empty: synthetic binary data
  Index max_rows = 0;
  Index rows = 2'000;
  Index features = 123;
  Index active = 14;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::variant<QuadraticSpec, LogisticSpec> problem = QuadraticSpec{};
  std::vector<std::string> strategies{"Deterministic"};
  std::vector<Option> options{Option::I};
  std::vector<std::uint64_t> seeds{1};

  // strategy knobs
  Index batch = 256;
  Index initial = 32;
  double growth = 1.05;
  ConditionParams condition;
  std::optional<double> known_sigma_sq;
  int max_augmentations = 5;
  Index max_batch = 0;

  std::optional<Preset> preset;
  PresetKnobs knobs;
  std::optional<double> alpha;  // explicit step
  double alpha_scale = 1.0;     // alpha = scale / L when neither preset nor alpha
  std::string acceleration = "auto";
  std::optional<double> fixed_beta;

  StoppingRules stop;
  bool use_reference = true;
  std::string out_dir = "out";
  bool svg = true;
  bool timing = true;
  bool audit = false;
  unsigned threads = 1;
};

namespace detail {

inline Option parse_option(const std::string& s) {
  if (s == "I" || s == "1") return Option::I;
  if (s == "II" || s == "2") return Option::II;
  throw InvalidConfig("unknown option '" + s + "' (expected I or II)");
}

inline DeltaSchedule parse_delta(const Settings& s) {
  const auto kind = s.text("strategy.delta", "zero");
  const double scale = s.number("strategy.delta_scale", 1.0);
  try {
    if (kind == "zero") return DeltaSchedule::zero();
    if (kind == "power") return DeltaSchedule::power(s.number("strategy.delta_exponent", 1.5), scale);
    if (kind == "geometric")
      return DeltaSchedule::geometric(s.number("strategy.delta_ratio", 0.5), scale);
  } catch (const InvalidArgument& e) {
    throw InvalidConfig(e.what());
  }
  throw InvalidConfig("strategy.delta must be zero, power or geometric");
}

inline ConditionVariant parse_variant(const std::string& v) {
  if (v == "expectation") return ConditionVariant::Expectation;
  if (v == "finite_sum") return ConditionVariant::FiniteSum;
  throw InvalidConfig("strategy.variant must be expectation or finite_sum");
}

}  // namespace detail

inline const std::vector<std::string>& known_strategies() {
  static const std::vector<std::string> names{"Deterministic", "Stochastic", "Geometric",
                                              "Adaptive", "Adaptive-biased"};
  return names;
}

inline ExperimentConfig make_experiment_config(const Settings& s) {
  ExperimentConfig c;
  const auto kind = s.text("problem.kind", "quadratic");
  if (kind == "quadratic") {
    QuadraticSpec q;
    q.d = s.number<Index>("problem.d", q.d);
    q.n = s.number<Index>("problem.n", q.n);
    q.kappa = s.number("problem.kappa", q.kappa);
    q.seed = s.number<std::uint64_t>("problem.seed", q.seed);
    if (q.d < 2 || q.n < 1 || !(q.kappa >= 1.0))
      throw InvalidConfig("quadratic needs d >= 2, n >= 1, kappa >= 1");
    c.problem = q;
  } else if (kind == "logistic") {
    LogisticSpec l;
    l.path = s.text("problem.path", "");
    l.max_rows = s.number<Index>("problem.max_rows", 0);
    l.rows = s.number<Index>("problem.rows", l.rows);
    l.features = s.number<Index>("problem.features", l.features);
    l.active = s.number<Index>("problem.active", l.active);
    l.seed = s.number<std::uint64_t>("problem.seed", l.seed);
    c.problem = l;
  } else {
    throw InvalidConfig("problem.kind must be quadratic or logistic");
  }

  c.strategies = s.list("strategy.kinds", "Deterministic");
  if (c.strategies.empty()) throw InvalidConfig("strategy.kinds is empty");
  for (const auto& name : c.strategies)
    if (std::find(known_strategies().begin(), known_strategies().end(), name) ==
        known_strategies().end())
      throw InvalidConfig("unknown strategy '" + name + "'");

  c.options.clear();
  for (const auto& o : s.list("solver.options", "I")) c.options.push_back(detail::parse_option(o));
  if (c.options.empty()) throw InvalidConfig("solver.options is empty");

  c.seeds.clear();
  for (const auto& v : s.list("run.seeds", "1")) {
    std::uint64_t seed = 0;
    if (!detail::parse_number(std::string_view(v), seed)) throw InvalidConfig("bad seed '" + v + "'");
    c.seeds.push_back(seed);
  }
  if (c.seeds.empty()) throw InvalidConfig("run.seeds is empty");

  c.batch = s.number<Index>("strategy.batch", c.batch);
  c.initial = s.number<Index>("strategy.initial", c.initial);
  c.growth = s.number("strategy.growth", c.growth);
  c.max_augmentations = s.number("strategy.max_augmentations", c.max_augmentations);
  c.max_batch = s.number<Index>("strategy.max_batch", c.max_batch);
  const double eta = s.number("strategy.eta", 0.1);
  try {
    c.condition.variant = detail::parse_variant(s.text("strategy.variant", "expectation"));
    c.condition.eta = EtaSchedule::constant(eta);
    c.condition.iota0 = s.number("strategy.iota0", 0.0);
    c.condition.delta = detail::parse_delta(s);
    c.condition.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidConfig(e.what());
  }
  const auto sigma = s.text("strategy.sigma", "running");
  if (sigma != "running") {
    double v = 0.0;
    if (!detail::parse_number(std::string_view(sigma), v) || !(v >= 0.0))
      throw InvalidConfig("strategy.sigma must be 'running' or a nonnegative variance");
    c.known_sigma_sq = v;
  }

  if (s.has("solver.preset")) {
    c.preset = parse_preset(s.text("solver.preset", ""));
    c.knobs.eta = eta;
    c.knobs.iota0 = c.condition.iota0;
    c.knobs.nu = s.number("preset.nu", c.knobs.nu);
    c.knobs.delta = s.number("preset.delta", c.knobs.delta);
    c.knobs.eta_hat = s.number("preset.eta_hat", c.knobs.eta_hat);
    c.knobs.delta_hat = s.number("preset.delta_hat", c.knobs.delta_hat);
    c.knobs.variant = c.condition.variant;
  }
  if (s.has("solver.alpha")) c.alpha = s.number("solver.alpha", 0.0);
  c.alpha_scale = s.number("solver.alpha_scale", c.alpha_scale);
  if (c.alpha && !(*c.alpha > 0.0)) throw InvalidConfig("solver.alpha must be positive");
  if (!(c.alpha_scale > 0.0)) throw InvalidConfig("solver.alpha_scale must be positive");
  c.acceleration = s.text("solver.acceleration", "auto");
  if (s.has("solver.beta")) c.fixed_beta = s.number("solver.beta", 0.0);
  if (c.acceleration != "auto" && c.acceleration != "none" && c.acceleration != "nesterov" &&
      c.acceleration != "strong" && c.acceleration != "fixed")
    throw InvalidConfig("solver.acceleration must be auto, none, nesterov, strong or fixed");
  if (c.acceleration == "fixed" && !c.fixed_beta)
    throw InvalidConfig("solver.acceleration = fixed needs solver.beta");

  c.stop.max_iters = s.number<std::uint64_t>("solver.max_iters", c.stop.max_iters);
  c.stop.grad_budget = s.number<std::uint64_t>("solver.grad_budget", c.stop.grad_budget);
  if (s.has("solver.target_gap")) c.stop.target_gap = s.number("solver.target_gap", 0.0);
  c.use_reference = s.flag("run.reference", c.use_reference);
  if (c.stop.target_gap && !c.use_reference)
    throw InvalidConfig("solver.target_gap needs run.reference = true");

  c.out_dir = s.text("output.dir", c.out_dir);
  c.svg = s.flag("output.svg", c.svg);
  c.timing = s.flag("output.timing", c.timing);
  c.audit = s.flag("audit", c.audit);
  c.threads = s.number<unsigned>("run.threads", c.threads);
  if (c.threads == 0) throw InvalidConfig("run.threads must be positive");
  return c;
}

inline CompositeProblem build_problem(const ExperimentConfig& c) {
  if (const auto* q = std::get_if<QuadraticSpec>(&c.problem))
    return generate_quadratic(q->d, q->n, q->kappa, q->seed);
  const auto& l = std::get<LogisticSpec>(c.problem);
  if (l.path.empty()) return make_logistic(generate_binary_dataset(l.rows, l.features, l.active, l.seed));
  LibsvmOptions opts;
  opts.max_rows = l.max_rows;
  return make_logistic(load_libsvm(l.path, opts));
}

struct ReferenceSolution {
  double phi_star = 0.0;
  Vector x_star;
  bool converged = false;
  bool cache_hit = false;
  std::uint64_t iterations = 0;
  double reduced_norm = 0.0;
  std::filesystem::path file;
};

inline std::filesystem::path cache_directory() {
  const char* env = std::getenv(kCacheDirEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path(".adaprox_cache");
}

struct ReferenceOptions {
  double tolerance = 1e-12;
  std::uint64_t max_iters = 200'000;
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::optional<ReferenceSolution> read_reference(const std::filesystem::path& file,
                                                       Index dim) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  ReferenceSolution r;
  std::string key;
  std::string value;
  int converged = 0;
  if (!(in >> key) || key != "phi") return std::nullopt;
  in >> value;
  if (!parse_number(std::string_view(value), r.phi_star)) return std::nullopt;
  if (!(in >> key >> converged) || key != "converged") return std::nullopt;
  if (!(in >> key >> r.iterations) || key != "iterations") return std::nullopt;
  if (!(in >> key >> value) || key != "reduced_norm" ||
      !parse_number(std::string_view(value), r.reduced_norm))
    return std::nullopt;
  Index d = 0;
  if (!(in >> key >> d) || key != "x" || d != dim) return std::nullopt;
  r.x_star.resize(d);
  for (Index j = 0; j < d; ++j)
    if (!(in >> value) || !parse_number(std::string_view(value), r.x_star[j])) return std::nullopt;
  r.converged = converged != 0;
  r.cache_hit = true;
  r.file = file;
  return r;
}

inline void write_reference(const std::filesystem::path& file, const ReferenceSolution& r) {
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write reference cache '" + tmp + "'");
    out << "phi ";
    write_double(out, r.phi_star);
    out << "\nconverged " << (r.converged ? 1 : 0) << "\niterations " << r.iterations
        << "\nreduced_norm ";
    write_double(out, r.reduced_norm);
    out << "\nx " << r.x_star.size() << '\n';
    for (Index j = 0; j < r.x_star.size(); ++j) {
      write_double(out, r.x_star[j]);
      out << '\n';
    }
    if (!out) throw IoError("failed writing reference cache '" + tmp + "'");
  }
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move reference cache into place: " + ec.message());
}

}  // namespace detail

/// Accurate optimum by the accelerated method with exact gradients and
/// alpha = 1/L, stopping once the reduced gradient falls below the tolerance.
/// The result is cached under the problem's fingerprint; an unconverged run
/// is cached too, with converged = false.
inline ReferenceSolution compute_reference(const CompositeProblem& problem,
                                           const std::filesystem::path& dir = cache_directory(),
                                           const ReferenceOptions& opts = {}) {
  const auto file = dir / (detail::hex64(problem.fingerprint()) + ".ref");
  if (auto hit = detail::read_reference(file, problem.dimension())) return *hit;

  const auto& f = *problem.smooth;
  const double alpha = 1.0 / f.smoothness();
  const double mu = f.strong_convexity();
  const auto schedule = mu > 0.0 ? AccelerationSchedule::strong_convex(mu, alpha)
                                 : AccelerationSchedule::convex_nesterov();
  Vector x = Vector::Zero(f.dimension());
  Vector y = x;
  ReferenceSolution r;
  r.reduced_norm = std::numeric_limits<double>::infinity();
  std::uint64_t k = 0;
  while (k < opts.max_iters) {
    const Vector x_next = problem.nonsmooth.prox(alpha, y - alpha * f.full_gradient(y));
    r.reduced_norm = (y - x_next).norm() / alpha;
    ++k;
    if (!x_next.allFinite()) throw InvalidData("reference run diverged");
    if (r.reduced_norm <= opts.tolerance) {
      x = x_next;
      r.converged = true;
      break;
    }
    y = x_next + beta(schedule, k) * (x_next - x);
    x = x_next;
  }
  r.phi_star = problem.phi(x);
  r.x_star = x;
  r.iterations = k;
  r.file = file;
  detail::write_reference(file, r);
  return r;
}

/// Step size, condition parameters and acceleration for one option.
struct ResolvedSolver {
  double alpha = 0.0;
  AccelerationSchedule acceleration;
  ConditionParams condition;
};

inline ResolvedSolver resolve_solver(const ExperimentConfig& c, const CompositeProblem& problem,
                                     Option option) {
  const double L = problem.smooth->smoothness();
  const double mu = problem.smooth->strong_convexity();
  ResolvedSolver r;
  r.condition = c.condition;
  if (c.preset) {
    const auto p = preset_config(*c.preset, L, mu, c.knobs);
    if (p.option != option)
      throw InvalidConfig(std::string("preset ") + to_string(*c.preset) + " is an Option " +
                          to_string(p.option) + " regime");
    r.alpha = p.alpha;
    r.acceleration = p.acceleration;
    r.condition = p.condition;
  } else {
    r.alpha = c.alpha ? *c.alpha : c.alpha_scale / L;
  }
  if (option == Option::I || c.preset) return r;

  const auto& a = c.acceleration;
  if (a == "none") {
    r.acceleration = AccelerationSchedule::none();
  } else if (a == "nesterov") {
    r.acceleration = AccelerationSchedule::convex_nesterov();
  } else if (a == "strong") {
    r.acceleration = AccelerationSchedule::strong_convex(mu, r.alpha);
  } else if (a == "fixed") {
    r.acceleration = AccelerationSchedule::fixed(*c.fixed_beta);
  } else {
    r.acceleration = mu > 0.0 ? AccelerationSchedule::from_condition_number(L / mu)
                              : AccelerationSchedule::convex_nesterov();
  }
  return r;
}

inline SamplingStrategy make_strategy(const ExperimentConfig& c, const std::string& name,
                                      const ConditionParams& condition, std::uint64_t seed) {
  SamplingStrategy s;
  s.seed = seed;
  if (name == "Deterministic") {
    s.kind = FullBatch{};
  } else if (name == "Stochastic") {
    s.kind = ConstantBatch{c.batch};
  } else if (name == "Geometric") {
    s.kind = GeometricGrowth{c.initial, c.growth};
  } else {
    AdaptiveSampling a;
    a.condition = condition;
    if (c.known_sigma_sq) a.variance = VarianceEstimate::known(*c.known_sigma_sq);
    a.initial = c.initial;
    a.max_augmentations = c.max_augmentations;
    a.max_batch = c.max_batch;
    if (name == "Adaptive")
      s.kind = AdaptiveUnbiased{a};
    else if (name == "Adaptive-biased")
      s.kind = AdaptiveNested{a};
    else
      throw InvalidConfig("unknown strategy '" + name + "'");
  }
  return s;
}

struct RunSummary {
  std::string label;
  Option option = Option::I;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::string status;  // stop reason, "diverged" or "error: ..."
  bool diverged = false;
  std::uint64_t iterations = 0;
  double final_phi = 0.0;
  std::optional<double> final_gap;
  std::uint64_t prox_evals = 0;
  std::uint64_t grad_evals = 0;
  std::optional<RateFit> linear_fit;
  std::optional<RateFit> power_fit;
  std::filesystem::path csv;
  std::vector<IterationRecord> records;
  std::vector<verify::ConditionAudit> audits;
};

struct ExperimentResult {
  std::vector<RunSummary> runs;
  std::optional<ReferenceSolution> reference;
  std::filesystem::path summary_csv;
  std::vector<std::filesystem::path> charts;

  bool any_diverged() const {
    return std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.diverged; });
  }
};

struct Job {
  std::string name;
  Option option = Option::I;
  std::uint64_t seed = 0;
  std::optional<double> alpha;  // overrides the resolved step
};

namespace detail {

inline std::string csv_name(const RunSummary& r) {
  auto label = r.label;
  std::replace(label.begin(), label.end(), ' ', '_');
  return label + "-" + to_string(r.option) + "-seed" + std::to_string(r.seed) + ".csv";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline RunSummary execute(const ExperimentConfig& c, const CompositeProblem& problem,
                          const Job& job) {
  RunSummary s;
  s.option = job.option;
  s.seed = job.seed;
  const auto resolved = resolve_solver(c, problem, job.option);
  const auto strategy = make_strategy(c, job.name, resolved.condition, job.seed);
  s.label = strategy.label();
  SolverConfig cfg;
  cfg.option = job.option;
  cfg.alpha = job.alpha ? *job.alpha : resolved.alpha;
  cfg.acceleration = resolved.acceleration;
  cfg.stop = c.stop;
  cfg.audit = c.audit;
  cfg.record_wall_time = c.timing;
  s.alpha = cfg.alpha;
  try {
    auto result = run(problem, strategy, cfg);
    s.status = to_string(result.reason);
    s.records = std::move(result.records);
    s.audits = std::move(result.audits);
  } catch (const DivergedError& e) {
    s.status = "diverged";
    s.diverged = true;
    s.records = e.records();
  }
  const auto& last = s.records.back();
  s.iterations = last.k;
  s.final_phi = last.phi;
  s.final_gap = last.gap;
  s.prox_evals = last.prox_evals;
  s.grad_evals = last.grad_evals;
  try {
    s.linear_fit = fit_linear_rate(s.records);
  } catch (const InsufficientData&) {
  }
  try {
    s.power_fit = fit_power_rate(s.records);
  } catch (const InsufficientData&) {
  }
  return s;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(threads, count);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::string opt_text(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  write_double(os, *v);
  return os.str();
}

inline std::string summary_table(const std::vector<RunSummary>& runs) {
  std::ostringstream os;
  os << "label,option,seed,alpha,status,iterations,final_phi,final_gap,prox_evals,grad_evals,"
        "linear_rate,linear_r2,power_rate,power_r2\n";
  for (const auto& r : runs) {
    os << r.label << ',' << to_string(r.option) << ',' << r.seed << ',';
    write_double(os, r.alpha);
    os << ',' << r.status << ',' << r.iterations << ',';
    write_double(os, r.final_phi);
    os << ',' << opt_text(r.final_gap) << ',' << r.prox_evals << ',' << r.grad_evals << ','
       << opt_text(r.linear_fit ? std::optional(r.linear_fit->rate) : std::nullopt) << ','
       << opt_text(r.linear_fit ? std::optional(r.linear_fit->r2) : std::nullopt) << ','
       << opt_text(r.power_fit ? std::optional(r.power_fit->rate) : std::nullopt) << ','
       << opt_text(r.power_fit ? std::optional(r.power_fit->r2) : std::nullopt) << '\n';
  }
  return os.str();
}

}  // namespace detail

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

/// Self-contained SVG line chart on log-log axes; nonpositive points are
/// dropped.
inline std::string svg_chart(const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<Series>& series) {
  constexpr double W = 720, H = 480, left = 80, right = 180, top = 40, bottom = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!(s.xs[i] > 0.0) || !(s.ys[i] > 0.0)) continue;
      x0 = std::min(x0, std::log10(s.xs[i]));
      x1 = std::max(x1, std::log10(s.xs[i]));
      y0 = std::min(y0, std::log10(s.ys[i]));
      y1 = std::max(y1, std::log10(s.ys[i]));
    }
  if (!(x1 >= x0)) x0 = 0, x1 = 1;
  if (!(y1 >= y0)) y0 = 0, y1 = 1;
  x0 = std::floor(x0), x1 = std::max(std::ceil(x1), x0 + 1);
  y0 = std::floor(y0), y1 = std::max(std::ceil(y1), y0 + 1);
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double lx) { return left + (lx - x0) / (x1 - x0) * pw; };
  auto py = [&](double ly) { return top + (y1 - ly) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = x0; e <= x1 + 1e-9; e += 1.0)
    os << "<text x=\"" << px(e) << "\" y=\"" << top + ph + 18
       << "\" text-anchor=\"middle\">1e" << static_cast<int>(e) << "</text>\n";
  for (double e = y0; e <= y1 + 1e-9; e += 1.0) {
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">1e"
       << static_cast<int>(e) << "</text>\n";
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(e) << "\" y2=\""
       << py(e) << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
     << x_label << "</text>\n";
  os << "<text transform=\"translate(20," << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].xs.size(); ++i) {
      if (!(series[s].xs[i] > 0.0) || !(series[s].ys[i] > 0.0)) continue;
      os << px(std::log10(series[s].xs[i])) << ',' << py(std::log10(series[s].ys[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(s);
    os << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 30 << "\" y1=\"" << ly
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << series[s].name
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Runs every (strategy, option, seed) combination, writing one CSV each,
/// summary.csv and, when enabled and a reference exists, gap charts per
/// option against prox and gradient evaluations.
inline ExperimentResult run_experiment(const ExperimentConfig& c,
                                       const std::filesystem::path& cache_dir = cache_directory()) {
  auto problem = build_problem(c);
  ExperimentResult out;
  if (c.use_reference) {
    out.reference = compute_reference(problem, cache_dir);
    problem.reference_optimum = out.reference->phi_star;
  }
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out_dir + "': " + ec.message());

  std::vector<Job> jobs;
  for (const auto& name : c.strategies)
    for (auto option : c.options)
      for (auto seed : c.seeds) jobs.push_back({name, option, seed, std::nullopt});
  // Fail fast on configuration problems before spending any work.
  for (auto option : c.options) resolve_solver(c, problem, option);

  out.runs.resize(jobs.size());
  detail::parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
    auto summary = detail::execute(c, problem, jobs[i]);
    summary.csv = std::filesystem::path(c.out_dir) / detail::csv_name(summary);
    std::ostringstream os;
    write_csv(os, summary.records);
    detail::write_file(summary.csv, os.str());
    if (c.audit && !summary.audits.empty()) {
      std::ostringstream audit;
      for (const auto& a : summary.audits) audit << a.to_text() << '\n';
      auto path = summary.csv;
      path.replace_extension(".audit.txt");
      detail::write_file(path, audit.str());
    }
    out.runs[i] = std::move(summary);
  });

  out.summary_csv = std::filesystem::path(c.out_dir) / "summary.csv";
  detail::write_file(out.summary_csv, detail::summary_table(out.runs));

  if (c.svg && out.reference) {
    for (auto option : c.options) {
      std::vector<Series> by_prox, by_grad;
      for (const auto& r : out.runs) {
        if (r.option != option || r.seed != c.seeds.front()) continue;
        Series sp{r.label, {}, {}}, sg{r.label, {}, {}};
        for (const auto& rec : r.records) {
          if (!rec.gap) continue;
          sp.xs.push_back(static_cast<double>(rec.prox_evals));
          sp.ys.push_back(*rec.gap);
          sg.xs.push_back(static_cast<double>(rec.grad_evals));
          sg.ys.push_back(*rec.gap);
        }
        by_prox.push_back(std::move(sp));
        by_grad.push_back(std::move(sg));
      }
      const std::string tag = to_string(option);
      const auto p1 = std::filesystem::path(c.out_dir) / ("gap-prox-" + tag + ".svg");
      const auto p2 = std::filesystem::path(c.out_dir) / ("gap-grad-" + tag + ".svg");
      detail::write_file(p1, svg_chart("Option " + tag, "prox evaluations", "phi - phi*", by_prox));
      detail::write_file(p2, svg_chart("Option " + tag, "gradient evaluations", "phi - phi*", by_grad));
      out.charts.push_back(p1);
      out.charts.push_back(p2);
    }
  }
  return out;
}

class SweepFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepPoint {
  std::string label;
  Option option = Option::I;
  double alpha = 0.0;
  bool diverged = false;
  double final_value = 0.0;  // final gap, or final phi without a reference
};

struct SweepChoice {
  std::string label;
  Option option = Option::I;
  double alpha = 0.0;
  double final_value = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<SweepChoice> best;  // one per (strategy, option)
};

/// Runs every grid step for each (strategy, option) with the first seed and
/// keeps the step with the smallest final gap among runs that did not
/// diverge; ties go to the larger step.
inline SweepResult sweep_step_size(const ExperimentConfig& c, const std::vector<double>& grid,
                                   const std::filesystem::path& cache_dir = cache_directory()) {
  if (grid.empty()) throw InvalidConfig("step-size grid is empty");
  auto problem = build_problem(c);
  if (c.use_reference) problem.reference_optimum = compute_reference(problem, cache_dir).phi_star;

  std::vector<Job> jobs;
  for (const auto& name : c.strategies)
    for (auto option : c.options)
      for (double a : grid) jobs.push_back({name, option, c.seeds.front(), a});
  for (auto option : c.options) resolve_solver(c, problem, option);

  ExperimentConfig quiet = c;
  quiet.audit = false;
  SweepResult out;
  out.points.resize(jobs.size());
  detail::parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
    const auto s = detail::execute(quiet, problem, jobs[i]);
    auto& p = out.points[i];
    p.label = s.label;
    p.option = s.option;
    p.alpha = s.alpha;
    p.diverged = s.diverged;
    p.final_value = s.final_gap ? *s.final_gap : s.final_phi;
    if (!std::isfinite(p.final_value)) p.diverged = true;
  });

  for (std::size_t start = 0; start < out.points.size(); start += grid.size()) {
    std::optional<SweepChoice> best;
    for (std::size_t i = start; i < start + grid.size(); ++i) {
      const auto& p = out.points[i];
      if (p.diverged) continue;
      if (!best || p.final_value < best->final_value ||
          (p.final_value == best->final_value && p.alpha > best->alpha))
        best = SweepChoice{p.label, p.option, p.alpha, p.final_value};
    }
    if (!best)
      throw SweepFailed("every step size diverged for " + out.points[start].label + " Option " +
                        to_string(out.points[start].option));
    out.best.push_back(*best);
  }
  return out;
}

}  // namespace adaprox
