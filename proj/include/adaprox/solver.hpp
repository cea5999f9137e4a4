#pragma once

#include <adaprox/counter.hpp>
#include <adaprox/error.hpp>
#include <adaprox/estimator.hpp>
#include <adaprox/metrics.hpp>
#include <adaprox/problems.hpp>
#include <adaprox/prox.hpp>
#include <adaprox/types.hpp>
#include <adaprox/verify.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace adaprox {

/// beta_k for the accelerated update y_{k+1} = x_{k+1} + beta_{k+1} (x_{k+1} - x_k).
struct AccelerationSchedule {
  enum class Kind { None, ConvexNesterov, StrongConvexConstant, FixedBeta };
  Kind kind = Kind::None;
  double theta = 0.0;
  double fixed_beta = 0.0;

  static AccelerationSchedule none() { return {}; }

  /// beta_k = (k-1)/(k+2).
  static AccelerationSchedule convex_nesterov() { return {Kind::ConvexNesterov, 0.0, 0.0}; }

  /// theta = sqrt(mu alpha), beta = (1 - theta)/(1 + theta).
  static AccelerationSchedule strong_convex(double mu, double alpha) {
    if (!(mu > 0.0)) throw InvalidConfig("strongly convex acceleration requires mu > 0");
    if (!(alpha > 0.0)) throw InvalidConfig("acceleration requires alpha > 0");
    if (mu * alpha > 1.0) throw InvalidConfig("strongly convex acceleration requires mu * alpha <= 1");
    return {Kind::StrongConvexConstant, std::sqrt(mu * alpha), 0.0};
  }

  static AccelerationSchedule fixed(double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw InvalidConfig("fixed beta must lie in [0, 1)");
    return {Kind::FixedBeta, 0.0, beta};
  }

  /// (sqrt(kappa) - 1)/(sqrt(kappa) + 1).
  static AccelerationSchedule from_condition_number(double kappa) {
    if (!(kappa >= 1.0)) throw InvalidConfig("condition number must be >= 1");
    const double s = std::sqrt(kappa);
    return fixed((s - 1.0) / (s + 1.0));
  }

  std::string name() const {
    switch (kind) {
      case Kind::None:
        return "none";
      case Kind::ConvexNesterov:
        return "convex_nesterov";
      case Kind::StrongConvexConstant:
        return "strong_convex";
      case Kind::FixedBeta:
        return "fixed";
    }
    return "?";
  }
};

/// beta_k for k >= 1. beta_0 is never used.
inline double beta(const AccelerationSchedule& schedule, std::uint64_t k) {
  if (k < 1) throw InvalidArgument("beta is defined for k >= 1");
  switch (schedule.kind) {
    case AccelerationSchedule::Kind::None:
      return 0.0;
    case AccelerationSchedule::Kind::ConvexNesterov:
      return (static_cast<double>(k) - 1.0) / (static_cast<double>(k) + 2.0);
    case AccelerationSchedule::Kind::StrongConvexConstant:
      return (1.0 - schedule.theta) / (1.0 + schedule.theta);
    case AccelerationSchedule::Kind::FixedBeta:
      return schedule.fixed_beta;
  }
  return 0.0;
}

struct StoppingRules {
  std::uint64_t max_iters = 10'000;
  std::uint64_t grad_budget = 100'000'000;
  std::optional<double> target_gap;  // needs a reference optimum
};

struct SolverConfig {
  Option option = Option::I;
  double alpha = 0.0;  // constant step size
  AccelerationSchedule acceleration;
  StoppingRules stop;
  std::optional<Vector> x0;  // zeros when unset
  // Audit mode: record the true reduced gradient, and audit the condition
  // (finite-sum form) when `audit_condition` or an adaptive finite-sum
  // strategy supplies the parameters.
  bool audit = false;
  std::optional<ConditionParams> audit_condition;
  bool record_wall_time = true;
  bool keep_iterates = false;
};

struct SolverState {
  Vector x;
  Vector y;
  std::uint64_t k = 0;
  std::uint64_t prox_evals = 0;
  std::uint64_t grad_evals = 0;
};

enum class StopReason { MaxIterations, GradientBudget, TargetReached };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxIterations:
      return "max_iters";
    case StopReason::GradientBudget:
      return "grad_budget";
    case StopReason::TargetReached:
      return "target_reached";
  }
  return "?";
}

struct RunResult {
  SolverState state;
  StopReason reason = StopReason::MaxIterations;
  std::vector<IterationRecord> records;
  std::vector<verify::ConditionAudit> audits;
  std::uint64_t audit_evals = 0;
  std::vector<Vector> xs;  // x_0..x_K when keep_iterates
  std::vector<Vector> ys;  // y_0..y_K when keep_iterates
};

/// Raised when an iterate or objective value stops being finite. Carries the
/// records produced so far; the last one is the last finite iterate.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, std::vector<IterationRecord> records)
      : std::runtime_error(what), records_(std::move(records)) {}

  const std::vector<IterationRecord>& records() const { return records_; }
  const IterationRecord& last_finite() const { return records_.back(); }

 private:
  std::vector<IterationRecord> records_;
};

namespace detail {

inline std::string diagnostic_flags(const EstimateDiagnostics& d, bool adaptive) {
  std::ostringstream os;
  auto sep = [&os, first = true]() mutable {
    if (!first) os << ';';
    first = false;
  };
  if (d.capped) sep(), os << "capped";
  if (d.exact) sep(), os << "exact";
  if (d.augmentation_limit) sep(), os << "auglimit";
  if (adaptive) {
    sep();
    os << "target=" << d.target_size;
    sep();
    os << "aug=" << d.augmentations;
    sep();
    os << "draws=" << d.draws;
    sep();
    os << "sigma2=";
    write_double(os, d.sigma_sq);
    sep();
    os << "denom=";
    write_double(os, d.denominator);
  }
  return os.str();
}

}  // namespace detail

/// (Accelerated) proximal gradient with sampled gradient estimates.
///
/// Each iteration forms g_k with the strategy, steps
/// x_{k+1} = prox(alpha, y_k - alpha g_k), then sets y_{k+1} = x_{k+1}
/// (Option I) or x_{k+1} + beta_{k+1} (x_{k+1} - x_k) (Option II).
inline RunResult run(const CompositeProblem& problem, const SamplingStrategy& strategy,
                     const SolverConfig& config) {
  const auto& f = *problem.smooth;
  const double alpha = config.alpha;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidConfig("step size must be positive");
  if (config.option == Option::II &&
      config.acceleration.kind == AccelerationSchedule::Kind::StrongConvexConstant &&
      !(f.strong_convexity() > 0.0))
    throw InvalidConfig("strongly convex acceleration on a problem with mu = 0");
  if (config.stop.target_gap && !problem.reference_optimum)
    throw InvalidConfig("target gap requires a reference optimum");

  Vector x = config.x0 ? *config.x0 : Vector::Zero(f.dimension());
  if (x.size() != f.dimension()) throw InvalidConfig("x0 has the wrong dimension");
  if (!x.allFinite()) throw InvalidConfig("x0 must be finite");
  Vector y = x;

  GradientEstimator estimator(strategy, problem);
  const bool adaptive = strategy.adaptive() != nullptr;
  std::optional<ConditionParams> audit_params = config.audit_condition;
  if (!audit_params) {
    if (const auto* a = strategy.adaptive();
        a && a->condition.variant == ConditionVariant::FiniteSum)
      audit_params = a->condition;
  }

  Counter prox_evals, grad_evals, audit_evals;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!config.record_wall_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  RunResult out;
  auto make_record = [&](std::uint64_t k, const Vector& xk) {
    IterationRecord r;
    r.k = k;
    r.prox_evals = prox_evals.value();
    r.grad_evals = grad_evals.value();
    r.phi = problem.phi(xk);
    if (problem.reference_optimum) r.gap = r.phi - *problem.reference_optimum;
    return r;
  };
  auto reached = [&](const IterationRecord& r) {
    return config.stop.target_gap && r.gap && *r.gap <= *config.stop.target_gap;
  };

  out.records.push_back(make_record(0, x));
  out.records.back().wall_time_s = elapsed();
  if (config.keep_iterates) {
    out.xs.push_back(x);
    out.ys.push_back(y);
  }

  std::uint64_t k = 0;
  StopReason reason = StopReason::MaxIterations;
  bool done = false;
  if (reached(out.records.back())) {
    reason = StopReason::TargetReached;
    done = true;
  } else if (config.stop.max_iters == 0) {
    done = true;
  }

  while (!done) {
    const auto est = estimator.estimate(y, k, alpha, grad_evals);
    const Vector x_next = prox_step(problem, alpha, y, est.g, prox_evals);
    if (!x_next.allFinite())
      throw DivergedError("non-finite iterate at k = " + std::to_string(k + 1), out.records);
    const double r_norm = reduced_gradient(alpha, y, x_next).norm();

    std::optional<double> true_norm;
    if (config.audit) {
      true_norm = true_reduced_gradient(problem, alpha, y, &audit_evals).norm();
      if (audit_params)
        out.audits.push_back(
            verify::audit_condition(problem, est.g, y, x_next, alpha, *audit_params, k, &audit_evals));
    }

    Vector y_next = x_next;
    if (config.option == Option::II) y_next += beta(config.acceleration, k + 1) * (x_next - x);
    x = x_next;
    y = std::move(y_next);
    ++k;

    IterationRecord rec = make_record(k, x);
    rec.sample_size = est.sample_size;
    rec.reduced_grad_norm = r_norm;
    rec.true_reduced_grad_norm = true_norm;
    rec.flags = detail::diagnostic_flags(est.diag, adaptive);
    rec.wall_time_s = elapsed();
    if (!std::isfinite(rec.phi) || !y.allFinite())
      throw DivergedError("objective diverged at k = " + std::to_string(k), out.records);
    out.records.push_back(std::move(rec));
    if (config.keep_iterates) {
      out.xs.push_back(x);
      out.ys.push_back(y);
    }

    if (reached(out.records.back())) {
      reason = StopReason::TargetReached;
      break;
    }
    if (k >= config.stop.max_iters) {
      reason = StopReason::MaxIterations;
      break;
    }
    if (grad_evals.value() >= config.stop.grad_budget) {
      reason = StopReason::GradientBudget;
      break;
    }
  }

  out.reason = reason;
  out.state = SolverState{std::move(x), std::move(y), k, prox_evals.value(), grad_evals.value()};
  out.audit_evals = audit_evals.value();
  return out;
}

/// Parameter regimes under which a convergence guarantee holds.
enum class Preset {
  NonconvexI,
  ConvexI,
  ConvexII,
  ConvexIUnbiased,
  ConvexIIUnbiased,
  StrongI,
  StrongII,
  StrongIUnbiased,
  StrongIIUnbiased,
};

inline const char* to_string(Preset p) {
  switch (p) {
    case Preset::NonconvexI:
      return "NonconvexI";
    case Preset::ConvexI:
      return "ConvexI";
    case Preset::ConvexII:
      return "ConvexII";
    case Preset::ConvexIUnbiased:
      return "ConvexI-Unbiased";
    case Preset::ConvexIIUnbiased:
      return "ConvexII-Unbiased";
    case Preset::StrongI:
      return "StrongI";
    case Preset::StrongII:
      return "StrongII";
    case Preset::StrongIUnbiased:
      return "StrongI-Unbiased";
    case Preset::StrongIIUnbiased:
      return "StrongII-Unbiased";
  }
  return "?";
}

inline Preset parse_preset(std::string_view name) {
  for (auto p : {Preset::NonconvexI, Preset::ConvexI, Preset::ConvexII, Preset::ConvexIUnbiased,
                 Preset::ConvexIIUnbiased, Preset::StrongI, Preset::StrongII,
                 Preset::StrongIUnbiased, Preset::StrongIIUnbiased})
    if (name == to_string(p)) return p;
  throw InvalidConfig("unknown preset '" + std::string(name) + "'");
}

/// User-tunable constants. `eta` / `iota0` are the constant-schedule values
/// (eta-tilde, iota-tilde for unbiased regimes); decaying schedules use
/// `eta_hat`. Polynomial delta schedules take their exponent from `nu`,
/// geometric ones use `delta` as the ratio. `variant` picks the finite-sum
/// or expectation form for the biased regimes.
struct PresetKnobs {
  double eta = 0.1;
  double iota0 = 0.0;
  double nu = 0.5;
  double delta = 0.5;
  double eta_hat = 0.1;
  double delta_hat = 0.1;
  ConditionVariant variant = ConditionVariant::FiniteSum;
};

struct PresetConfig {
  Preset preset = Preset::NonconvexI;
  Option option = Option::I;
  double alpha = 0.0;
  ConditionParams condition;
  AccelerationSchedule acceleration;
};

namespace detail {

inline void require(bool ok, Preset p, const std::string& inequality) {
  if (!ok) throw InvalidConfig(std::string(to_string(p)) + ": requires " + inequality);
}

}  // namespace detail

/// The largest step the regime allows, with matching condition parameters
/// and acceleration. Every hypothesis is re-checked; a violation raises
/// InvalidConfig naming the inequality.
inline PresetConfig preset_config(Preset preset, double lipschitz, double mu,
                                  const PresetKnobs& knobs = {}) {
  using detail::require;
  const double L = lipschitz;
  require(L > 0.0 && std::isfinite(L), preset, "L > 0");
  require(mu >= 0.0 && mu <= L, preset, "0 <= mu <= L");
  require(knobs.iota0 >= 0.0, preset, "iota0 >= 0");
  require(knobs.eta >= 0.0 && knobs.eta_hat >= 0.0 && knobs.delta_hat >= 0.0, preset,
          "eta, eta_hat, delta_hat >= 0");

  PresetConfig out;
  out.preset = preset;
  auto& cond = out.condition;
  const double eta = knobs.eta;
  const double eta_hat = knobs.eta_hat;
  const double iota_sq = knobs.iota0 * knobs.iota0;
  cond.iota0 = knobs.iota0;

  auto need_strong = [&] { require(mu > 0.0, preset, "mu > 0 (strongly convex objective)"); };
  auto need_nu = [&] { require(knobs.nu > 0.0, preset, "nu > 0"); };
  auto need_delta_ratio = [&] {
    require(knobs.delta >= 0.0 && knobs.delta < 1.0, preset, "delta in [0, 1)");
  };

  switch (preset) {
    case Preset::NonconvexI: {
      need_nu();
      require(eta < 1.0, preset, "eta in [0, 1)");
      require(knobs.iota0 < std::sqrt((1.0 - eta) / 2.0), preset, "iota0 < sqrt((1 - eta)/2)");
      cond.variant = knobs.variant;
      cond.eta = EtaSchedule::constant(eta);
      cond.delta = DeltaSchedule::power((1.0 + knobs.nu) / 2.0);
      out.alpha = (1.0 - eta) / (2.0 * L);
      break;
    }
    case Preset::ConvexI:
    case Preset::ConvexII: {
      need_nu();
      require(eta_hat < 0.5, preset, "eta_hat < 1/2");
      require(iota_sq < 0.5 - eta_hat, preset, "iota0^2 < 1/2 - eta_hat");
      cond.variant = knobs.variant;
      if (preset == Preset::ConvexI) {
        // eta_k = eta_hat/(k+1) is square summable; delta_k summable needs q > 1.
        cond.eta = EtaSchedule::power_decay(eta_hat, 1.0);
        cond.delta = DeltaSchedule::power(1.0 + knobs.nu);
        out.acceleration = AccelerationSchedule::none();
      } else {
        // t_k = (k+1)^-(1+nu) makes sum k t_k^2 finite; u_k = (k+1)^-(3+nu)
        // makes sum (k+2)^2 u_k finite.
        cond.eta = EtaSchedule::power_decay(eta_hat, 1.0 + knobs.nu);
        cond.delta = DeltaSchedule::power(3.0 + knobs.nu, knobs.delta_hat);
        out.acceleration = AccelerationSchedule::convex_nesterov();
        out.option = Option::II;
      }
      out.alpha = (1.0 - 2.0 * (eta_hat + iota_sq)) / (2.0 * L);
      break;
    }
    case Preset::ConvexIUnbiased:
    case Preset::ConvexIIUnbiased: {
      need_nu();
      require(eta < 1.0, preset, "eta in [0, 1)");
      require(iota_sq < 1.0 - eta || knobs.iota0 == 0.0, preset, "iota0^2 < 1 - eta");
      cond.variant = ConditionVariant::Expectation;
      cond.eta = EtaSchedule::constant(eta);
      if (preset == Preset::ConvexIUnbiased) {
        cond.delta = DeltaSchedule::power((1.0 + knobs.nu) / 2.0);
      } else {
        // sum delta_k^2 / theta_{k+1}^2 < inf with theta_{k+1} = 2/(k+2).
        cond.delta = DeltaSchedule::power((3.0 + knobs.nu) / 2.0);
        out.acceleration = AccelerationSchedule::convex_nesterov();
        out.option = Option::II;
      }
      out.alpha = (1.0 - eta - iota_sq) / L;
      break;
    }
    case Preset::StrongI: {
      need_strong();
      need_delta_ratio();
      cond.variant = knobs.variant;
      cond.eta = EtaSchedule::constant(eta);
      cond.delta = DeltaSchedule::geometric(knobs.delta);
      if (knobs.variant == ConditionVariant::FiniteSum) {
        require(eta < 0.5, preset, "eta in [0, 1/2)");
        out.alpha = (1.0 - 4.0 * eta * eta) / (2.0 * L);
      } else {
        require(eta < 1.0 / std::sqrt(2.0), preset, "eta in [0, 1/sqrt(2))");
        out.alpha = (1.0 - 2.0 * eta * eta) / (2.0 * L);
      }
      break;
    }
    case Preset::StrongII: {
      need_strong();
      need_delta_ratio();
      const double c_hat = mu / 4.0 * (1.0 - std::sqrt(mu / L));
      const double denom = knobs.variant == ConditionVariant::FiniteSum ? 4.0 : 2.0;
      require(eta <= std::sqrt(c_hat / (denom * (L + c_hat))), preset,
              knobs.variant == ConditionVariant::FiniteSum ? "eta <= sqrt(c_hat / (4 (L + c_hat)))"
                                                           : "eta <= sqrt(c_hat / (2 (L + c_hat)))");
      cond.variant = knobs.variant;
      cond.eta = EtaSchedule::constant(eta);
      cond.delta = DeltaSchedule::geometric(knobs.delta);
      out.alpha = 1.0 / (2.0 * (L + c_hat));
      out.acceleration = AccelerationSchedule::strong_convex(mu, out.alpha);
      out.option = Option::II;
      break;
    }
    case Preset::StrongIUnbiased: {
      need_strong();
      need_delta_ratio();
      require(eta < 1.0, preset, "eta in [0, 1)");
      cond.variant = ConditionVariant::Expectation;
      cond.eta = EtaSchedule::constant(eta);
      cond.delta = DeltaSchedule::geometric(knobs.delta);
      out.alpha = (2.0 - eta * eta) / (2.0 * L);
      break;
    }
    case Preset::StrongIIUnbiased: {
      need_strong();
      need_delta_ratio();
      require(eta < 1.0, preset, "eta in [0, 1)");
      require(iota_sq < eta || knobs.iota0 == 0.0, preset, "iota0^2 < eta");
      cond.variant = ConditionVariant::Expectation;
      cond.eta = EtaSchedule::constant(eta);
      cond.delta = DeltaSchedule::geometric(knobs.delta);
      out.alpha = (1.0 - eta - iota_sq) / L;
      out.acceleration = AccelerationSchedule::strong_convex(mu, out.alpha);
      out.option = Option::II;
      break;
    }
  }
  require(out.alpha > 0.0 && out.alpha <= 1.0 / L * (1.0 + 1e-15), preset, "0 < alpha <= 1/L");
  return out;
}

}  // namespace adaprox
