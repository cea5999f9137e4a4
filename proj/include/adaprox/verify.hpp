#pragma once

// Independent oracles for the test suite and the solver's audit mode. Nothing
// here reuses the closed-form prox or sizing code it is meant to check.

#include <adaprox/counter.hpp>
#include <adaprox/error.hpp>
#include <adaprox/estimator.hpp>
#include <adaprox/problems.hpp>
#include <adaprox/prox.hpp>
#include <adaprox/types.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

namespace adaprox::verify {

/// Central differences (f(x + h e_j) - f(x - h e_j)) / (2h).
template <typename F>
Vector finite_difference_gradient(F&& f, const Vector& x, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite difference step must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + step;
    const double up = f(probe);
    probe[j] = x[j] - step;
    const double down = f(probe);
    probe[j] = x[j];
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

inline Vector finite_difference_gradient(const SmoothObjective& f, const Vector& x, double step) {
  return finite_difference_gradient([&f](const Vector& z) { return f.value(z); }, x, step);
}

/// argmin_p  t|p| + (p - y)^2 / 2  by a grid scan over
/// [y - 2t - 1, y + 2t + 1] followed by golden-section refinement.
inline double scalar_l1_prox_oracle(double alpha, double lambda, double y, double grid_step = 1e-4,
                                    double tol = 1e-10) {
  const double t = alpha * lambda;
  auto obj = [t, y](double p) { return t * std::abs(p) + 0.5 * (p - y) * (p - y); };
  const double lo = y - 2.0 * t - 1.0;
  const double hi = y + 2.0 * t + 1.0;
  const auto steps = static_cast<long>(std::ceil((hi - lo) / grid_step));
  double best = lo;
  double best_val = obj(lo);
  for (long i = 1; i <= steps; ++i) {
    const double p = std::min(lo + static_cast<double>(i) * grid_step, hi);
    const double v = obj(p);
    if (v < best_val) {
      best_val = v;
      best = p;
    }
  }
  double a = best - grid_step;
  double b = best + grid_step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = obj(c), fd = obj(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = obj(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = obj(d);
    }
  }
  const double mid = 0.5 * (a + b);
  // The kink at zero is the minimiser whenever the bracket straddles it.
  if (a <= 0.0 && b >= 0.0 && obj(0.0) <= obj(mid)) return 0.0;
  return mid;
}

struct ProxCheck {
  bool pass = true;
  Index coordinate = -1;  // first violating coordinate, -1 for whole-vector checks
  std::string witness;

  explicit operator bool() const { return pass; }
};

/// First-order optimality of p for min_x h(x) + ||x - y||^2 / (2 alpha).
inline ProxCheck check_prox_optimality(const NonsmoothTerm& term, double alpha, const Vector& y,
                                       const Vector& p, double tol) {
  if (y.size() != p.size()) throw InvalidArgument("check_prox_optimality: size mismatch");
  auto fail = [](Index j, std::string why) {
    ProxCheck c;
    c.pass = false;
    c.coordinate = j;
    c.witness = std::move(why);
    return c;
  };
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };

  if (std::holds_alternative<ZeroTerm>(term.kind())) {
    for (Index j = 0; j < y.size(); ++j)
      if (std::abs(p[j] - y[j]) > tol) return fail(j, "p != y: |" + num(p[j] - y[j]) + "|");
    return {};
  }
  if (const auto* l1 = std::get_if<L1Term>(&term.kind())) {
    for (Index j = 0; j < y.size(); ++j) {
      if (p[j] != 0.0) {
        const double s = p[j] > 0.0 ? 1.0 : -1.0;
        const double r = (y[j] - p[j]) / alpha - l1->lambda * s;
        if (std::abs(r) > tol) return fail(j, "stationarity residual " + num(r));
      } else if (std::abs(y[j]) / alpha > l1->lambda + tol) {
        return fail(j, "zero entry but |y|/alpha = " + num(std::abs(y[j]) / alpha));
      }
    }
    return {};
  }
  if (const auto* ball = std::get_if<BallIndicator>(&term.kind())) {
    const double pn = p.norm();
    const double yn = y.norm();
    if (pn > ball->radius + tol) return fail(-1, "||p|| = " + num(pn) + " exceeds radius");
    if (yn <= ball->radius) {
      if ((p - y).norm() > tol) return fail(-1, "interior point moved by " + num((p - y).norm()));
    } else {
      const Vector expect = y * (ball->radius / yn);
      for (Index j = 0; j < y.size(); ++j)
        if (std::abs(p[j] - expect[j]) > tol)
          return fail(j, "not the radial projection: off by " + num(p[j] - expect[j]));
    }
    return {};
  }
  if (const auto* box = std::get_if<BoxIndicator>(&term.kind())) {
    for (Index j = 0; j < y.size(); ++j) {
      const double l = box->lower[j], u = box->upper[j];
      if (p[j] < l - tol || p[j] > u + tol) return fail(j, "outside the box");
      const double want = y[j] < l ? l : (y[j] > u ? u : y[j]);
      if (std::abs(p[j] - want) > tol) return fail(j, "clamp violated by " + num(p[j] - want));
    }
    return {};
  }
  throw Unsupported("check_prox_optimality: unknown nonsmooth kind");
}

/// (1/N) sum_i ||grad F_i(x) - grad f(x)||^2, the exact per-sample variance.
inline double exact_sample_variance(const SmoothObjective& f, const Vector& x) {
  const Vector mean = f.full_gradient(x);
  double s = 0.0;
  for (Index i = 0; i < f.sample_count(); ++i) s += (f.sample_gradient(x, i) - mean).squaredNorm();
  return s / static_cast<double>(f.sample_count());
}

/// max_i ||grad F_i(x) - grad f(x)||.
inline double max_sample_deviation(const SmoothObjective& f, const Vector& x) {
  const Vector mean = f.full_gradient(x);
  double worst = 0.0;
  for (Index i = 0; i < f.sample_count(); ++i)
    worst = std::max(worst, (f.sample_gradient(x, i) - mean).norm());
  return worst;
}

/// Both sides of the deterministic accuracy condition at one iterate, the
/// rearranged form in terms of the true reduced gradient, and the prox
/// contraction bound ||R - R_true|| <= ||g - grad f||.
struct ConditionAudit {
  std::uint64_t k = 0;
  double error_norm = 0.0;
  double reduced_norm = 0.0;
  double true_reduced_norm = 0.0;
  double eta = 0.0;
  double iota_delta = 0.0;

  double rhs = 0.0;
  bool pass = false;
  double rearranged_lhs = 0.0;
  double rearranged_rhs = 0.0;
  bool rearranged_pass = false;
  double contraction_gap = 0.0;  // ||R - R_true||
  bool contraction_pass = false;

  double margin() const { return rhs - error_norm; }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "audit k=" << k << " error=" << error_norm << " rhs=" << rhs << " pass=" << pass
       << " rearranged_lhs=" << rearranged_lhs << " rearranged_rhs=" << rearranged_rhs
       << " rearranged_pass=" << rearranged_pass << " reduced=" << reduced_norm
       << " true_reduced=" << true_reduced_norm << " contraction_pass=" << contraction_pass;
    return os.str();
  }
};

inline ConditionAudit audit_condition(const CompositeProblem& problem, const Vector& g,
                                      const Vector& y, const Vector& x_next, double alpha,
                                      const ConditionParams& params, std::uint64_t k,
                                      Counter* audit_evals = nullptr) {
  const Vector grad = problem.smooth->full_gradient(y);
  if (audit_evals) audit_evals->add(static_cast<std::uint64_t>(problem.smooth->sample_count()));
  const Vector x_hat = problem.nonsmooth.prox(alpha, y - alpha * grad);
  const Vector r = (y - x_next) / alpha;
  const Vector r_true = (y - x_hat) / alpha;

  ConditionAudit a;
  a.k = k;
  a.eta = params.eta.at(k);
  a.iota_delta = params.iota0 * params.delta.at(k);
  a.error_norm = (g - grad).norm();
  a.reduced_norm = r.norm();
  a.true_reduced_norm = r_true.norm();
  a.rhs = 0.5 * a.eta * a.reduced_norm + a.iota_delta;
  a.pass = a.error_norm <= a.rhs;
  a.rearranged_lhs = (1.0 - 0.5 * a.eta) * a.error_norm;
  a.rearranged_rhs = 0.5 * a.eta * a.true_reduced_norm + a.iota_delta;
  a.rearranged_pass = a.rearranged_lhs <= a.rearranged_rhs;
  a.contraction_gap = (r - r_true).norm();
  a.contraction_pass = a.contraction_gap <= a.error_norm + 1e-10;
  return a;
}

struct MonteCarloReport {
  std::size_t replications = 0;
  double mse = 0.0;                 // mean of ||g - grad f(y)||^2
  double mean_reduced_norm_sq = 0.0;  // ||mean of R||^2
  double mean_sample_size = 0.0;
  std::optional<double> bound;
  std::optional<bool> holds;  // mse <= 1.15 * bound
};

/// Monte Carlo estimate of the expected squared gradient error at a fixed y.
/// Replication r runs a fresh estimator whose seed is derived from r.
inline MonteCarloReport monte_carlo_condition(const CompositeProblem& problem,
                                              const SamplingStrategy& strategy, const Vector& y,
                                              std::size_t replications, double alpha,
                                              std::optional<ConditionParams> params = std::nullopt) {
  if (replications < 100) throw InvalidArgument("monte_carlo_condition: need >= 100 replications");
  if (!params) {
    if (const auto* a = strategy.adaptive()) params = a->condition;
  }
  const Vector grad = problem.smooth->full_gradient(y);
  Vector r_sum = Vector::Zero(y.size());
  double err_sum = 0.0;
  double size_sum = 0.0;
  for (std::size_t rep = 0; rep < replications; ++rep) {
    SamplingStrategy s = strategy;
    std::seed_seq seq{static_cast<std::uint32_t>(strategy.seed),
                      static_cast<std::uint32_t>(strategy.seed >> 32),
                      static_cast<std::uint32_t>(rep), 0x6d63u};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    s.seed = (std::uint64_t{words[0]} << 32) | words[1];
    GradientEstimator est(std::move(s), problem);
    Counter evals;
    const auto e = est.estimate(y, 0, alpha, evals);
    err_sum += (e.g - grad).squaredNorm();
    size_sum += static_cast<double>(e.sample_size);
    r_sum += (y - problem.nonsmooth.prox(alpha, y - alpha * e.g)) / alpha;
  }
  const auto n = static_cast<double>(replications);
  MonteCarloReport rep;
  rep.replications = replications;
  rep.mse = err_sum / n;
  rep.mean_sample_size = size_sum / n;
  rep.mean_reduced_norm_sq = (r_sum / n).squaredNorm();
  if (params) {
    const double eta = params->eta.at(0);
    const double id = params->iota0 * params->delta.at(0);
    rep.bound = 0.25 * eta * eta * rep.mean_reduced_norm_sq + id * id;
  } else if (std::holds_alternative<FullBatch>(strategy.kind)) {
    rep.bound = 0.0;
  }
  if (rep.bound) rep.holds = rep.mse <= 1.15 * *rep.bound;
  return rep;
}

}  // namespace adaprox::verify
