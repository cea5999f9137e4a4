#pragma once

#include <adaprox/counter.hpp>
#include <adaprox/error.hpp>
#include <adaprox/problems.hpp>
#include <adaprox/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace adaprox {

/// Which form of the accuracy condition drives sample sizing.
///
/// FiniteSum bounds the error deterministically and samples without
/// replacement; Expectation bounds the mean squared error and samples i.i.d.
/// with replacement.
enum class ConditionVariant { FiniteSum, Expectation };

inline const char* to_string(ConditionVariant v) {
  return v == ConditionVariant::FiniteSum ? "finite_sum" : "expectation";
}

/// eta_k, either constant or eta_hat / (k+1)^p.
struct EtaSchedule {
  enum class Kind { Constant, PowerDecay };
  Kind kind = Kind::Constant;
  double eta = 0.0;
  double exponent = 0.0;

  static EtaSchedule constant(double eta) {
    if (!(eta >= 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie in [0, 1)");
    return {Kind::Constant, eta, 0.0};
  }
  static EtaSchedule power_decay(double eta_hat, double exponent) {
    if (!(eta_hat >= 0.0 && eta_hat < 1.0)) throw InvalidArgument("eta_hat must lie in [0, 1)");
    if (!(exponent >= 0.0)) throw InvalidArgument("eta exponent must be nonnegative");
    return {Kind::PowerDecay, eta_hat, exponent};
  }

  double at(std::uint64_t k) const {
    if (kind == Kind::Constant) return eta;
    return eta / std::pow(static_cast<double>(k) + 1.0, exponent);
  }
  /// sup_k eta_k
  double bound() const { return eta; }
};

/// delta_k: zero, scale / (k+1)^q, or scale * ratio^k.
struct DeltaSchedule {
  enum class Kind { Zero, Power, Geometric };
  Kind kind = Kind::Zero;
  double scale = 1.0;
  double exponent = 0.0;
  double ratio = 0.0;

  static DeltaSchedule zero() { return {}; }
  static DeltaSchedule power(double exponent, double scale = 1.0) {
    if (!(exponent >= 0.0)) throw InvalidArgument("delta exponent must be nonnegative");
    if (!(scale >= 0.0)) throw InvalidArgument("delta scale must be nonnegative");
    return {Kind::Power, scale, exponent, 0.0};
  }
  static DeltaSchedule geometric(double ratio, double scale = 1.0) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw InvalidArgument("delta ratio must lie in [0, 1)");
    if (!(scale >= 0.0)) throw InvalidArgument("delta scale must be nonnegative");
    return {Kind::Geometric, scale, 0.0, ratio};
  }

  double at(std::uint64_t k) const {
    switch (kind) {
      case Kind::Zero:
        return 0.0;
      case Kind::Power:
        return scale / std::pow(static_cast<double>(k) + 1.0, exponent);
      case Kind::Geometric:
        return scale * std::pow(ratio, static_cast<double>(k));
    }
    return 0.0;
  }
};

/// Constants of the accuracy condition on the gradient estimate.
struct ConditionParams {
  ConditionVariant variant = ConditionVariant::Expectation;
  EtaSchedule eta = EtaSchedule::constant(0.0);
  double iota0 = 0.0;
  DeltaSchedule delta = DeltaSchedule::zero();

  void validate() const {
    if (!(eta.bound() >= 0.0 && eta.bound() < 1.0)) throw InvalidArgument("eta must lie in [0, 1)");
    if (!(iota0 >= 0.0)) throw InvalidArgument("iota0 must be nonnegative");
  }
};

/// sigma^2 used by the sizing rules: fixed, or a running sample variance.
struct VarianceEstimate {
  enum class Mode { Known, Running };
  Mode mode = Mode::Running;
  double sigma_sq = 1e-12;
  double floor = 1e-12;

  static VarianceEstimate known(double sigma_sq) {
    if (!(sigma_sq >= 0.0)) throw InvalidArgument("sigma^2 must be nonnegative");
    return {Mode::Known, sigma_sq, 0.0};
  }
  static VarianceEstimate running(double floor = 1e-12) { return {Mode::Running, floor, floor}; }
};

/// Streaming mean and sum of squared deviations of per-sample gradients.
class SampleAccumulator {
 public:
  explicit SampleAccumulator(Index dim = 0) : mean_(Vector::Zero(dim)) {}

  void reset(Index dim) {
    count_ = 0;
    mean_.setZero(dim);
    m2_ = 0.0;
  }

  void add(const Vector& sample) {
    ++count_;
    const Vector delta = sample - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.dot(sample - mean_);
  }

  Index count() const { return count_; }
  const Vector& mean() const { return mean_; }
  double squared_deviation_sum() const { return std::max(m2_, 0.0); }

 private:
  Index count_ = 0;
  Vector mean_;
  double m2_ = 0.0;
};

/// Unbiased sample variance of the accumulated gradients, floored; Known
/// mode and samples of size < 2 leave the estimate untouched.
inline VarianceEstimate update_variance(VarianceEstimate est, const SampleAccumulator& acc) {
  if (est.mode == VarianceEstimate::Mode::Known || acc.count() < 2) return est;
  est.sigma_sq = std::max(acc.squared_deviation_sum() / static_cast<double>(acc.count() - 1),
                          est.floor);
  return est;
}

inline VarianceEstimate update_variance(VarianceEstimate est, std::span<const Vector> samples,
                                        const Vector& g) {
  if (est.mode == VarianceEstimate::Mode::Known || samples.size() < 2) return est;
  double ss = 0.0;
  for (const auto& s : samples) ss += (s - g).squaredNorm();
  est.sigma_sq = std::max(ss / static_cast<double>(samples.size() - 1), est.floor);
  return est;
}

struct SampleSize {
  Index size = 1;
  double denominator = 0.0;
  bool capped = false;  // the rule asked for more than the budget allows
  bool exact = false;   // sigma = 0 in the finite-sum rule; fell back to N
};

/// |S| = ceil(sigma^2 / (eta^2/4 ||R||^2 + iota0^2 delta^2)), clamped to
/// [1, max_batch].
inline SampleSize unbiased_sample_size(double sigma_sq, double eta, double r_norm_sq,
                                       double iota0, double delta, Index max_batch) {
  if (max_batch < 1) throw InvalidArgument("max_batch must be positive");
  SampleSize out;
  out.denominator = 0.25 * eta * eta * r_norm_sq + iota0 * iota0 * delta * delta;
  if (sigma_sq <= 0.0) {
    out.size = 1;
    return out;
  }
  if (out.denominator <= 0.0) {
    out.size = max_batch;
    out.capped = true;
    return out;
  }
  const double raw = std::ceil(sigma_sq / out.denominator);
  if (!(raw <= static_cast<double>(max_batch))) {
    out.size = max_batch;
    out.capped = true;
  } else {
    out.size = std::max<Index>(1, static_cast<Index>(raw));
  }
  return out;
}

/// |S| = ceil(N / (1 + (eta ||R|| + 2 iota0 delta) / (2 sigma))), clamped to
/// [1, N]. The bound degenerates at sigma = 0, where the full set is used.
inline SampleSize finite_sum_sample_size(Index n, double sigma, double eta, double r_norm,
                                         double iota0, double delta) {
  if (n < 1) throw InvalidArgument("N must be positive");
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  SampleSize out;
  if (sigma == 0.0) {
    out.size = n;
    out.exact = true;
    return out;
  }
  out.denominator = 1.0 + (eta * r_norm + 2.0 * iota0 * delta) / (2.0 * sigma);
  const double raw = std::ceil(static_cast<double>(n) / out.denominator);
  out.size = std::clamp<Index>(static_cast<Index>(raw), 1, n);
  return out;
}

struct FullBatch {};

struct ConstantBatch {
  Index batch = 256;
};

struct GeometricGrowth {
  Index initial = 32;
  double growth = 1.05;
};

/// Settings shared by the two condition-driven strategies.
struct AdaptiveSampling {
  ConditionParams condition;
  VarianceEstimate variance = VarianceEstimate::running();
  Index initial = 32;
  int max_augmentations = 5;
  Index max_batch = 0;  // 0 means N
};

/// Fresh samples every iteration.
struct AdaptiveUnbiased : AdaptiveSampling {};

/// Sample sets grow as prefixes of one permutation, so S_k is a subset of
/// S_{k+1}; the estimate is biased.
struct AdaptiveNested : AdaptiveSampling {};

struct SamplingStrategy {
  using Kind = std::variant<FullBatch, ConstantBatch, GeometricGrowth, AdaptiveUnbiased, AdaptiveNested>;
  Kind kind = FullBatch{};
  std::uint64_t seed = 0;

  std::string label() const {
    struct {
      std::string operator()(const FullBatch&) const { return "Deterministic"; }
      std::string operator()(const ConstantBatch& c) const {
        return "Stochastic-" + std::to_string(c.batch);
      }
      std::string operator()(const GeometricGrowth&) const { return "Geometric"; }
      std::string operator()(const AdaptiveUnbiased&) const { return "Adaptive"; }
      std::string operator()(const AdaptiveNested&) const { return "Adaptive-biased"; }
    } v;
    return std::visit(v, kind);
  }

  const AdaptiveSampling* adaptive() const {
    if (auto* a = std::get_if<AdaptiveUnbiased>(&kind)) return a;
    if (auto* a = std::get_if<AdaptiveNested>(&kind)) return a;
    return nullptr;
  }
};

/// Per-iteration values reported next to the estimate.
struct EstimateDiagnostics {
  Index target_size = 0;
  int augmentations = 0;
  Index draws = 0;  // per-sample gradient calls spent this iteration
  double sigma_sq = 0.0;
  double denominator = 0.0;
  double sampled_reduced_norm = 0.0;
  bool capped = false;
  bool exact = false;
  bool augmentation_limit = false;
};

struct GradientEstimate {
  Vector g;
  Index sample_size = 0;
  EstimateDiagnostics diag;
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t key) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  return std::mt19937_64(seq);
}

// Key of the stream that fixes the nested strategy's permutation; iteration
// streams use keys 0, 1, 2, ...
inline constexpr std::uint64_t kPermutationKey = ~std::uint64_t{0};

}  // namespace detail

/// Stateful gradient estimator for one run: owns the strategy, its sample
/// size history, and the running variance estimate.
class GradientEstimator {
 public:
  GradientEstimator(SamplingStrategy strategy, const CompositeProblem& problem)
      : strategy_(std::move(strategy)), problem_(&problem) {
    const Index n = problem.smooth->sample_count();
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ConstantBatch>) {
            if (s.batch < 1) throw InvalidArgument("constant batch must be positive");
          } else if constexpr (std::is_same_v<T, GeometricGrowth>) {
            if (s.initial < 1) throw InvalidArgument("geometric initial size must be positive");
            if (!(s.growth > 1.0)) throw InvalidArgument("geometric growth must exceed 1");
            current_size_ = std::min(s.initial, n);
          } else if constexpr (std::is_base_of_v<AdaptiveSampling, T>) {
            s.condition.validate();
            if (s.initial < 1) throw InvalidArgument("adaptive initial size must be positive");
            if (s.max_augmentations < 0) throw InvalidArgument("max_augmentations must be >= 0");
            variance_ = s.variance;
            current_size_ = std::min(s.initial, cap(s));
          }
        },
        strategy_.kind);
  }

  const SamplingStrategy& strategy() const { return strategy_; }
  const VarianceEstimate& variance() const { return variance_; }
  /// Sample indices used by the most recent estimate (empty for full batch).
  const std::vector<Index>& last_indices() const { return indices_; }

  /// Gradient estimate at y for iteration k. Every per-sample gradient call,
  /// including those of inner augmentation rounds, is added to `grad_evals`.
  GradientEstimate estimate(const Vector& y, std::uint64_t k, double alpha, Counter& grad_evals) {
    if (!(alpha > 0.0)) throw InvalidArgument("estimate: alpha must be positive");
    const auto& f = *problem_->smooth;
    const Index n = f.sample_count();
    auto rng = detail::stream(strategy_.seed, k);
    indices_.clear();

    GradientEstimate out;
    if (std::holds_alternative<FullBatch>(strategy_.kind)) {
      out.g = f.full_gradient(y);
      out.sample_size = n;
      out.diag.draws = n;
      grad_evals.add(static_cast<std::uint64_t>(n));
      return out;
    }
    if (const auto* c = std::get_if<ConstantBatch>(&strategy_.kind)) {
      SampleAccumulator acc(f.dimension());
      draw_with_replacement(y, std::min(c->batch, n), rng, acc, grad_evals);
      return finish(acc, std::min(c->batch, n));
    }
    if (std::holds_alternative<GeometricGrowth>(strategy_.kind)) {
      const auto& s = std::get<GeometricGrowth>(strategy_.kind);
      const Index size = current_size_;
      SampleAccumulator acc(f.dimension());
      draw_with_replacement(y, size, rng, acc, grad_evals);
      const double next = std::ceil(s.growth * static_cast<double>(size) - 1e-9);
      current_size_ = next >= static_cast<double>(n) ? n : static_cast<Index>(next);
      return finish(acc, size);
    }
    const bool nested = std::holds_alternative<AdaptiveNested>(strategy_.kind);
    return adaptive(*strategy_.adaptive(), nested, y, k, alpha, rng, grad_evals);
  }

 private:
  Index cap(const AdaptiveSampling& s) const {
    const Index n = problem_->smooth->sample_count();
    return s.max_batch > 0 ? std::min(s.max_batch, n) : n;
  }

  GradientEstimate finish(const SampleAccumulator& acc, Index size) {
    GradientEstimate out;
    out.g = acc.mean();
    out.sample_size = size;
    out.diag.draws = size;
    out.diag.target_size = size;
    return out;
  }

  void evaluate(const Vector& y, Index i, SampleAccumulator& acc, Vector& scratch) {
    scratch.setZero();
    problem_->smooth->add_sample_gradient(y, i, scratch);
    acc.add(scratch);
    indices_.push_back(i);
  }

  void draw_with_replacement(const Vector& y, Index count, std::mt19937_64& rng,
                             SampleAccumulator& acc, Counter& grad_evals) {
    const Index n = problem_->smooth->sample_count();
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Vector scratch(problem_->smooth->dimension());
    for (Index t = 0; t < count; ++t) evaluate(y, pick(rng), acc, scratch);
    grad_evals.add(static_cast<std::uint64_t>(count));
  }

  // Extends a without-replacement sample from `taken` to `count` indices by
  // partial Fisher-Yates over `pool`.
  void draw_without_replacement(const Vector& y, Index taken, Index count, std::mt19937_64& rng,
                                SampleAccumulator& acc, Counter& grad_evals) {
    const Index n = problem_->smooth->sample_count();
    Vector scratch(problem_->smooth->dimension());
    for (Index t = taken; t < count; ++t) {
      std::uniform_int_distribution<Index> pick(t, n - 1);
      std::swap(pool_[static_cast<std::size_t>(t)], pool_[static_cast<std::size_t>(pick(rng))]);
      evaluate(y, pool_[static_cast<std::size_t>(t)], acc, scratch);
    }
    grad_evals.add(static_cast<std::uint64_t>(count - taken));
  }

  void evaluate_prefix(const Vector& y, Index from, Index to, SampleAccumulator& acc,
                       Counter& grad_evals) {
    Vector scratch(problem_->smooth->dimension());
    for (Index t = from; t < to; ++t) evaluate(y, permutation_[static_cast<std::size_t>(t)], acc, scratch);
    grad_evals.add(static_cast<std::uint64_t>(to - from));
  }

  GradientEstimate adaptive(const AdaptiveSampling& s, bool nested, const Vector& y,
                            std::uint64_t k, double alpha, std::mt19937_64& rng,
                            Counter& grad_evals) {
    const auto& f = *problem_->smooth;
    const Index n = f.sample_count();
    const Index limit = cap(s);
    const auto& cond = s.condition;
    const bool finite_sum = cond.variant == ConditionVariant::FiniteSum;
    const bool without_replacement = nested || finite_sum;
    const double eta = cond.eta.at(k);
    const double delta = cond.delta.at(k);

    if (nested && permutation_.empty()) {
      permutation_.resize(static_cast<std::size_t>(n));
      std::iota(permutation_.begin(), permutation_.end(), Index{0});
      auto prng = detail::stream(strategy_.seed, detail::kPermutationKey);
      std::shuffle(permutation_.begin(), permutation_.end(), prng);
    }
    if (without_replacement && !nested) {
      pool_.resize(static_cast<std::size_t>(n));
      std::iota(pool_.begin(), pool_.end(), Index{0});
    }

    GradientEstimate out;
    SampleAccumulator acc(f.dimension());
    Index size = std::clamp<Index>(current_size_, 1, limit);
    auto extend = [&](Index from, Index to) {
      if (nested)
        evaluate_prefix(y, from, to, acc, grad_evals);
      else if (without_replacement)
        draw_without_replacement(y, from, to, rng, acc, grad_evals);
      else
        draw_with_replacement(y, to - from, rng, acc, grad_evals);
      out.diag.draws += to - from;
    };
    extend(0, size);

    for (;;) {
      variance_ = update_variance(variance_, acc);
      // A without-replacement sample covering every index is the full set.
      const Vector g = without_replacement && size == n ? f.full_gradient(y) : acc.mean();
      const Vector candidate = problem_->nonsmooth.prox(alpha, y - alpha * g);
      const double r_norm = (y - candidate).norm() / alpha;
      SampleSize target =
          finite_sum ? finite_sum_sample_size(n, std::sqrt(variance_.sigma_sq), eta, r_norm,
                                              cond.iota0, delta)
                     : unbiased_sample_size(variance_.sigma_sq, eta, r_norm * r_norm, cond.iota0,
                                            delta, limit);
      if (target.size > limit) {
        target.size = limit;
        target.capped = true;
      }
      out.diag.target_size = target.size;
      out.diag.denominator = target.denominator;
      out.diag.capped = target.capped;
      out.diag.exact = target.exact;
      out.diag.sigma_sq = variance_.sigma_sq;
      out.diag.sampled_reduced_norm = r_norm;
      if (target.size <= size) break;
      if (out.diag.augmentations >= s.max_augmentations) {
        out.diag.augmentation_limit = true;
        break;
      }
      extend(size, target.size);
      size = target.size;
      ++out.diag.augmentations;
    }

    current_size_ = size;
    out.g = without_replacement && size == n ? f.full_gradient(y) : acc.mean();
    out.sample_size = size;
    return out;
  }

  SamplingStrategy strategy_;
  const CompositeProblem* problem_;
  VarianceEstimate variance_ = VarianceEstimate::running();
  Index current_size_ = 1;
  std::vector<Index> indices_;
  std::vector<Index> pool_;
  std::vector<Index> permutation_;
};

}  // namespace adaprox
