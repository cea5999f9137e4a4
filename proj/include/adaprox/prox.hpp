#pragma once

#include <adaprox/counter.hpp>
#include <adaprox/error.hpp>
#include <adaprox/types.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <variant>

namespace adaprox {

/// Soft-thresholding, the prox of alpha * lambda * ||.||_1. Entries with
/// |y_j| <= alpha * lambda map to exactly zero.
inline Vector prox_l1(double alpha, double lambda, const Vector& y) {
  if (!(alpha > 0.0)) throw InvalidArgument("prox_l1: alpha must be positive");
  if (!(lambda >= 0.0)) throw InvalidArgument("prox_l1: lambda must be nonnegative");
  const double t = alpha * lambda;
  Vector p(y.size());
  for (Index j = 0; j < y.size(); ++j) {
    const double a = std::abs(y[j]);
    p[j] = a <= t ? 0.0 : std::copysign(a - t, y[j]);
  }
  return p;
}

/// Euclidean projection onto {x : ||x|| <= radius}. Points already inside
/// (including the boundary) are returned unchanged, and projected points
/// satisfy ||p|| <= radius in floating point.
inline Vector prox_ball(double radius, const Vector& y) {
  if (!(radius > 0.0)) throw InvalidArgument("prox_ball: radius must be positive");
  const double n = y.norm();
  if (n <= radius) return y;
  Vector p = y * (radius / n);
  while (p.norm() > radius) p *= 1.0 - std::numeric_limits<double>::epsilon();
  return p;
}

inline Vector prox_box(const Vector& lower, const Vector& upper, const Vector& y) {
  if (lower.size() != upper.size() || lower.size() != y.size())
    throw InvalidArgument("prox_box: dimension mismatch");
  for (Index j = 0; j < lower.size(); ++j)
    if (lower[j] > upper[j])
      throw InvalidArgument("prox_box: lower[" + std::to_string(j) + "] > upper");
  return y.cwiseMax(lower).cwiseMin(upper);
}

struct ZeroTerm {};

struct L1Term {
  double lambda = 0.0;
};

struct BallIndicator {
  double radius = 1.0;
};

struct BoxIndicator {
  Vector lower;
  Vector upper;
};

/// The convex, possibly nonsmooth part h of the objective.
class NonsmoothTerm {
 public:
  using Kind = std::variant<ZeroTerm, L1Term, BallIndicator, BoxIndicator>;

  NonsmoothTerm() = default;

  static NonsmoothTerm zero() { return NonsmoothTerm(ZeroTerm{}); }

  static NonsmoothTerm l1(double lambda) {
    if (!(lambda >= 0.0)) throw InvalidArgument("l1 weight must be nonnegative");
    return NonsmoothTerm(L1Term{lambda});
  }

  static NonsmoothTerm ball(double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("ball radius must be positive");
    return NonsmoothTerm(BallIndicator{radius});
  }

  static NonsmoothTerm box(Vector lower, Vector upper) {
    if (lower.size() != upper.size()) throw InvalidArgument("box bounds differ in size");
    for (Index j = 0; j < lower.size(); ++j)
      if (lower[j] > upper[j]) throw InvalidArgument("box: lower > upper");
    return NonsmoothTerm(BoxIndicator{std::move(lower), std::move(upper)});
  }

  const Kind& kind() const { return kind_; }

  bool is_indicator() const {
    return std::holds_alternative<BallIndicator>(kind_) ||
           std::holds_alternative<BoxIndicator>(kind_);
  }

  std::string name() const {
    struct {
      std::string operator()(const ZeroTerm&) const { return "zero"; }
      std::string operator()(const L1Term&) const { return "l1"; }
      std::string operator()(const BallIndicator&) const { return "ball"; }
      std::string operator()(const BoxIndicator&) const { return "box"; }
    } v;
    return std::visit(v, kind_);
  }

  /// h(x); +infinity outside the set for indicators.
  double value(const Vector& x) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    struct {
      const Vector& x;
      double operator()(const ZeroTerm&) const { return 0.0; }
      double operator()(const L1Term& t) const { return t.lambda * x.lpNorm<1>(); }
      double operator()(const BallIndicator& t) const { return x.norm() <= t.radius ? 0.0 : inf; }
      double operator()(const BoxIndicator& t) const {
        return (x.array() >= t.lower.array()).all() && (x.array() <= t.upper.array()).all() ? 0.0
                                                                                              : inf;
      }
    } v{x};
    return std::visit(v, kind_);
  }

  Vector prox(double alpha, const Vector& y) const {
    if (!(alpha > 0.0)) throw InvalidArgument("prox: alpha must be positive");
    struct {
      double alpha;
      const Vector& y;
      Vector operator()(const ZeroTerm&) const { return y; }
      Vector operator()(const L1Term& t) const { return prox_l1(alpha, t.lambda, y); }
      Vector operator()(const BallIndicator& t) const { return prox_ball(t.radius, y); }
      Vector operator()(const BoxIndicator& t) const { return prox_box(t.lower, t.upper, y); }
    } v{alpha, y};
    return std::visit(v, kind_);
  }

 private:
  explicit NonsmoothTerm(Kind k) : kind_(std::move(k)) {}

  Kind kind_{ZeroTerm{}};
};

/// One proximal-gradient step prox(alpha, y - alpha * g). Counts exactly one
/// prox evaluation on `prox_evals`.
inline Vector prox_step(const NonsmoothTerm& h, double alpha, const Vector& y, const Vector& g,
                        Counter& prox_evals) {
  if (!(alpha > 0.0)) throw InvalidArgument("prox_step: alpha must be positive");
  Vector p = h.prox(alpha, y - alpha * g);
  prox_evals.add();
  return p;
}

}  // namespace adaprox
