#pragma once

#include <adaprox/counter.hpp>
#include <adaprox/error.hpp>
#include <adaprox/problems.hpp>
#include <adaprox/types.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaprox {

/// Telemetry for iterate x_k. Record k = 0 describes the starting point;
/// record k >= 1 carries the sample size and reduced-gradient norm of the
/// step that produced x_k, and the cumulative counters after it.
struct IterationRecord {
  std::uint64_t k = 0;
  Index sample_size = 0;
  std::uint64_t prox_evals = 0;
  std::uint64_t grad_evals = 0;
  double phi = 0.0;
  std::optional<double> gap;
  std::optional<double> reduced_grad_norm;
  std::optional<double> true_reduced_grad_norm;
  double wall_time_s = 0.0;
  std::string flags;  // ';'-separated tokens, never contains ','

  bool operator==(const IterationRecord&) const = default;
};

/// R = (y - x_next) / alpha.
inline Vector reduced_gradient(double alpha, const Vector& y, const Vector& x_next) {
  if (!(alpha > 0.0)) throw InvalidArgument("reduced_gradient: alpha must be positive");
  return (y - x_next) / alpha;
}

/// Reduced gradient with the exact gradient. Audit-only: it spends one full
/// gradient and one prox, counted on `audit_evals` and never on the solver's
/// counters.
inline Vector true_reduced_gradient(const CompositeProblem& problem, double alpha, const Vector& y,
                                    Counter* audit_evals = nullptr) {
  if (!(alpha > 0.0)) throw InvalidArgument("true_reduced_gradient: alpha must be positive");
  const Vector grad = problem.smooth->full_gradient(y);
  const Vector x_hat = problem.nonsmooth.prox(alpha, y - alpha * grad);
  if (audit_evals) audit_evals->add(static_cast<std::uint64_t>(problem.smooth->sample_count()));
  return (y - x_hat) / alpha;
}

struct RateFit {
  double rate = 0.0;  // rho_hat for linear fits, p_hat for power fits
  double r2 = 0.0;
  Index points = 0;
};

struct FitWindow {
  std::uint64_t first = 10;  // the first iterations are transient
  std::uint64_t last = std::numeric_limits<std::uint64_t>::max();
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

inline LineFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  if (syy <= 0.0) {
    fit.r2 = 1.0;
  } else {
    const double ss_res = std::max(syy - fit.slope * sxy, 0.0);
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

constexpr std::size_t kMinFitPoints = 10;

}  // namespace detail

/// Least-squares slope of log(gap) against k over paired samples; the rate
/// is exp(slope). Nonpositive gaps are skipped.
inline RateFit fit_linear_rate(std::span<const double> ks, std::span<const double> gaps) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ks.size() && i < gaps.size(); ++i) {
    if (!(gaps[i] > 0.0) || !std::isfinite(gaps[i])) continue;
    xs.push_back(ks[i]);
    ys.push_back(std::log(gaps[i]));
  }
  if (xs.size() < detail::kMinFitPoints)
    throw InsufficientData("rate fit needs at least 10 positive gaps, got " +
                           std::to_string(xs.size()));
  const auto fit = detail::least_squares(xs, ys);
  return {std::exp(fit.slope), fit.r2, static_cast<Index>(xs.size())};
}

/// Least-squares slope of log(gap) against log(k); the rate is -slope.
inline RateFit fit_power_rate(std::span<const double> ks, std::span<const double> gaps) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ks.size() && i < gaps.size(); ++i) {
    if (!(gaps[i] > 0.0) || !std::isfinite(gaps[i]) || !(ks[i] > 0.0)) continue;
    xs.push_back(std::log(ks[i]));
    ys.push_back(std::log(gaps[i]));
  }
  if (xs.size() < detail::kMinFitPoints)
    throw InsufficientData("rate fit needs at least 10 positive gaps, got " +
                           std::to_string(xs.size()));
  const auto fit = detail::least_squares(xs, ys);
  return {-fit.slope, fit.r2, static_cast<Index>(xs.size())};
}

namespace detail {

inline void window_series(std::span<const IterationRecord> records, FitWindow w,
                          std::vector<double>& ks, std::vector<double>& gaps) {
  for (const auto& r : records) {
    if (r.k < w.first || r.k > w.last || !r.gap) continue;
    ks.push_back(static_cast<double>(r.k));
    gaps.push_back(*r.gap);
  }
}

}  // namespace detail

inline RateFit fit_linear_rate(std::span<const IterationRecord> records, FitWindow window = {}) {
  std::vector<double> ks, gaps;
  detail::window_series(records, window, ks, gaps);
  return fit_linear_rate(ks, gaps);
}

inline RateFit fit_power_rate(std::span<const IterationRecord> records, FitWindow window = {}) {
  std::vector<double> ks, gaps;
  detail::window_series(records, window, ks, gaps);
  return fit_power_rate(ks, gaps);
}

inline constexpr std::string_view kCsvHeader =
    "k,sample_size,prox_evals,grad_evals,phi,gap,reduced_grad_norm,true_reduced_grad_norm,"
    "wall_time_s,flags";

namespace detail {

inline void put_optional(std::ostream& os, const std::optional<double>& v) {
  if (v) write_double(os, *v);
}

inline std::optional<double> get_optional(std::string_view s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  if (!parse_number(s, v)) throw ParseError(line, "bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline void write_csv_row(std::ostream& os, const IterationRecord& r) {
  os << r.k << ',' << r.sample_size << ',' << r.prox_evals << ',' << r.grad_evals << ',';
  detail::write_double(os, r.phi);
  os << ',';
  detail::put_optional(os, r.gap);
  os << ',';
  detail::put_optional(os, r.reduced_grad_norm);
  os << ',';
  detail::put_optional(os, r.true_reduced_grad_norm);
  os << ',';
  detail::write_double(os, r.wall_time_s);
  os << ',' << r.flags << '\n';
}

inline void write_csv(std::ostream& os, std::span<const IterationRecord> records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) write_csv_row(os, r);
}

inline std::vector<IterationRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kCsvHeader)
    throw ParseError(1, "missing or unexpected CSV header");
  std::vector<IterationRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (int i = 0; i < 9; ++i) {
      const auto c = rest.find(',');
      if (c == std::string_view::npos) throw ParseError(lineno, "expected 10 columns");
      f.push_back(rest.substr(0, c));
      rest.remove_prefix(c + 1);
    }
    f.push_back(rest);
    IterationRecord r;
    double phi = 0.0, wall = 0.0;
    if (!detail::parse_number(f[0], r.k) || !detail::parse_number(f[1], r.sample_size) ||
        !detail::parse_number(f[2], r.prox_evals) || !detail::parse_number(f[3], r.grad_evals) ||
        !detail::parse_number(f[4], phi) || !detail::parse_number(f[8], wall))
      throw ParseError(lineno, "bad numeric field");
    r.phi = phi;
    r.gap = detail::get_optional(f[5], lineno);
    r.reduced_grad_norm = detail::get_optional(f[6], lineno);
    r.true_reduced_grad_norm = detail::get_optional(f[7], lineno);
    r.wall_time_s = wall;
    r.flags = std::string(f[9]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace adaprox
