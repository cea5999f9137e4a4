#pragma once

#include <adaprox/error.hpp>
#include <adaprox/prox.hpp>
#include <adaprox/types.hpp>

#include <Eigen/SparseCore>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace adaprox {

// 64-bit FNV-1a, used to key cached reference solutions by problem content.
class Fingerprint {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// Smooth part f(x) = (1/N) sum_i F(x, xi_i) of the composite objective.
///
/// Implementations are immutable after construction, so every member may be
/// called concurrently. Per-sample gradients are *not* counted here; callers
/// that spend stochastic-gradient evaluations do their own accounting.
class SmoothObjective {
 public:
  virtual ~SmoothObjective() = default;

  virtual Index dimension() const = 0;
  virtual Index sample_count() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual double sample_value(const Vector& x, Index i) const = 0;
  virtual Vector full_gradient(const Vector& x) const = 0;
  /// acc += grad F(x, xi_i)
  virtual void add_sample_gradient(const Vector& x, Index i, Vector& acc) const = 0;
  virtual double smoothness() const = 0;
  virtual double strong_convexity() const = 0;
  virtual std::string kind() const = 0;
  virtual void fingerprint(Fingerprint& fp) const = 0;

  Vector sample_gradient(const Vector& x, Index i) const {
    Vector g = Vector::Zero(dimension());
    add_sample_gradient(x, i, g);
    return g;
  }
};

/// f(x) = (1/N) sum_i (1/2 x^T Q_i x + b_i^T x) with diagonal Q_i.
class QuadraticObjective final : public SmoothObjective {
 public:
  /// `diagonals` and `offsets` are d x N; column i holds diag(Q_i) and b_i.
  QuadraticObjective(Eigen::MatrixXd diagonals, Eigen::MatrixXd offsets)
      : diagonals_(std::move(diagonals)), offsets_(std::move(offsets)) {
    if (diagonals_.rows() != offsets_.rows() || diagonals_.cols() != offsets_.cols())
      throw InvalidArgument("quadratic: diagonal and offset shapes differ");
    if (diagonals_.cols() < 1 || diagonals_.rows() < 1)
      throw InvalidArgument("quadratic: empty problem");
    if ((diagonals_.array() <= 0.0).any())
      throw InvalidArgument("quadratic: diagonal entries must be positive");
    mean_diagonal_ = diagonals_.rowwise().mean();
    mean_offset_ = offsets_.rowwise().mean();
    smoothness_ = mean_diagonal_.maxCoeff();
    strong_convexity_ = mean_diagonal_.minCoeff();
  }

  Index dimension() const override { return diagonals_.rows(); }
  Index sample_count() const override { return diagonals_.cols(); }

  double value(const Vector& x) const override {
    return 0.5 * x.dot(mean_diagonal_.cwiseProduct(x)) + mean_offset_.dot(x);
  }

  double sample_value(const Vector& x, Index i) const override {
    return 0.5 * x.dot(diagonals_.col(i).cwiseProduct(x)) + offsets_.col(i).dot(x);
  }

  Vector full_gradient(const Vector& x) const override {
    return mean_diagonal_.cwiseProduct(x) + mean_offset_;
  }

  void add_sample_gradient(const Vector& x, Index i, Vector& acc) const override {
    acc.array() += diagonals_.col(i).array() * x.array() + offsets_.col(i).array();
  }

  double smoothness() const override { return smoothness_; }
  double strong_convexity() const override { return strong_convexity_; }
  std::string kind() const override { return "quadratic"; }

  void fingerprint(Fingerprint& fp) const override {
    fp.str(kind());
    fp.u64(static_cast<std::uint64_t>(dimension()));
    fp.u64(static_cast<std::uint64_t>(sample_count()));
    fp.bytes(diagonals_.data(), sizeof(double) * diagonals_.size());
    fp.bytes(offsets_.data(), sizeof(double) * offsets_.size());
  }

  const Eigen::MatrixXd& diagonals() const { return diagonals_; }
  const Eigen::MatrixXd& offsets() const { return offsets_; }
  const Vector& mean_diagonal() const { return mean_diagonal_; }
  const Vector& mean_offset() const { return mean_offset_; }

  /// Upper bound on max_i ||grad F_i(x) - grad f(x)|| over ||x|| <= radius.
  double deviation_bound(double radius) const {
    double worst = 0.0;
    for (Index i = 0; i < sample_count(); ++i) {
      const double dq = (diagonals_.col(i) - mean_diagonal_).cwiseAbs().maxCoeff();
      const double db = (offsets_.col(i) - mean_offset_).norm();
      worst = std::max(worst, dq * radius + db);
    }
    return worst;
  }

 private:
  Eigen::MatrixXd diagonals_;
  Eigen::MatrixXd offsets_;
  Vector mean_diagonal_;
  Vector mean_offset_;
  double smoothness_ = 0.0;
  double strong_convexity_ = 0.0;
};

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Binary classification data: row-sparse features (bias column included)
/// and labels in {-1, +1}.
struct Dataset {
  SparseRows features;
  Vector labels;
  Index raw_features = 0;  // feature count before the bias column

  Index rows() const { return features.rows(); }
  Index dimension() const { return features.cols(); }
};

namespace detail {

inline double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double row_dot(const SparseRows& a, Index i, const Vector& x) {
  double s = 0.0;
  for (SparseRows::InnerIterator it(a, i); it; ++it) s += it.value() * x[it.col()];
  return s;
}

}  // namespace detail

/// Largest eigenvalue of A^T A by power iteration on a fixed start vector.
inline double max_eigenvalue_gram(const SparseRows& a, double tol = 1e-6, int max_iters = 500) {
  const Index d = a.cols();
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Vector v(d);
  for (Index j = 0; j < d; ++j) v[j] = u(rng);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = a.transpose() * (a * v);
    const double next = v.dot(w);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    const bool done = it > 0 && std::abs(next - lambda) <= tol * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return lambda;
}

/// f(x) = (1/N) sum_i log(1 + exp(-b_i a_i^T x)).
class LogisticObjective final : public SmoothObjective {
 public:
  explicit LogisticObjective(Dataset data) : data_(std::move(data)) {
    if (data_.rows() == 0 || data_.dimension() == 0)
      throw InvalidArgument("logistic: empty dataset");
    if (data_.labels.size() != data_.rows())
      throw InvalidArgument("logistic: label count does not match rows");
    for (Index i = 0; i < data_.labels.size(); ++i)
      if (data_.labels[i] != 1.0 && data_.labels[i] != -1.0)
        throw InvalidArgument("logistic: labels must be -1 or +1");
    data_.features.makeCompressed();
    smoothness_ = max_eigenvalue_gram(data_.features) / (4.0 * static_cast<double>(data_.rows()));
  }

  Index dimension() const override { return data_.dimension(); }
  Index sample_count() const override { return data_.rows(); }

  double value(const Vector& x) const override {
    const Vector z = data_.features * x;
    double s = 0.0;
    for (Index i = 0; i < z.size(); ++i) s += detail::softplus(-data_.labels[i] * z[i]);
    return s / static_cast<double>(z.size());
  }

  double sample_value(const Vector& x, Index i) const override {
    return detail::softplus(-data_.labels[i] * detail::row_dot(data_.features, i, x));
  }

  Vector full_gradient(const Vector& x) const override {
    const Vector z = data_.features * x;
    Vector w(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double b = data_.labels[i];
      w[i] = -b * detail::sigmoid(-b * z[i]);
    }
    return (data_.features.transpose() * w) / static_cast<double>(z.size());
  }

  void add_sample_gradient(const Vector& x, Index i, Vector& acc) const override {
    const double b = data_.labels[i];
    const double c = -b * detail::sigmoid(-b * detail::row_dot(data_.features, i, x));
    for (SparseRows::InnerIterator it(data_.features, i); it; ++it)
      acc[it.col()] += c * it.value();
  }

  double smoothness() const override { return smoothness_; }
  double strong_convexity() const override { return 0.0; }
  std::string kind() const override { return "logistic"; }

  void fingerprint(Fingerprint& fp) const override {
    fp.str(kind());
    fp.u64(static_cast<std::uint64_t>(data_.rows()));
    fp.u64(static_cast<std::uint64_t>(data_.dimension()));
    for (Index i = 0; i < data_.rows(); ++i) {
      for (SparseRows::InnerIterator it(data_.features, i); it; ++it) {
        fp.u64(static_cast<std::uint64_t>(it.col()));
        fp.f64(it.value());
      }
      fp.f64(data_.labels[i]);
    }
  }

  const Dataset& data() const { return data_; }

 private:
  Dataset data_;
  double smoothness_ = 0.0;
};

/// phi(x) = f(x) + h(x).
struct CompositeProblem {
  std::shared_ptr<const SmoothObjective> smooth;
  NonsmoothTerm nonsmooth;
  std::optional<double> reference_optimum;

  Index dimension() const { return smooth->dimension(); }
  double phi(const Vector& x) const { return smooth->value(x) + nonsmooth.value(x); }

  std::uint64_t fingerprint() const {
    Fingerprint fp;
    smooth->fingerprint(fp);
    fp.str(nonsmooth.name());
    std::visit(
        [&fp](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, L1Term>) fp.f64(t.lambda);
          if constexpr (std::is_same_v<T, BallIndicator>) fp.f64(t.radius);
          if constexpr (std::is_same_v<T, BoxIndicator>) {
            fp.bytes(t.lower.data(), sizeof(double) * t.lower.size());
            fp.bytes(t.upper.data(), sizeof(double) * t.upper.size());
          }
        },
        nonsmooth.kind());
    return fp.value();
  }
};

inline Vector prox_step(const CompositeProblem& problem, double alpha, const Vector& y,
                        const Vector& g, Counter& prox_evals) {
  return prox_step(problem.nonsmooth, alpha, y, g, prox_evals);
}

/// Synthetic strongly convex quadratic over the unit ball.
///
/// Each coordinate of each diag(Q_i) is log-uniform on [1, kappa]; the
/// coordinates holding the smallest and largest mean curvature are then
/// rescaled so the mean matrix has eigenvalues exactly 1 and kappa. Every
/// other mean entry is an average of values in [1, kappa] and stays inside.
inline CompositeProblem generate_quadratic(Index d, Index n, double kappa, std::uint64_t seed) {
  if (d < 2) throw InvalidArgument("generate_quadratic: d must be at least 2");
  if (n < 1) throw InvalidArgument("generate_quadratic: N must be positive");
  if (!(kappa >= 1.0) || !std::isfinite(kappa))
    throw InvalidArgument("generate_quadratic: kappa must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_kappa = std::log(kappa);
  Eigen::MatrixXd q(d, n);
  Eigen::MatrixXd b(d, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) q(j, i) = std::exp(unit(rng) * log_kappa);
    for (Index j = 0; j < d; ++j) b(j, i) = unit(rng);
  }

  const Vector mean = q.rowwise().mean();
  Index jmin = 0;
  mean.minCoeff(&jmin);
  Index jmax = jmin == 0 ? 1 : 0;
  for (Index j = 0; j < d; ++j)
    if (j != jmin && mean[j] > mean[jmax]) jmax = j;
  q.row(jmin) /= mean[jmin];
  q.row(jmax) *= kappa / mean[jmax];

  return CompositeProblem{std::make_shared<QuadraticObjective>(std::move(q), std::move(b)),
                          NonsmoothTerm::ball(1.0), std::nullopt};
}

namespace detail {

inline void write_double(std::ostream& os, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Text dump of a quadratic: a header line, then one line per sample
/// holding diag(Q_i) followed by b_i. Values use shortest round-trip form.
inline void save_quadratic(const QuadraticObjective& q, std::uint64_t seed, double kappa,
                           std::ostream& os) {
  os << "adaprox-quadratic 1 " << q.dimension() << ' ' << q.sample_count() << ' ';
  detail::write_double(os, kappa);
  os << ' ' << seed << '\n';
  for (Index i = 0; i < q.sample_count(); ++i) {
    for (Index j = 0; j < q.dimension(); ++j) {
      if (j) os << ' ';
      detail::write_double(os, q.diagonals()(j, i));
    }
    for (Index j = 0; j < q.dimension(); ++j) {
      os << ' ';
      detail::write_double(os, q.offsets()(j, i));
    }
    os << '\n';
  }
}

inline std::shared_ptr<QuadraticObjective> load_quadratic(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "missing quadratic header");
  auto head = detail::split_ws(detail::trim(line));
  Index d = 0, n = 0;
  if (head.size() != 6 || head[0] != "adaprox-quadratic" || head[1] != "1" ||
      !detail::parse_number(head[2], d) || !detail::parse_number(head[3], n) || d < 1 || n < 1)
    throw ParseError(1, "bad quadratic header");
  Eigen::MatrixXd q(d, n), b(d, n);
  for (Index i = 0; i < n; ++i) {
    const std::size_t lineno = static_cast<std::size_t>(i) + 2;
    if (!std::getline(is, line)) throw ParseError(lineno, "truncated quadratic dump");
    auto tok = detail::split_ws(detail::trim(line));
    if (tok.size() != static_cast<std::size_t>(2 * d))
      throw ParseError(lineno, "expected " + std::to_string(2 * d) + " values");
    for (Index j = 0; j < d; ++j) {
      if (!detail::parse_number(tok[j], q(j, i)) || !detail::parse_number(tok[d + j], b(j, i)))
        throw ParseError(lineno, "bad number");
    }
  }
  return std::make_shared<QuadraticObjective>(std::move(q), std::move(b));
}

struct LibsvmOptions {
  Index max_rows = 0;      // 0 reads every row
  Index min_features = 0;  // pad the raw feature count up to this value
};

/// Reads `label idx:val ...` lines (1-based ascending indices). A constant
/// bias feature is appended after the largest feature index. Labels are
/// mapped to {-1, +1}: {-1, +1} stays, otherwise the smaller of two distinct
/// values becomes -1.
inline Dataset parse_libsvm(std::istream& is, const LibsvmOptions& opts = {}) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> entries;
  std::vector<double> raw_labels;
  Index max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty()) continue;
    if (opts.max_rows > 0 && static_cast<Index>(raw_labels.size()) >= opts.max_rows) break;
    auto tok = detail::split_ws(body);
    double label = 0.0;
    if (!detail::parse_number(tok[0], label) || !std::isfinite(label))
      throw ParseError(lineno, "bad label '" + std::string(tok[0]) + "'");
    const auto row = static_cast<Index>(raw_labels.size());
    Index prev = 0;
    for (std::size_t t = 1; t < tok.size(); ++t) {
      const auto colon = tok[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError(lineno, "expected idx:val, got '" + std::string(tok[t]) + "'");
      Index idx = 0;
      double val = 0.0;
      if (!detail::parse_number(tok[t].substr(0, colon), idx) || idx < 1)
        throw ParseError(lineno, "bad feature index");
      if (!detail::parse_number(tok[t].substr(colon + 1), val) || !std::isfinite(val))
        throw ParseError(lineno, "bad feature value");
      if (idx <= prev) throw ParseError(lineno, "feature indices must be ascending");
      prev = idx;
      max_index = std::max(max_index, idx);
      if (val != 0.0) entries.emplace_back(row, idx - 1, val);
    }
    raw_labels.push_back(label);
  }

  std::set<double> distinct(raw_labels.begin(), raw_labels.end());
  if (distinct.size() > 2)
    throw InvalidData("libsvm: expected binary labels, found " + std::to_string(distinct.size()) +
                      " distinct values");
  const bool plus_minus = std::all_of(distinct.begin(), distinct.end(),
                                      [](double v) { return v == 1.0 || v == -1.0; });

  Dataset data;
  data.raw_features = std::max(max_index, opts.min_features);
  const auto n = static_cast<Index>(raw_labels.size());
  const Index d = data.raw_features + 1;
  data.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double v = raw_labels[static_cast<std::size_t>(i)];
    if (plus_minus)
      data.labels[i] = v;
    else if (distinct.size() == 2)
      data.labels[i] = v == *distinct.begin() ? -1.0 : 1.0;
    else
      data.labels[i] = v > 0.0 ? 1.0 : -1.0;
    entries.emplace_back(i, d - 1, 1.0);
  }
  data.features.resize(n, d);
  data.features.setFromTriplets(entries.begin(), entries.end());
  data.features.makeCompressed();
  return data;
}

inline Dataset load_libsvm(const std::string& path, const LibsvmOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return parse_libsvm(in, opts);
}

/// Writes the raw features (bias column dropped) back in LIBSVM form.
inline void write_libsvm(const Dataset& data, std::ostream& os) {
  const Index bias = data.dimension() - 1;
  for (Index i = 0; i < data.rows(); ++i) {
    os << (data.labels[i] > 0 ? "+1" : "-1");
    for (SparseRows::InnerIterator it(data.features, i); it; ++it) {
      if (it.col() == bias) continue;
      os << ' ' << it.col() + 1 << ':';
      detail::write_double(os, it.value());
    }
    os << '\n';
  }
}

/// l1-regularised logistic regression with weight 1/N.
inline CompositeProblem make_logistic(Dataset data) {
  if (data.rows() == 0) throw InvalidArgument("make_logistic: empty dataset");
  const double lambda = 1.0 / static_cast<double>(data.rows());
  return CompositeProblem{std::make_shared<LogisticObjective>(std::move(data)),
                          NonsmoothTerm::l1(lambda), std::nullopt};
}

/// Sparse binary-feature classification data shaped like the UCI adult
/// (a9a) benchmark: `active` one-valued features per row and labels drawn
/// from a planted logistic model.
inline Dataset generate_binary_dataset(Index rows, Index features, Index active,
                                       std::uint64_t seed) {
  if (rows < 1 || features < 1 || active < 1 || active > features)
    throw InvalidArgument("generate_binary_dataset: bad shape");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector w(features);
  for (Index j = 0; j < features; ++j) w[j] = normal(rng);
  const double bias = -0.5;

  std::vector<Eigen::Triplet<double>> entries;
  Dataset data;
  data.raw_features = features;
  data.labels.resize(rows);
  std::vector<Index> perm(static_cast<std::size_t>(features));
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < features; ++j) perm[static_cast<std::size_t>(j)] = j;
    double z = bias;
    for (Index t = 0; t < active; ++t) {
      std::uniform_int_distribution<Index> pick(t, features - 1);
      std::swap(perm[static_cast<std::size_t>(t)], perm[static_cast<std::size_t>(pick(rng))]);
      const Index j = perm[static_cast<std::size_t>(t)];
      entries.emplace_back(i, j, 1.0);
      z += 0.5 * w[j];
    }
    data.labels[i] = unit(rng) < detail::sigmoid(z) ? 1.0 : -1.0;
    entries.emplace_back(i, features, 1.0);
  }
  data.features.resize(rows, features + 1);
  data.features.setFromTriplets(entries.begin(), entries.end());
  data.features.makeCompressed();
  return data;
}

}  // namespace adaprox
