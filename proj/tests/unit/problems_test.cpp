#include <adaprox/problems.hpp>
#include <adaprox/verify.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace adaprox;

namespace {

Vector random_point(std::mt19937_64& rng, Index d, double scale = 1.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector x(d);
  for (Index j = 0; j < d; ++j) x[j] = scale * n01(rng);
  return x;
}

const QuadraticObjective& quad(const CompositeProblem& p) {
  return dynamic_cast<const QuadraticObjective&>(*p.smooth);
}

CompositeProblem small_logistic() { return make_logistic(generate_binary_dataset(300, 20, 4, 9)); }

}  // namespace

TEST(GenerateQuadratic, UnitConditionGivesScaledIdentity) {
  const auto p = generate_quadratic(2, 1, 1.0, 5);
  EXPECT_DOUBLE_EQ(p.smooth->smoothness(), p.smooth->strong_convexity());
  EXPECT_GT(p.smooth->strong_convexity(), 0.0);
}

TEST(GenerateQuadratic, ConditionNumberWithinFivePercent) {
  const auto p = generate_quadratic(5, 50, 100.0, 7);
  const Vector mean = quad(p).diagonals().rowwise().mean();
  const double ratio = mean.maxCoeff() / mean.minCoeff();
  EXPECT_GE(ratio, 95.0);
  EXPECT_LE(ratio, 105.0);
  EXPECT_DOUBLE_EQ(p.smooth->smoothness(), mean.maxCoeff());
  EXPECT_DOUBLE_EQ(p.smooth->strong_convexity(), mean.minCoeff());
}

TEST(GenerateQuadratic, LargeConditionShape) {
  const auto p = generate_quadratic(10, 2000, 1e4, 3);
  EXPECT_EQ(p.dimension(), 10);
  EXPECT_NEAR(p.smooth->smoothness() / p.smooth->strong_convexity(), 1e4, 1e4 * 1e-9);
  EXPECT_EQ(p.nonsmooth.name(), "ball");
  EXPECT_TRUE((quad(p).diagonals().array() > 0.0).all());
}

TEST(GenerateQuadratic, DeterministicGivenSeed) {
  const auto a = generate_quadratic(6, 40, 50.0, 11);
  const auto b = generate_quadratic(6, 40, 50.0, 11);
  const auto c = generate_quadratic(6, 40, 50.0, 12);
  EXPECT_EQ(quad(a).diagonals(), quad(b).diagonals());
  EXPECT_EQ(quad(a).offsets(), quad(b).offsets());
  EXPECT_NE(quad(a).offsets(), quad(c).offsets());
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
}

TEST(GenerateQuadratic, RejectsBadArguments) {
  EXPECT_THROW(generate_quadratic(1, 10, 10.0, 1), InvalidArgument);
  EXPECT_THROW(generate_quadratic(3, 10, 0.5, 1), InvalidArgument);
  EXPECT_THROW(generate_quadratic(3, 0, 10.0, 1), InvalidArgument);
}

TEST(SmoothObjective, FullGradientIsMeanOfSamples) {
  std::mt19937_64 rng(1);
  for (const auto& p : {generate_quadratic(8, 64, 30.0, 2), small_logistic()}) {
    const auto& f = *p.smooth;
    for (int t = 0; t < 100; ++t) {
      const Vector x = random_point(rng, f.dimension());
      Vector mean = Vector::Zero(f.dimension());
      for (Index i = 0; i < f.sample_count(); ++i) mean += f.sample_gradient(x, i);
      mean /= static_cast<double>(f.sample_count());
      const Vector g = f.full_gradient(x);
      EXPECT_LE((g - mean).norm(), 1e-10 * (1.0 + g.norm()));
    }
  }
}

TEST(SmoothObjective, FiniteDifferencesMatch) {
  std::mt19937_64 rng(2);
  for (const auto& p : {generate_quadratic(8, 64, 30.0, 2), small_logistic()}) {
    for (int t = 0; t < 20; ++t) {
      const Vector x = random_point(rng, p.dimension(), 0.5);
      const Vector g = p.smooth->full_gradient(x);
      const Vector fd = verify::finite_difference_gradient(*p.smooth, x, 1e-6);
      EXPECT_LE((g - fd).norm(), 1e-5 * std::max(g.norm(), 1e-8));
    }
  }
}

TEST(SmoothObjective, ValueIsMeanOfSampleValues) {
  std::mt19937_64 rng(3);
  const auto p = small_logistic();
  const Vector x = random_point(rng, p.dimension());
  double s = 0.0;
  for (Index i = 0; i < p.smooth->sample_count(); ++i) s += p.smooth->sample_value(x, i);
  EXPECT_NEAR(p.smooth->value(x), s / static_cast<double>(p.smooth->sample_count()), 1e-12);
}

TEST(Logistic, ValueAndGradientAtOrigin) {
  const auto data = generate_binary_dataset(50, 10, 3, 4);
  const auto p = make_logistic(data);
  const Vector x = Vector::Zero(p.dimension());
  EXPECT_NEAR(p.smooth->value(x), std::log(2.0), 1e-15);
  Vector expect = Vector::Zero(p.dimension());
  for (Index i = 0; i < data.rows(); ++i)
    for (SparseRows::InnerIterator it(data.features, i); it; ++it)
      expect[it.col()] -= data.labels[i] * it.value() / 2.0;
  expect /= static_cast<double>(data.rows());
  EXPECT_LE((p.smooth->full_gradient(x) - expect).norm(), 1e-14);
  EXPECT_EQ(p.smooth->strong_convexity(), 0.0);
  EXPECT_EQ(p.nonsmooth.name(), "l1");
}

TEST(Logistic, SingleRowDerivative) {
  std::istringstream in("+1 1:1\n");
  auto data = parse_libsvm(in);
  const auto p = make_logistic(data);
  Vector x = Vector::Zero(2);
  const double analytic = p.smooth->full_gradient(x)[0];
  EXPECT_NEAR(analytic, -0.5, 1e-15);
  const double fd = verify::finite_difference_gradient(*p.smooth, x, 1e-6)[0];
  EXPECT_NEAR(fd, analytic, 1e-6);
  x[0] = 1.3;
  EXPECT_NEAR(p.smooth->full_gradient(x)[0], -1.0 / (1.0 + std::exp(1.3)), 1e-15);
}

TEST(Logistic, SmoothnessBoundsGradientChange) {
  const auto p = small_logistic();
  const double L = p.smooth->smoothness();
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const Vector x = random_point(rng, p.dimension()), y = random_point(rng, p.dimension());
    EXPECT_LE((p.smooth->full_gradient(x) - p.smooth->full_gradient(y)).norm(),
              L * (x - y).norm() * (1.0 + 1e-6));
  }
}

TEST(Logistic, RejectsEmptyDataset) { EXPECT_THROW(make_logistic(Dataset{}), InvalidArgument); }

TEST(Logistic, DeterministicConstruction) {
  const auto a = small_logistic();
  const auto b = small_logistic();
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.smooth->smoothness(), b.smooth->smoothness());
}

TEST(Libsvm, SingleRowWithBias) {
  std::istringstream in("+1 3:0.5\n");
  const auto d = parse_libsvm(in);
  ASSERT_EQ(d.rows(), 1);
  EXPECT_EQ(d.raw_features, 3);
  EXPECT_EQ(d.features.cols(), 4);
  EXPECT_EQ(d.features.coeff(0, 2), 0.5);
  EXPECT_EQ(d.features.coeff(0, 3), 1.0);
  EXPECT_EQ(d.features.coeff(0, 0), 0.0);
  EXPECT_EQ(d.labels[0], 1.0);
}

TEST(Libsvm, MapsZeroOneLabels) {
  std::istringstream in("0 1:1\n1 2:1\n0 2:2\n");
  const auto d = parse_libsvm(in);
  EXPECT_EQ(d.labels[0], -1.0);
  EXPECT_EQ(d.labels[1], 1.0);
  EXPECT_EQ(d.labels[2], -1.0);
}

TEST(Libsvm, SkipsBlankLines) {
  std::istringstream in("\n-1 1:2 4:1\n\n+1 2:3\n");
  const auto d = parse_libsvm(in);
  EXPECT_EQ(d.rows(), 2);
  EXPECT_EQ(d.raw_features, 4);
}

TEST(Libsvm, MalformedLineReportsLineNumber) {
  std::istringstream in("+1 1:1\n-1 3:1 2:1\n");
  try {
    parse_libsvm(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad_token("+1 1:1\n+1 1:1\n-1 x:1\n");
  try {
    parse_libsvm(bad_token);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream zero_index("+1 0:1\n");
  EXPECT_THROW(parse_libsvm(zero_index), ParseError);
}

TEST(Libsvm, RejectsNonBinaryLabels) {
  std::istringstream in("1 1:1\n2 1:1\n3 1:1\n");
  EXPECT_THROW(parse_libsvm(in), InvalidData);
}

TEST(Libsvm, MissingFileIsIoError) {
  EXPECT_THROW(load_libsvm("/nonexistent/definitely/missing.svm"), IoError);
}

TEST(Libsvm, MaxRowsTruncates) {
  std::istringstream in("+1 1:1\n-1 2:1\n+1 3:1\n");
  LibsvmOptions opts;
  opts.max_rows = 2;
  EXPECT_EQ(parse_libsvm(in, opts).rows(), 2);
}

TEST(Libsvm, WriteRoundTrips) {
  const auto d = generate_binary_dataset(40, 12, 3, 2);
  std::stringstream ss;
  write_libsvm(d, ss);
  LibsvmOptions opts;
  opts.min_features = d.raw_features;
  const auto back = parse_libsvm(ss, opts);
  EXPECT_EQ(back.rows(), d.rows());
  EXPECT_EQ(back.labels, d.labels);
  ASSERT_EQ(back.features.cols(), d.features.cols());
  EXPECT_EQ(Eigen::MatrixXd(back.features), Eigen::MatrixXd(d.features));
}

TEST(QuadraticDump, RoundTripsExactly) {
  const auto p = generate_quadratic(4, 9, 25.0, 8);
  std::stringstream ss;
  save_quadratic(quad(p), 8, 25.0, ss);
  const auto back = load_quadratic(ss);
  EXPECT_EQ(back->diagonals(), quad(p).diagonals());
  EXPECT_EQ(back->offsets(), quad(p).offsets());
}

TEST(QuadraticDump, RejectsTruncatedInput) {
  const auto p = generate_quadratic(4, 9, 25.0, 8);
  std::stringstream ss;
  save_quadratic(quad(p), 8, 25.0, ss);
  std::string text = ss.str();
  text.resize(text.size() / 2);
  std::istringstream in(text);
  EXPECT_THROW(load_quadratic(in), ParseError);
}

TEST(QuadraticDump, DeviationBoundDominatesSamples) {
  const auto p = generate_quadratic(5, 200, 50.0, 3);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    Vector x = random_point(rng, 5);
    x /= std::max(1.0, x.norm());
    EXPECT_LE(verify::max_sample_deviation(*p.smooth, x), quad(p).deviation_bound(1.0) + 1e-12);
  }
}
