#include <adaprox/estimator.hpp>
#include <adaprox/problems.hpp>
#include <adaprox/verify.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace adaprox;

TEST(UnbiasedSampleSize, HandExamples) {
  EXPECT_EQ(unbiased_sample_size(1.0, 0.1, 4.0, 0.0, 0.0, 1'000'000).size, 100);
  EXPECT_EQ(unbiased_sample_size(0.0, 0.1, 4.0, 0.0, 0.0, 1000).size, 1);
  EXPECT_EQ(unbiased_sample_size(4.0, 0.0, 9.0, 1.0, 0.5, 1000).size, 16);
}

TEST(UnbiasedSampleSize, ZeroDenominatorCapsAndFlags) {
  const auto s = unbiased_sample_size(2.0, 0.0, 0.0, 0.0, 0.0, 500);
  EXPECT_EQ(s.size, 500);
  EXPECT_TRUE(s.capped);
}

TEST(UnbiasedSampleSize, ClampsToBudget) {
  const auto s = unbiased_sample_size(1e6, 0.1, 1e-4, 0.0, 0.0, 64);
  EXPECT_EQ(s.size, 64);
  EXPECT_TRUE(s.capped);
  EXPECT_THROW(unbiased_sample_size(1.0, 0.1, 1.0, 0.0, 0.0, 0), InvalidArgument);
}

TEST(FiniteSumSampleSize, HandExamples) {
  EXPECT_EQ(finite_sum_sample_size(1000, 1.0, 0.2, 4.0, 0.0, 0.0).size, 715);
  EXPECT_EQ(finite_sum_sample_size(1000, 1.0, 0.2, 0.0, 0.0, 0.0).size, 1000);
  EXPECT_EQ(finite_sum_sample_size(100, 1.0, 0.5, 0.0, 1.0, 2.0).size, 34);
}

TEST(FiniteSumSampleSize, ZeroSigmaUsesFullSetWithFlag) {
  const auto s = finite_sum_sample_size(250, 0.0, 0.5, 3.0, 0.0, 0.0);
  EXPECT_EQ(s.size, 250);
  EXPECT_TRUE(s.exact);
  EXPECT_THROW(finite_sum_sample_size(0, 1.0, 0.5, 1.0, 0.0, 0.0), InvalidArgument);
  EXPECT_THROW(finite_sum_sample_size(10, -1.0, 0.5, 1.0, 0.0, 0.0), InvalidArgument);
}

TEST(FiniteSumSampleSize, AlwaysWithinRange) {
  for (double r : {0.0, 1e-3, 1.0, 1e3, 1e9})
    for (double sigma : {1e-9, 1.0, 1e6}) {
      const auto s = finite_sum_sample_size(77, sigma, 0.3, r, 0.2, 0.5);
      EXPECT_GE(s.size, 1);
      EXPECT_LE(s.size, 77);
    }
}

TEST(UpdateVariance, IdenticalSamplesHitFloor) {
  const std::vector<Vector> s(5, Vector::Constant(3, 2.0));
  const auto v = update_variance(VarianceEstimate::running(1e-12), s, Vector::Constant(3, 2.0));
  EXPECT_EQ(v.sigma_sq, 1e-12);
}

TEST(UpdateVariance, TwoScalarSamples) {
  const std::vector<Vector> s{Vector::Constant(1, 0.0), Vector::Constant(1, 2.0)};
  EXPECT_DOUBLE_EQ(update_variance(VarianceEstimate::running(), s, Vector::Constant(1, 1.0)).sigma_sq, 2.0);
  SampleAccumulator acc(1);
  for (const auto& v : s) acc.add(v);
  EXPECT_DOUBLE_EQ(update_variance(VarianceEstimate::running(), acc).sigma_sq, 2.0);
}

TEST(UpdateVariance, KnownPassesThrough) {
  const std::vector<Vector> s{Vector::Constant(1, 0.0), Vector::Constant(1, 200.0)};
  EXPECT_EQ(update_variance(VarianceEstimate::known(9.0), s, Vector::Constant(1, 100.0)).sigma_sq, 9.0);
}

TEST(UpdateVariance, SingleSampleKeepsPrevious) {
  auto est = VarianceEstimate::running();
  est.sigma_sq = 5.0;
  const std::vector<Vector> s{Vector::Constant(1, 3.0)};
  EXPECT_EQ(update_variance(est, s, s[0]).sigma_sq, 5.0);
}

TEST(Schedules, Values) {
  EXPECT_DOUBLE_EQ(EtaSchedule::power_decay(0.4, 1.0).at(3), 0.1);
  EXPECT_DOUBLE_EQ(EtaSchedule::constant(0.3).at(100), 0.3);
  EXPECT_DOUBLE_EQ(DeltaSchedule::power(2.0).at(1), 0.25);
  EXPECT_DOUBLE_EQ(DeltaSchedule::geometric(0.5).at(3), 0.125);
  EXPECT_EQ(DeltaSchedule::zero().at(7), 0.0);
  EXPECT_THROW(EtaSchedule::constant(1.0), InvalidArgument);
  EXPECT_THROW(DeltaSchedule::geometric(1.0), InvalidArgument);
  for (std::uint64_t k = 0; k < 50; ++k) {
    EXPECT_GE(DeltaSchedule::power(1.5).at(k), DeltaSchedule::power(1.5).at(k + 1));
    EXPECT_GE(DeltaSchedule::geometric(0.9).at(k), DeltaSchedule::geometric(0.9).at(k + 1));
  }
}

class EstimatorTest : public ::testing::Test {
 protected:
  CompositeProblem problem = generate_quadratic(6, 500, 20.0, 3);
  Vector y = Vector::Constant(6, 0.1);
  double alpha = 1.0 / problem.smooth->smoothness();
};

TEST_F(EstimatorTest, FullBatchIsExact) {
  GradientEstimator est({FullBatch{}, 1}, problem);
  Counter c;
  const auto e = est.estimate(y, 0, alpha, c);
  EXPECT_EQ(e.g, problem.smooth->full_gradient(y));
  EXPECT_EQ(e.sample_size, 500);
  EXPECT_EQ(c.value(), 500u);
}

TEST_F(EstimatorTest, ConstantBatchCountsDraws) {
  GradientEstimator est({ConstantBatch{64}, 1}, problem);
  Counter c;
  for (std::uint64_t k = 0; k < 3; ++k) {
    const auto e = est.estimate(y, k, alpha, c);
    EXPECT_EQ(e.sample_size, 64);
    Vector mean = Vector::Zero(6);
    for (Index i : est.last_indices()) mean += problem.smooth->sample_gradient(y, i);
    EXPECT_LE((mean / 64.0 - e.g).norm(), 1e-12);
  }
  EXPECT_EQ(c.value(), 192u);
}

TEST_F(EstimatorTest, GeometricGrowthSequence) {
  GradientEstimator est({GeometricGrowth{32, 1.05}, 1}, problem);
  Counter c;
  std::vector<Index> sizes;
  for (std::uint64_t k = 0; k < 5; ++k) sizes.push_back(est.estimate(y, k, alpha, c).sample_size);
  EXPECT_EQ(sizes, (std::vector<Index>{32, 34, 36, 38, 40}));
}

TEST_F(EstimatorTest, GeometricGrowthHoldsAtN) {
  GradientEstimator est({GeometricGrowth{400, 1.5}, 1}, problem);
  Counter c;
  est.estimate(y, 0, alpha, c);
  EXPECT_EQ(est.estimate(y, 1, alpha, c).sample_size, 500);
  EXPECT_EQ(est.estimate(y, 2, alpha, c).sample_size, 500);
}

TEST_F(EstimatorTest, ZeroToleranceFiniteSumForcesFullSet) {
  AdaptiveUnbiased a;
  a.condition.variant = ConditionVariant::FiniteSum;
  a.condition.eta = EtaSchedule::constant(0.0);
  GradientEstimator est({a, 2}, problem);
  Counter c;
  const auto e = est.estimate(y, 0, alpha, c);
  EXPECT_EQ(e.sample_size, 500);
  EXPECT_LE((e.g - problem.smooth->full_gradient(y)).norm(), 1e-12);
}

TEST_F(EstimatorTest, AdaptiveCountsEveryDraw) {
  AdaptiveUnbiased a;
  a.condition.eta = EtaSchedule::constant(0.5);
  GradientEstimator est({a, 4}, problem);
  Counter c;
  std::uint64_t draws = 0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto e = est.estimate(y, k, alpha, c);
    draws += static_cast<std::uint64_t>(e.diag.draws);
    EXPECT_GE(e.sample_size, 1);
    EXPECT_LE(e.sample_size, 500);
    EXPECT_LE(e.diag.augmentations, 5);
    EXPECT_EQ(static_cast<Index>(est.last_indices().size()), e.diag.draws);
  }
  EXPECT_EQ(c.value(), draws);
}

TEST_F(EstimatorTest, AdaptiveAugmentsTowardTarget) {
  AdaptiveUnbiased a;
  a.condition.eta = EtaSchedule::constant(0.2);
  a.initial = 2;
  GradientEstimator est({a, 5}, problem);
  Counter c;
  const auto e = est.estimate(y, 0, alpha, c);
  EXPECT_GT(e.sample_size, 2);
  EXPECT_GE(e.diag.augmentations, 1);
  EXPECT_TRUE(e.sample_size >= e.diag.target_size || e.diag.augmentation_limit);
}

TEST_F(EstimatorTest, NestedSetsAreContained) {
  AdaptiveNested a;
  a.condition.eta = EtaSchedule::constant(0.3);
  a.initial = 4;
  GradientEstimator est({a, 6}, problem);
  Counter c;
  std::set<Index> prev;
  Vector z = y;
  for (std::uint64_t k = 0; k < 15; ++k) {
    est.estimate(z, k, alpha, c);
    const std::set<Index> cur(est.last_indices().begin(), est.last_indices().end());
    EXPECT_EQ(cur.size(), est.last_indices().size()) << "nested sample repeats an index";
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
    z *= 0.7;
  }
}

TEST_F(EstimatorTest, FiniteSumSamplesWithoutReplacement) {
  AdaptiveUnbiased a;
  a.condition.variant = ConditionVariant::FiniteSum;
  a.condition.eta = EtaSchedule::constant(0.9);
  a.initial = 50;
  GradientEstimator est({a, 7}, problem);
  Counter c;
  est.estimate(y, 0, alpha, c);
  const auto& idx = est.last_indices();
  EXPECT_EQ(std::set<Index>(idx.begin(), idx.end()).size(), idx.size());
}

TEST_F(EstimatorTest, SameSeedSameIndices) {
  AdaptiveUnbiased a;
  a.condition.eta = EtaSchedule::constant(0.4);
  GradientEstimator e1({a, 9}, problem), e2({a, 9}, problem), e3({a, 10}, problem);
  Counter c;
  for (std::uint64_t k = 0; k < 5; ++k) {
    e1.estimate(y, k, alpha, c);
    e2.estimate(y, k, alpha, c);
    e3.estimate(y, k, alpha, c);
    EXPECT_EQ(e1.last_indices(), e2.last_indices());
  }
  EXPECT_NE(e1.last_indices(), e3.last_indices());
}

TEST_F(EstimatorTest, FiniteSumConditionHoldsWithKnownBound) {
  const auto& q = dynamic_cast<const QuadraticObjective&>(*problem.smooth);
  const double sigma = q.deviation_bound(1.0);
  AdaptiveUnbiased a;
  a.condition.variant = ConditionVariant::FiniteSum;
  a.condition.eta = EtaSchedule::constant(0.9);
  a.condition.iota0 = 0.5;
  a.condition.delta = DeltaSchedule::geometric(0.9);
  a.variance = VarianceEstimate::known(sigma * sigma);
  a.max_augmentations = 100;
  GradientEstimator est({a, 8}, problem);
  Counter c;
  Vector z = Vector::Constant(6, 0.3);
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto e = est.estimate(z, k, alpha, c);
    const Vector x_next = problem.nonsmooth.prox(alpha, z - alpha * e.g);
    const auto audit = verify::audit_condition(problem, e.g, z, x_next, alpha, a.condition, k);
    EXPECT_TRUE(audit.pass) << audit.to_text();
    EXPECT_TRUE(audit.rearranged_pass) << audit.to_text();
    EXPECT_TRUE(audit.contraction_pass) << audit.to_text();
    z = x_next;
  }
}

TEST_F(EstimatorTest, RejectsBadStrategies) {
  EXPECT_THROW(GradientEstimator({ConstantBatch{0}, 1}, problem), InvalidArgument);
  EXPECT_THROW(GradientEstimator({GeometricGrowth{32, 1.0}, 1}, problem), InvalidArgument);
  AdaptiveUnbiased a;
  a.initial = 0;
  EXPECT_THROW(GradientEstimator({a, 1}, problem), InvalidArgument);
}

TEST(SamplingStrategy, Labels) {
  EXPECT_EQ(SamplingStrategy{FullBatch{}}.label(), "Deterministic");
  EXPECT_EQ(SamplingStrategy{ConstantBatch{256}}.label(), "Stochastic-256");
  EXPECT_EQ(SamplingStrategy{GeometricGrowth{}}.label(), "Geometric");
  EXPECT_EQ(SamplingStrategy{AdaptiveUnbiased{}}.label(), "Adaptive");
  EXPECT_EQ(SamplingStrategy{AdaptiveNested{}}.label(), "Adaptive-biased");
}
