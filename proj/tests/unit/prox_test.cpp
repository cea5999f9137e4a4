#include <adaprox/problems.hpp>
#include <adaprox/prox.hpp>
#include <adaprox/verify.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace adaprox;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(ProxL1, SoftThresholdsEachCoordinate) {
  const Vector p = prox_l1(1.0, 1.0, vec({3.0, -0.5, 0.0}));
  EXPECT_EQ(p, vec({2.0, 0.0, 0.0}));
  for (Index j = 0; j < 3; ++j)
    EXPECT_NEAR(p[j], verify::scalar_l1_prox_oracle(1.0, 1.0, vec({3.0, -0.5, 0.0})[j]), 1e-6);
}

TEST(ProxL1, ZeroWeightIsIdentity) {
  const Vector y = vec({1.5, -2.0, 0.25});
  EXPECT_EQ(prox_l1(1.0, 0.0, y), y);
}

TEST(ProxL1, ZeroIsFixedPoint) { EXPECT_EQ(prox_l1(0.5, 2.0, vec({0.0, 0.0})), vec({0.0, 0.0})); }

TEST(ProxL1, KinkMapsToExactZero) {
  const Vector p = prox_l1(0.5, 2.0, vec({1.0, -1.0}));
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_FALSE(std::signbit(p[1]));
}

TEST(ProxL1, RejectsBadArguments) {
  EXPECT_THROW(prox_l1(0.0, 1.0, vec({1.0})), InvalidArgument);
  EXPECT_THROW(prox_l1(1.0, -1.0, vec({1.0})), InvalidArgument);
}

TEST(ProxBall, InteriorPointUnchanged) {
  EXPECT_EQ(prox_ball(1.0, vec({0.3, 0.4})), vec({0.3, 0.4}));
}

TEST(ProxBall, ScalesRadially) {
  const Vector p = prox_ball(1.0, vec({3.0, 4.0}));
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);
  EXPECT_LE(p.norm(), 1.0);
}

TEST(ProxBall, CenterFixed) { EXPECT_EQ(prox_ball(2.0, vec({0.0, 0.0})), vec({0.0, 0.0})); }

TEST(ProxBall, BoundaryPointReturnedAsIs) {
  const Vector y = vec({0.6, 0.8});
  ASSERT_LE(y.norm(), 1.0);
  EXPECT_EQ(prox_ball(1.0, y), y);
}

TEST(ProxBox, Clamps) {
  EXPECT_EQ(prox_box(vec({-1}), vec({1}), vec({0.5})), vec({0.5}));
  EXPECT_EQ(prox_box(vec({-1}), vec({1}), vec({7})), vec({1}));
  EXPECT_EQ(prox_box(vec({0}), vec({0}), vec({-3})), vec({0}));
}

TEST(ProxBox, RejectsInvertedBounds) {
  EXPECT_THROW(prox_box(vec({1}), vec({-1}), vec({0})), InvalidArgument);
}

TEST(ProxStep, ZeroTermIsGradientStep) {
  Counter c;
  const Vector p = prox_step(NonsmoothTerm::zero(), 0.5, vec({1.0, 2.0}), vec({2.0, -2.0}), c);
  EXPECT_EQ(p, vec({0.0, 3.0}));
  EXPECT_EQ(c.value(), 1u);
}

TEST(ProxStep, BallProjectsBoundaryCenter) {
  Counter c;
  EXPECT_EQ(prox_step(NonsmoothTerm::ball(1.0), 0.5, vec({2.0}), vec({2.0}), c), vec({1.0}));
}

TEST(ProxStep, L1ThresholdsToZero) {
  Counter c;
  EXPECT_EQ(prox_step(NonsmoothTerm::l1(1.0), 1.0, vec({1.0}), vec({0.0}), c), vec({0.0}));
}

TEST(ProxStep, CountsExactlyOnePerCall) {
  Counter c;
  const auto term = NonsmoothTerm::l1(0.1);
  for (int i = 0; i < 7; ++i) prox_step(term, 1.0, vec({1.0}), vec({0.5}), c);
  EXPECT_EQ(c.value(), 7u);
}

TEST(NonsmoothTerm, IndicatorValues) {
  const auto ball = NonsmoothTerm::ball(1.0);
  EXPECT_EQ(ball.value(vec({0.5, 0.5})), 0.0);
  EXPECT_TRUE(std::isinf(ball.value(vec({1.0, 1.0}))));
  const auto box = NonsmoothTerm::box(vec({0, 0}), vec({1, 1}));
  EXPECT_EQ(box.value(vec({0.5, 1.0})), 0.0);
  EXPECT_TRUE(std::isinf(box.value(vec({0.5, 1.5}))));
  EXPECT_DOUBLE_EQ(NonsmoothTerm::l1(2.0).value(vec({1.0, -3.0})), 8.0);
  EXPECT_EQ(NonsmoothTerm::zero().value(vec({4.0})), 0.0);
}

class ProxProperties : public ::testing::TestWithParam<int> {
 protected:
  NonsmoothTerm term() const {
    Vector lo(3), hi(3);
    lo << -1.0, 0.0, -0.5;
    hi << 1.0, 0.0, 2.0;
    switch (GetParam()) {
      case 0:
        return NonsmoothTerm::zero();
      case 1:
        return NonsmoothTerm::l1(0.3);
      case 2:
        return NonsmoothTerm::ball(1.0);
      default:
        return NonsmoothTerm::box(lo, hi);
    }
  }
};

TEST_P(ProxProperties, NonexpansiveAndOptimal) {
  const auto h = term();
  std::mt19937_64 rng(GetParam() + 1);
  std::uniform_real_distribution<double> u(-4.0, 4.0), ua(1e-3, 3.0);
  for (int t = 0; t < 1000; ++t) {
    Vector a(3), b(3);
    for (Index j = 0; j < 3; ++j) a[j] = u(rng), b[j] = u(rng);
    const double alpha = ua(rng);
    const Vector pa = h.prox(alpha, a), pb = h.prox(alpha, b);
    EXPECT_LE((pa - pb).norm(), (a - b).norm() + 1e-12);
    const auto check = verify::check_prox_optimality(h, alpha, a, pa, 1e-8);
    EXPECT_TRUE(check.pass) << check.witness;
  }
}

class IndicatorProperties : public ProxProperties {};

TEST_P(IndicatorProperties, IdempotentAndStepFree) {
  const auto h = term();
  ASSERT_TRUE(h.is_indicator());
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int t = 0; t < 200; ++t) {
    Vector y(3);
    for (Index j = 0; j < 3; ++j) y[j] = u(rng);
    const Vector p = h.prox(0.1, y);
    EXPECT_EQ(h.prox(0.1, p), p);
    EXPECT_EQ(h.prox(7.0, y), p);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ProxProperties, ::testing::Values(0, 1, 2, 3));
INSTANTIATE_TEST_SUITE_P(BallAndBox, IndicatorProperties, ::testing::Values(2, 3));
