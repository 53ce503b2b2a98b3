#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lurenet/errors.h"
#include "lurenet/model.h"
#include "test_util.h"

namespace lurenet {
namespace {

TEST(PiecewiseLinearMap, ChaoticNonlinearityValues) {
  const auto phi = chaotic_lure_system().phi.channels[0];
  EXPECT_DOUBLE_EQ(phi(0.0), 0.0);
  EXPECT_NEAR(phi(0.5), 0.05, 1e-15);
  EXPECT_NEAR(phi(1.0), 0.1, 1e-15);
  EXPECT_NEAR(phi(3.0), 27.3, 1e-12);
  EXPECT_NEAR(phi(4.0), 31.9, 1e-12);
  EXPECT_NEAR(phi(-3.0), -27.3, 1e-12);
  EXPECT_NEAR(phi(-10.0), -(27.3 + 7 * 4.6), 1e-12);
  EXPECT_DOUBLE_EQ(phi.slope_at(2.0), 13.6);
  EXPECT_DOUBLE_EQ(phi.slope_at(-5.0), 4.6);
}

TEST(PiecewiseLinearMap, ContinuousAtBreakpoints) {
  const auto phi = chaotic_lure_system().phi.channels[0];
  for (double b : phi.breakpoints()) {
    EXPECT_NEAR(phi(b - 1e-12), phi(b + 1e-12), 1e-9);
  }
}

TEST(PiecewiseLinearMap, RejectsBadInput) {
  EXPECT_THROW(PiecewiseLinearMap({1.0, 0.0}, {1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinearMap({0.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(PiecewiseLinearMap({NAN}, {1, 1}), std::invalid_argument);
}

TEST(PiecewiseLinearMap, LinearMap) {
  const auto f = PiecewiseLinearMap::Linear(2.5);
  EXPECT_DOUBLE_EQ(f(4.0), 10.0);
  EXPECT_DOUBLE_EQ(f(-2.0), -5.0);
  EXPECT_EQ(f.num_segments(), 1);
}

TEST(Validation, BuiltInSystemsAreValid) {
  EXPECT_TRUE(validate_system(chaotic_lure_system()).ok());
  EXPECT_TRUE(validate_system(stabilizable_demo_system()).ok());
}

TEST(Validation, ReportsViolations) {
  LureSystem s = stabilizable_demo_system();
  s.phi.channels[0] = PiecewiseLinearMap({0.5}, {1.0, -1.0});
  auto rep = validate_system(s);
  ASSERT_FALSE(rep.ok());
  EXPECT_NE(rep.violations[0].find("non-monotone"), std::string::npos);

  s = stabilizable_demo_system();
  s.B.setZero();
  rep = validate_system(s);
  ASSERT_FALSE(rep.ok());
  EXPECT_NE(rep.violations[0].find("B not full column rank"), std::string::npos);

  s = stabilizable_demo_system();
  s.C = Matrix::Zero(1, 3);
  EXPECT_FALSE(validate_system(s).ok());
}

TEST(EvalPhi, DimensionMismatchThrows) {
  const auto s = chaotic_lure_system();
  EXPECT_THROW(eval_phi(s.phi, Vector::Zero(2)), DimensionMismatch);
}

TEST(SectorConstants, ChaoticNonlinearity) {
  const auto sc = sector_constants(chaotic_lure_system().phi);
  EXPECT_NEAR(sc.lipschitz, 13.6, 1e-12);
  EXPECT_NEAR(sc.max_gain, 9.1, 1e-12);
}

TEST(SectorConstants, TerminalSlopeCanDominate) {
  // Chord ratio approaches the outer slope 3 as |y| grows.
  const PiecewiseLinearMap f({-1.0, 1.0}, {3.0, 0.5, 3.0});
  const auto sc = sector_constants(f);
  EXPECT_DOUBLE_EQ(sc.lipschitz, 3.0);
  EXPECT_DOUBLE_EQ(sc.max_gain, 3.0);
}

TEST(SectorConstants, BruteForceNeverExceedsExact) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> bps;
    double b = -4.0;
    for (int i = 0; i < 4; ++i) bps.push_back(b += 0.2 + u(rng));
    std::vector<double> slopes;
    for (int i = 0; i < 5; ++i) slopes.push_back(u(rng));
    const PiecewiseLinearMap f(bps, slopes);
    const auto sc = sector_constants(f);
    double lip = 0.0;
    double gain = 0.0;
    double prev_y = -60.0;
    for (int i = 1; i <= 120000; ++i) {
      const double y = -60.0 + 1e-3 * i;
      lip = std::max(lip, (f(y) - f(prev_y)) / (y - prev_y));
      if (std::abs(y) > 1e-9) gain = std::max(gain, f(y) / y);
      prev_y = y;
    }
    for (double bp : bps) {
      if (bp != 0.0) gain = std::max(gain, f(bp) / bp);
    }
    EXPECT_LE(lip, sc.lipschitz + 1e-9);
    EXPECT_LE(gain, sc.max_gain + 1e-9);
    EXPECT_NEAR(lip, sc.lipschitz, 1e-6);
    // The supremum may only be approached as |y| grows.
    EXPECT_NEAR(std::max({gain, slopes.front(), slopes.back()}), sc.max_gain,
                1e-9);
  }
}

TEST(SectorCheck, ChaoticNonlinearityBounds) {
  const auto nl = chaotic_lure_system().phi;
  const Matrix ok = Matrix::Constant(1, 1, 0.105);
  const Matrix bad = Matrix::Constant(1, 1, 0.115);
  EXPECT_TRUE(check_sector_condition(nl, ok).ok);
  EXPECT_FALSE(check_sector_condition(nl, bad).ok);
  EXPECT_TRUE(check_incremental_sector(nl, Matrix::Constant(1, 1, 0.07)).ok);
  EXPECT_FALSE(check_incremental_sector(nl, Matrix::Constant(1, 1, 0.08)).ok);
  const auto both = check_sector(nl, {ok, Matrix::Constant(1, 1, 0.08)});
  EXPECT_FALSE(both.ok);
}

TEST(ChannelModel, Validation) {
  EXPECT_THROW(ChannelModel::Bernoulli(0.0), std::invalid_argument);
  EXPECT_THROW(ChannelModel::Bernoulli(1.0), std::invalid_argument);
  EXPECT_THROW(ChannelModel::General(0.5, 0.0), std::invalid_argument);
  const auto b = ChannelModel::Bernoulli(0.25);
  EXPECT_DOUBLE_EQ(b.mean(), 0.25);
  EXPECT_DOUBLE_EQ(b.variance(), 0.1875);
  EXPECT_DOUBLE_EQ(qos(b), 0.25 / 0.75);
  const auto g = ChannelModel::General(2.0, 0.5);
  EXPECT_FALSE(g.is_bernoulli());
  EXPECT_DOUBLE_EQ(qos(g), 8.0);
}

}  // namespace
}  // namespace lurenet
