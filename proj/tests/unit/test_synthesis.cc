#include <gtest/gtest.h>

#include <cmath>

#include "lurenet/errors.h"
#include "lurenet/synthesis.h"
#include "test_util.h"

namespace lurenet {
namespace {

using testing::scalar;
using testing::scalar_system;
using testing::spectral_radius;

// Independent numpy value iteration on the demo plant at d = 0.8.
const double kDemoP[2][2] = {{0.501971920277298, -0.2807202066797404},
                             {-0.2807202066797404, 1.2768298844346921}};
const double kDemoQ[2][2] = {{3.4950044550870247, 0.6622193745327596},
                             {0.6622193745327596, 2.6988798593885432}};
const double kDemoK[2] = {-1.0243469760319128, 0.21219662416754112};
const double kDemoL[2] = {2.6984142335553227, 1.0741135298265774};
const double kDemoCritical = 0.4776200057050014;

TEST(StateFeedback, DemoPlantMatchesOracle) {
  const auto sys = stabilizable_demo_system();
  const auto d = design_state_feedback(sys, scalar(0.8),
                                       ChannelModel::Bernoulli(0.6));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(d.P_star(i, j), kDemoP[i][j], 1e-9);
    EXPECT_NEAR(d.K(0, i), kDemoK[i], 1e-9);
  }
  EXPECT_NEAR(d.p_critical.value, kDemoCritical, 1e-9);
  EXPECT_TRUE(d.p_critical.feasible);
  EXPECT_TRUE(d.feasible_for_channel());
  EXPECT_LT(spectral_radius(sys.A + sys.B * d.K), 1.0);
}

TEST(Observer, DemoPlantMatchesOracle) {
  const auto sys = stabilizable_demo_system();
  const auto o = design_observer(sys, scalar(0.8), ChannelModel::Bernoulli(0.6));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(o.Q_star(i, j), kDemoQ[i][j], 1e-9);
    EXPECT_NEAR(o.L(i, 0), kDemoL[i], 1e-9);
  }
  EXPECT_NEAR(o.q_critical.value, kDemoCritical, 1e-9);
  EXPECT_LT(spectral_radius(sys.A - o.L * sys.C), 1.0);
}

TEST(StateFeedback, GoldenRatioScalar) {
  const auto d = design_state_feedback(scalar_system(1.0), scalar(1.0),
                                       ChannelModel::Bernoulli(0.5));
  const double P = (std::sqrt(5.0) - 1.0) / 2.0;
  EXPECT_NEAR(d.P_star(0, 0), P, 1e-9);
  EXPECT_NEAR(d.K(0, 0), -0.5, 1e-9);
  EXPECT_NEAR(d.p_critical.value, 2.0 * P / (2.0 + P), 1e-9);
}

TEST(StateFeedback, DeadbeatScalar) {
  const auto d = design_state_feedback(scalar_system(0.5), scalar(1.0),
                                       ChannelModel::Bernoulli(0.5));
  EXPECT_NEAR(d.K(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(d.p_critical.value, 0.4, 1e-12);
}

TEST(StateFeedback, InfeasibleIsAValueNotAnError) {
  const auto d = design_state_feedback(scalar_system(2.0), scalar(0.5),
                                       ChannelModel::Bernoulli(0.9));
  EXPECT_FALSE(d.p_critical.feasible);
  EXPECT_DOUBLE_EQ(d.p_critical.value, 1.0);
  EXPECT_GT(d.p_critical.raw, 1.0);
  EXPECT_FALSE(d.feasible_for_channel());
}

TEST(CriticalProbability, ScalarClosedForm) {
  for (double s : {0.5, 1.0, 3.0}) {
    for (double g : {0.1, 0.5, 2.0}) {
      const auto c = critical_probability(scalar(s), scalar(g));
      EXPECT_NEAR(c.raw, 2.0 * g / (s + g), 1e-14);
      EXPECT_EQ(c.feasible, g < s);
    }
  }
}

TEST(SufficientMargin, SignFlipsAtCriticalProbability) {
  const auto sys = stabilizable_demo_system();
  const auto c = design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.6);
  EXPECT_GT(c.controller.margin_at(c.p_c + 0.01), 0.0);
  EXPECT_LT(c.controller.margin_at(c.p_c - 0.01), 0.0);
  EXPECT_GT(c.observer.margin_at(c.q_c + 0.01), 0.0);
  EXPECT_LT(c.observer.margin_at(c.q_c - 0.01), 0.0);
  EXPECT_NEAR(c.controller.margin_at(c.p_c), 0.0, 1e-9);
}

TEST(SufficientMargin, QosFormMatchesBernoulli) {
  const Matrix S = scalar(1.6);
  const Matrix G = scalar(0.5);
  for (double p : {0.2, 0.5, 0.8}) {
    EXPECT_NEAR(sufficient_margin_qos(S, G, p / (1.0 - p)),
                sufficient_margin(S, G, p), 1e-12);
  }
}

TEST(GeneralChannel, MatchesBernoulliWithSameMoments) {
  const auto sys = stabilizable_demo_system();
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto b = design_state_feedback(sys, scalar(0.8),
                                         ChannelModel::Bernoulli(p));
    const auto g = design_state_feedback(
        sys, scalar(0.8), ChannelModel::General(p, p * (1.0 - p)));
    EXPECT_LT((b.K - g.K).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(qos(b.channel), qos(g.channel), 1e-12 * qos(b.channel));
  }
}

TEST(GeneralChannel, GainScale) {
  const auto sys = stabilizable_demo_system();
  const auto b = design_state_feedback(sys, scalar(0.8),
                                       ChannelModel::Bernoulli(0.5));
  const auto g = design_state_feedback(sys, scalar(0.8),
                                       ChannelModel::General(2.0, 1.0));
  EXPECT_DOUBLE_EQ(g.gain_scale, 0.4);
  EXPECT_LT((g.K - 0.4 * b.K).norm(), 1e-12);
}

TEST(Observer, RejectsGeneralChannel) {
  const auto sys = stabilizable_demo_system();
  EXPECT_THROW(design_observer(sys, scalar(0.8), ChannelModel::General(1, 1)),
               UnsupportedChannel);
  EXPECT_THROW(design_output_feedback(sys, scalar(0.8), scalar(0.8),
                                      ChannelModel::Bernoulli(0.5),
                                      ChannelModel::General(1, 1)),
               UnsupportedChannel);
}

TEST(Design, SectorValidation) {
  const auto sys = chaotic_lure_system();
  EXPECT_THROW(design_state_feedback(sys, scalar(-0.1),
                                     ChannelModel::Bernoulli(0.5)),
               SectorInvalid);
  EXPECT_THROW(design_state_feedback(sys, scalar(0.2),
                                     ChannelModel::Bernoulli(0.5)),
               SectorInvalid);
  EXPECT_THROW(design_observer(sys, scalar(0.1), ChannelModel::Bernoulli(0.5)),
               SectorInvalid);
  EXPECT_THROW(design_state_feedback(sys, Matrix::Identity(2, 2),
                                     ChannelModel::Bernoulli(0.5)),
               DimensionMismatch);
}

TEST(Design, ChaoticPlantObserverAndControllerThresholdsAgree) {
  // B = C' makes C Q* C' equal to B' P* B.
  const auto sys = chaotic_lure_system();
  const auto c = design_output_feedback(sys, scalar(0.05), scalar(0.05), 0.5, 0.5);
  EXPECT_NEAR(c.q_c, c.p_c, 1e-9);
  EXPECT_NEAR(c.observer.q_critical.raw, c.controller.p_critical.raw, 1e-9);
  EXPECT_FALSE(c.feasible);
}

TEST(Design, OutputFeedbackFeasibility) {
  const auto sys = stabilizable_demo_system();
  const auto ok = design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.6);
  EXPECT_TRUE(ok.feasible);
  const auto low = design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.4);
  EXPECT_FALSE(low.feasible);
  EXPECT_GT(low.p_margin, 0.0);
  EXPECT_LT(low.q_margin, 0.0);
}

TEST(Calibration, DemoPlantCurve) {
  CalibrationOptions opts;
  opts.points = 40;
  opts.target = 0.5485;
  opts.tolerance = 0.01;
  const auto res = calibrate_scalar_sector(stabilizable_demo_system(), opts);
  EXPECT_NEAR(res.max_gain, 0.6, 1e-12);
  EXPECT_NEAR(res.upper, 1.0 / 0.6, 1e-12);
  ASSERT_EQ(res.points.size(), 40u);
  ASSERT_TRUE(res.best.has_value());
  EXPECT_TRUE(res.reproduced);
  // p_c(d) bottoms out near d = 0.86 and rises again.
  EXPECT_EQ(res.shape, "non-monotone");
  for (const auto& p : res.points) {
    ASSERT_TRUE(p.converged);
    EXPECT_NEAR(p.p_c, p.q_c, 1e-9);
    EXPECT_TRUE(p.d1_sector_ok);
  }
}

TEST(Calibration, EmptyRangeIsAnError) {
  EXPECT_THROW(calibrate_scalar_sector(scalar_system(0.5, 0.0)),
               std::invalid_argument);
}

}  // namespace
}  // namespace lurenet
