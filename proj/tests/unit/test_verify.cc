#include <gtest/gtest.h>

#include <cmath>

#include "lurenet/synthesis.h"
#include "lurenet/verify.h"
#include "test_util.h"

namespace lurenet {
namespace {

using testing::scalar;

struct Demo {
  LureSystem sys = stabilizable_demo_system();
  OutputFeedbackController c =
      design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.6);
  Matrix R = 1e-6 * Matrix::Identity(2, 2);
};

TEST(FitDecay, GeometricSeries) {
  std::vector<double> s;
  for (int t = 0; t < 100; ++t) s.push_back(3.0 * std::pow(0.9, t));
  const auto f = fit_decay(s);
  EXPECT_NEAR(f.beta_hat, 0.9, 1e-9);
  EXPECT_NEAR(f.M_hat, 3.0, 1e-9);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_FALSE(f.degenerate);
}

TEST(FitDecay, ConstantSeries) {
  const auto f = fit_decay(std::vector<double>(20, 4.0));
  EXPECT_DOUBLE_EQ(f.beta_hat, 1.0);
  EXPECT_NEAR(f.M_hat, 4.0, 1e-12);
}

TEST(FitDecay, ZeroIsClampedAndFlagged) {
  const std::vector<double> s{1.0, 0.5, 0.0, 0.1};
  const auto f = fit_decay(s, 0, s.size());
  EXPECT_TRUE(f.degenerate);
  EXPECT_TRUE(std::isfinite(f.beta_hat));
}

TEST(FitDecay, WindowStopsAtUnderflowOrInfinity) {
  std::vector<double> s{1.0, 0.1, 0.01, 1e-260, 1.0};
  EXPECT_EQ(decaying_window(s), (std::pair<size_t, size_t>{0, 3}));
  s = {1.0, 2.0, INFINITY};
  EXPECT_EQ(decaying_window(s).second, 2u);
  EXPECT_THROW(fit_decay(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Prl, FullDeliveryReducesToDeterministicMargin) {
  Demo d;
  const Matrix& P = d.c.controller.P_star;
  const auto cert = stochastic_prl_margin(d.sys, d.c.K, d.c.controller.Sigma1,
                                          P, d.R, 1.0, PrlSide::kController);
  const double det = deterministic_prl_margin(
      d.sys, d.sys.A + d.sys.B * d.c.K, d.c.controller.Sigma1, P, d.R);
  EXPECT_NEAR(cert.margin, det, 1e-12);
}

TEST(Prl, DefectIsAffineInProbability) {
  Demo d;
  for (auto side : {PrlSide::kController, PrlSide::kObserver}) {
    const Matrix& gain = side == PrlSide::kController ? d.c.K : d.c.L;
    const Matrix& S =
        side == PrlSide::kController ? d.c.controller.Sigma1 : d.c.observer.Sigma2;
    const Matrix P = side == PrlSide::kController
                         ? d.c.controller.P_star
                         : Matrix(d.c.observer.Q_star.inverse());
    const auto d0 = prl_defect(d.sys, gain, S, P, d.R, 0.0, side);
    const auto d1 = prl_defect(d.sys, gain, S, P, d.R, 1.0, side);
    const auto dm = prl_defect(d.sys, gain, S, P, d.R, 0.37, side);
    ASSERT_TRUE(d0 && d1 && dm);
    EXPECT_LT((*dm - (0.37 * *d1 + 0.63 * *d0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Prl, NonInvertibleWeightGivesNegativeInfinity) {
  Demo d;
  const Matrix big = 100.0 * Matrix::Identity(2, 2);
  const auto cert = stochastic_prl_margin(d.sys, d.c.K, d.c.controller.Sigma1,
                                          big, d.R, 0.5, PrlSide::kController);
  EXPECT_TRUE(std::isinf(cert.margin) && cert.margin < 0);
  EXPECT_FALSE(cert.diagnostic.empty());
}

TEST(Prl, DimensionChecks) {
  Demo d;
  EXPECT_THROW(stochastic_prl_margin(d.sys, d.c.L, d.c.controller.Sigma1,
                                     d.c.controller.P_star, d.R, 0.5,
                                     PrlSide::kController),
               DimensionMismatch);
  EXPECT_THROW(stochastic_prl_margin(d.sys, d.c.K, d.c.controller.Sigma1,
                                     d.c.controller.P_star, d.R, 1.5,
                                     PrlSide::kController),
               std::invalid_argument);
}

TEST(Prl, CertificateAboveCriticalNotBelow) {
  Demo d;
  const double pc = d.c.p_c;
  const auto ctrl =
      search_certificate(d.sys, d.c.K, d.c.controller.Sigma1,
                         d.c.controller.P_star, d.R, pc + 0.05,
                         PrlSide::kController);
  ASSERT_TRUE(ctrl.found);
  EXPECT_GT(ctrl.best.margin, 0.0);
  const auto below = stochastic_prl_margin(d.sys, d.c.K, d.c.controller.Sigma1,
                                           ctrl.best.P, d.R, pc - 0.05,
                                           PrlSide::kController);
  EXPECT_LT(below.margin, 0.0);

  const Matrix Po = d.c.observer.Q_star.inverse();
  const double qc = d.c.q_c;
  const auto obs = search_certificate(d.sys, d.c.L, d.c.observer.Sigma2, Po,
                                      d.R, qc + 0.05, PrlSide::kObserver);
  ASSERT_TRUE(obs.found);
  const auto obs_below = stochastic_prl_margin(
      d.sys, d.c.L, d.c.observer.Sigma2, obs.best.P, d.R, qc - 0.05,
      PrlSide::kObserver);
  EXPECT_LT(obs_below.margin, 0.0);
}

TEST(Lyapunov, SamplesAreDeterministicAndNonzero) {
  const auto sys = chaotic_lure_system();
  StateSampleSpec spec;
  spec.count = 500;
  const auto a = sample_states(sys, spec);
  const auto b = sample_states(sys, spec);
  ASSERT_EQ(a.size(), 500u);
  int near_shell = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_GT(a[i].norm(), 0.0);
    const double y = std::abs((sys.C * a[i])(0));
    if (std::abs(y - 1.0) < 2e-3 || std::abs(y - 3.0) < 4e-3) ++near_shell;
  }
  EXPECT_GE(near_shell, 100);
}

TEST(Lyapunov, DemoStateFeedbackDecreases) {
  Demo d;
  const auto cert = search_certificate(d.sys, d.c.K, d.c.controller.Sigma1,
                                       d.c.controller.P_star, d.R, 0.6,
                                       PrlSide::kController);
  StateSampleSpec spec;
  spec.count = 2000;
  const auto r = lyapunov_decrease_state(d.sys, d.c.K, cert.best.P, 0.6, spec);
  EXPECT_LT(r.worst_ratio, 0.0);
  EXPECT_EQ(r.violations, 0);
  const auto e = lyapunov_decrease_error(d.sys, d.c.L,
                                         d.c.observer.Q_star.inverse(), 0.6, spec);
  EXPECT_LT(e.worst_ratio, 0.0);
}

TEST(Lyapunov, LinearCaseMatchesMeanSquareTest) {
  LureSystem sys = stabilizable_demo_system();
  sys.phi.channels[0] = PiecewiseLinearMap::Linear(0.0);
  Demo d;
  const Matrix& K = d.c.K;
  const Matrix P = d.c.controller.P_star;
  const double p = 0.7;
  const Matrix A1 = sys.A + sys.B * K;
  const Matrix M = p * A1.transpose() * P * A1 +
                   (1 - p) * sys.A.transpose() * P * sys.A - P;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  StateSampleSpec spec;
  spec.count = 4000;
  const auto r = lyapunov_decrease_state(sys, K, P, p, spec);
  EXPECT_LE(r.worst_ratio, es.eigenvalues()(1) + 1e-12);
  EXPECT_GE(r.worst_ratio, es.eigenvalues()(1) - 1e-2);
  spec.radius = 0.01;
  const auto small = lyapunov_decrease_state(sys, K, P, p, spec);
  EXPECT_NEAR(small.worst_ratio, r.worst_ratio, 1e-12);
}

TEST(Lyapunov, NoAuthorityWithoutDelivery) {
  Demo d;
  StateSampleSpec spec;
  spec.count = 500;
  const auto r = lyapunov_decrease_state(d.sys, d.c.K, d.c.controller.P_star,
                                         0.0, spec);
  EXPECT_GT(r.worst_ratio, 0.0);
  EXPECT_GT(r.violations, 0);
}

TEST(Lyapunov, OutputLoopDecreasesOnDemo) {
  Demo d;
  StateSampleSpec spec;
  spec.count = 2000;
  const auto r = lyapunov_decrease_output(
      d.sys, d.c.K, d.c.L, d.c.controller.P_star,
      100.0 * d.c.observer.Q_star.inverse(), 1.0, 1.0, spec);
  EXPECT_EQ(r.samples, 2000);
  EXPECT_EQ(r.worst_state.size(), 4);
}

}  // namespace
}  // namespace lurenet
