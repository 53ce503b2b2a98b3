#include <gtest/gtest.h>

#include <cmath>

#include "lurenet/riccati.h"
#include "test_util.h"

namespace lurenet {
namespace {

using testing::random_stable_problem;
using testing::scalar;

DareProblem scalar_problem(double a, double b, double c, double sigma) {
  return {scalar(a - b * c / sigma), scalar(b), scalar(c), scalar(sigma)};
}

TEST(Riccati, GoldenRatioFixedPoint) {
  const auto sol = solve_primal_dare(scalar_problem(1.0, 1.0, 1.0, 2.0));
  EXPECT_TRUE(sol.converged);
  EXPECT_NEAR(sol.P(0, 0), (std::sqrt(5.0) - 1.0) / 2.0, 1e-9);
  EXPECT_LE(sol.residual, 1e-12 * (1.0 + sol.P.norm()));
}

TEST(Riccati, ZeroLoopMatrixGivesConstantTerm) {
  const auto sol = solve_primal_dare(scalar_problem(0.5, 1.0, 1.0, 2.0));
  EXPECT_NEAR(sol.P(0, 0), 0.5, 1e-14);
}

TEST(Riccati, UnstableScalarStillConverges) {
  // A = 2, D = 0.5: Abar = 1, P^2 - P - 1 = 0.
  const auto sol = solve_primal_dare(scalar_problem(2.0, 1.0, 1.0, 1.0));
  EXPECT_NEAR(sol.P(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-9);
}

TEST(Riccati, FixedPointIndependentOfStart) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto prob = random_stable_problem(rng, 3, 2);
    const auto a = solve_primal_dare(prob);
    const auto b = solve_dare_from(prob, RiccatiSide::kPrimal,
                                   10.0 * Matrix::Identity(3, 3));
    EXPECT_LT((a.P - b.P).norm(), 1e-9 * (1.0 + a.P.norm()));
  }
}

TEST(Riccati, DualityOverRandomProblems) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> nd(1, 5);
  std::uniform_int_distribution<int> md(1, 2);
  for (int i = 0; i < 200; ++i) {
    const int n = nd(rng);
    const int m = std::min(md(rng), n);
    const auto prob = random_stable_problem(rng, n, m);
    const auto Q = solve_dual_dare(prob);
    const DareProblem t{prob.Abar.transpose(), prob.C.transpose(),
                        prob.B.transpose(), prob.Sigma};
    const auto P = solve_primal_dare(t);
    EXPECT_LT((Q.P - P.P.transpose()).norm(), 1e-8 * (1.0 + P.P.norm()))
        << "problem " << i;
  }
}

TEST(Riccati, ValueIterationIsMonotone) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto prob = random_stable_problem(rng, 3, 1);
    Matrix P = prob.C.transpose() * prob.Sigma.inverse() * prob.C;
    for (int k = 0; k < 50; ++k) {
      const Matrix next = riccati_map(prob, P, RiccatiSide::kPrimal);
      Eigen::SelfAdjointEigenSolver<Matrix> es(next - P);
      EXPECT_GE(es.eigenvalues()(0), -1e-10 * (1.0 + P.norm()));
      P = next;
    }
  }
}

TEST(Riccati, InvariantUnderInputScaling) {
  // B -> cB, C -> cC, Sigma -> c^2 Sigma leaves the map unchanged.
  std::mt19937_64 rng(9);
  const double c = 3.7;
  for (int i = 0; i < 20; ++i) {
    const auto prob = random_stable_problem(rng, 3, 2);
    const DareProblem scaled{prob.Abar, c * prob.B, c * prob.C,
                             c * c * prob.Sigma};
    const auto a = solve_primal_dare(prob);
    const auto b = solve_primal_dare(scaled);
    EXPECT_LT((a.P - b.P).norm(), 1e-9 * (1.0 + a.P.norm()));
  }
}

TEST(Riccati, DivergenceIsReported) {
  // Unstable mode seen by C but not reachable through B.
  Matrix A(2, 2);
  A << 2.0, 0.0, 0.0, 0.5;
  Matrix B(2, 1);
  B << 0.0, 1.0;
  Matrix C(1, 2);
  C << 1.0, 0.0;
  try {
    solve_primal_dare({A, B, C, scalar(1.0)});
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_TRUE(e.diverged());
  }
}

TEST(Riccati, BudgetExhaustionIsReported) {
  SolveOptions opts;
  opts.max_iterations = 3;
  try {
    solve_primal_dare(scalar_problem(1.0, 1.0, 1.0, 2.0), opts);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_FALSE(e.diverged());
    EXPECT_EQ(e.last().iterations, 3);
  }
}

TEST(Riccati, ProblemValidation) {
  DareProblem bad{Matrix::Identity(2, 2), Matrix::Ones(3, 1),
                  Matrix::Ones(1, 2), scalar(1.0)};
  EXPECT_THROW(bad.validate(), DimensionMismatch);
  Matrix S(2, 2);
  S << 1.0, 0.5, 0.0, 1.0;
  DareProblem asym{Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                   Matrix::Identity(2, 2), S};
  EXPECT_THROW(asym.validate(), std::invalid_argument);
  DareProblem indefinite{scalar(0.5), scalar(1.0), scalar(1.0), scalar(-1.0)};
  EXPECT_THROW(indefinite.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace lurenet
