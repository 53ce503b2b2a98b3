#pragma once

// Fixed-point solvers for the weighted discrete algebraic Riccati equations
//
//   primal:  P = A'PA - A'PB (S + B'PB)^-1 B'PA + C' S^-1 C
//   dual:    Q = AQA' - AQC' (S + CQC')^-1 CQA' + B S^-1 B'
//
// where A is the loop-transformed matrix A - B S^-1 C and S = D + D'.

#include <string>

#include "lurenet/errors.h"
#include "lurenet/model.h"

namespace lurenet {

struct DareProblem {
  Matrix Abar;   // N x N
  Matrix B;      // N x M
  Matrix C;      // M x N
  Matrix Sigma;  // M x M, symmetric positive definite

  /// Throws DimensionMismatch on inconsistent shapes and std::invalid_argument
  /// if Sigma is not symmetric (to 1e-12) and positive definite.
  void validate() const;
};

enum class RiccatiSide { kPrimal, kDual };

struct SolveOptions {
  /// Convergence when residual <= tol * (1 + ||P||_F).
  double tol = 1e-12;
  int max_iterations = 100000;
  /// Iteration is declared divergent once ||P||_F exceeds this.
  double divergence_norm = 1e12;
};

struct DareSolution {
  Matrix P;
  double residual = 0.0;  // ||RHS(P) - P||_F at the returned P
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, DareSolution last)
      : Error(what), last_(std::move(last)) {}

  const DareSolution& last() const { return last_; }
  bool diverged() const { return last_.diverged; }

 private:
  DareSolution last_;
};

/// One application of the Riccati map. P must be symmetric PSD so that
/// S + B'PB stays invertible; a failed factorization is a logic error.
Matrix riccati_map(const DareProblem& prob, const Matrix& P, RiccatiSide side);

/// Frobenius norm of riccati_map(P) - P.
double riccati_residual(const DareProblem& prob, const Matrix& P,
                        RiccatiSide side);

/// Value iteration from P0 = C'S^-1C. Throws NonConvergence when the iteration
/// budget is exhausted or ||P|| exceeds opts.divergence_norm.
DareSolution solve_primal_dare(const DareProblem& prob,
                               const SolveOptions& opts = {});

/// Value iteration from Q0 = B S^-1 B'.
DareSolution solve_dual_dare(const DareProblem& prob,
                             const SolveOptions& opts = {});

/// Same iteration as the solvers but starting from a caller-supplied matrix;
/// used to cross-check that the fixed point does not depend on the start.
DareSolution solve_dare_from(const DareProblem& prob, RiccatiSide side,
                             const Matrix& initial,
                             const SolveOptions& opts = {});

}  // namespace lurenet
