#include "lurenet/riccati.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lurenet {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// W' S^-1 W for the constant term of either side.
Matrix weighted_gram(const Matrix& W, const Matrix& Sigma) {
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("Sigma is not positive definite");
  }
  return symmetrize(W.transpose() * llt.solve(W));
}

Matrix constant_term(const DareProblem& prob, RiccatiSide side) {
  return side == RiccatiSide::kPrimal
             ? weighted_gram(prob.C, prob.Sigma)
             : weighted_gram(prob.B.transpose(), prob.Sigma);
}

void check_square(const Matrix& P, Eigen::Index n) {
  if (P.rows() != n || P.cols() != n) {
    std::ostringstream os;
    os << "Riccati iterate must be " << n << "x" << n << ", got " << P.rows()
       << "x" << P.cols();
    throw DimensionMismatch(os.str());
  }
}

Matrix apply_map(const DareProblem& prob, const Matrix& P, RiccatiSide side,
                 const Matrix& constant) {
  check_square(P, prob.Abar.rows());
  const Matrix& A = prob.Abar;
  if (side == RiccatiSide::kPrimal) {
    const Matrix PA = P * A;
    const Matrix X = prob.B.transpose() * PA;  // B'PA
    const Matrix S = prob.Sigma + prob.B.transpose() * P * prob.B;
    Eigen::LLT<Matrix> llt(symmetrize(S));
    if (llt.info() != Eigen::Success) {
      throw std::logic_error("riccati_map: Sigma + B'PB is not invertible");
    }
    return symmetrize(A.transpose() * PA - X.transpose() * llt.solve(X) +
                      constant);
  }
  const Matrix QAt = P * A.transpose();
  const Matrix X = prob.C * QAt;  // CQA'
  const Matrix S = prob.Sigma + prob.C * P * prob.C.transpose();
  Eigen::LLT<Matrix> llt(symmetrize(S));
  if (llt.info() != Eigen::Success) {
    throw std::logic_error("riccati_map: Sigma + CQC' is not invertible");
  }
  return symmetrize(A * QAt - X.transpose() * llt.solve(X) + constant);
}

}  // namespace

void DareProblem::validate() const {
  const auto n = Abar.rows();
  const auto m = B.cols();
  if (Abar.cols() != n || B.rows() != n || C.rows() != m || C.cols() != n ||
      Sigma.rows() != m || Sigma.cols() != m) {
    std::ostringstream os;
    os << "DareProblem shapes inconsistent: Abar " << Abar.rows() << "x"
       << Abar.cols() << ", B " << B.rows() << "x" << B.cols() << ", C "
       << C.rows() << "x" << C.cols() << ", Sigma " << Sigma.rows() << "x"
       << Sigma.cols();
    throw DimensionMismatch(os.str());
  }
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("Sigma is not symmetric");
  }
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("Sigma is not positive definite");
  }
}

Matrix riccati_map(const DareProblem& prob, const Matrix& P,
                   RiccatiSide side) {
  return apply_map(prob, P, side, constant_term(prob, side));
}

double riccati_residual(const DareProblem& prob, const Matrix& P,
                        RiccatiSide side) {
  return (riccati_map(prob, P, side) - P).norm();
}

DareSolution solve_dare_from(const DareProblem& prob, RiccatiSide side,
                             const Matrix& initial, const SolveOptions& opts) {
  prob.validate();
  check_square(initial, prob.Abar.rows());

  const Matrix constant = constant_term(prob, side);
  DareSolution sol;
  sol.P = symmetrize(initial);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Matrix next = apply_map(prob, sol.P, side, constant);
    sol.residual = (next - sol.P).norm();
    sol.iterations = it;
    if (sol.residual <= opts.tol * (1.0 + sol.P.norm())) {
      sol.converged = true;
      return sol;
    }
    sol.P = std::move(next);
    if (!sol.P.allFinite() || sol.P.norm() > opts.divergence_norm) {
      sol.diverged = true;
      throw NonConvergence("Riccati iteration diverged after " +
                               std::to_string(it) + " iterations",
                           sol);
    }
  }
  std::ostringstream os;
  os << "Riccati iteration did not converge in " << opts.max_iterations
     << " iterations (residual " << sol.residual << ")";
  throw NonConvergence(os.str(), sol);
}

DareSolution solve_primal_dare(const DareProblem& prob,
                               const SolveOptions& opts) {
  prob.validate();
  return solve_dare_from(prob, RiccatiSide::kPrimal,
                         constant_term(prob, RiccatiSide::kPrimal), opts);
}

DareSolution solve_dual_dare(const DareProblem& prob,
                             const SolveOptions& opts) {
  prob.validate();
  return solve_dare_from(prob, RiccatiSide::kDual,
                         constant_term(prob, RiccatiSide::kDual), opts);
}

}  // namespace lurenet
