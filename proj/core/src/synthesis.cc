#include "lurenet/synthesis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lurenet {

namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// lambda_min of S^-1/2 (Sigma - G) S^-1/2 with S = Sigma + G.
double normalized_gap(const Matrix& Sigma, const Matrix& G) {
  if (Sigma.rows() != Sigma.cols() || G.rows() != Sigma.rows() ||
      G.cols() != Sigma.cols()) {
    throw DimensionMismatch("Sigma and G must be square and of equal size");
  }
  const Matrix S = symmetrize(Sigma + G);
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("Sigma + G is not positive definite");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(
      symmetrize(Sigma - G), S, Eigen::EigenvaluesOnly);
  return ges.eigenvalues()(0);
}

void check_input_shapes(const LureSystem& sys, const Matrix& D,
                        const char* name) {
  const int n = sys.n();
  const int m = sys.m();
  if (sys.A.cols() != n || sys.B.rows() != n || sys.C.rows() != m ||
      sys.C.cols() != n) {
    throw DimensionMismatch("inconsistent plant dimensions");
  }
  if (D.rows() != m || D.cols() != m) {
    throw DimensionMismatch(std::string(name) + " must be " +
                            std::to_string(m) + "x" + std::to_string(m));
  }
}

// Sigma = D + D' after checking it is positive definite.
Matrix sector_weight(const Matrix& D, const char* name) {
  const Matrix Sigma = D + D.transpose();
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success) {
    throw SectorInvalid(std::string(name) + " + " + name +
                        "' is not positive definite");
  }
  return Sigma;
}

// Abar = A - B Sigma^-1 C.
Matrix loop_transform(const LureSystem& sys, const Matrix& Sigma) {
  return sys.A - sys.B * Sigma.llt().solve(sys.C);
}

}  // namespace

CriticalProbability critical_probability(const Matrix& Sigma, const Matrix& G) {
  const double gap = normalized_gap(Sigma, G);
  CriticalProbability out;
  out.raw = 1.0 - gap;
  out.feasible = gap > 0.0;
  out.value = out.feasible ? out.raw : 1.0;
  return out;
}

double sufficient_margin(const Matrix& Sigma, const Matrix& G, double prob) {
  return min_eigenvalue(Sigma - G - (1.0 - prob) * (Sigma + G));
}

double sufficient_margin_qos(const Matrix& Sigma, const Matrix& G,
                             double quality_of_service) {
  const double w = 1.0 / (1.0 + quality_of_service);
  return min_eigenvalue(Sigma - G - w * (Sigma + G));
}

double StateFeedbackDesign::channel_margin() const {
  return sufficient_margin_qos(Sigma1, G, qos(channel));
}

StateFeedbackDesign design_state_feedback(const LureSystem& sys,
                                          const Matrix& D1,
                                          const ChannelModel& channel,
                                          const DesignOptions& opts) {
  check_input_shapes(sys, D1, "D1");
  StateFeedbackDesign out;
  out.channel = channel;
  out.Sigma1 = sector_weight(D1, "D1");
  if (opts.check_sector) {
    const SectorCheck sc = check_sector_condition(sys.phi, D1, opts.grid);
    if (!sc.ok) {
      throw SectorInvalid("D1 violates the sector condition (worst margin " +
                          std::to_string(sc.worst_margin) + ")");
    }
  }
  out.A1 = loop_transform(sys, out.Sigma1);
  out.dare = solve_primal_dare({out.A1, sys.B, sys.C, out.Sigma1}, opts.solve);
  out.P_star = out.dare.P;
  out.G = symmetrize(sys.B.transpose() * out.P_star * sys.B);

  const double mu = channel.mean();
  const double var = channel.variance();
  out.gain_scale = channel.is_bernoulli() ? 1.0 : mu / (mu * mu + var);
  out.K = -out.gain_scale *
          out.G.ldlt().solve(sys.B.transpose() * out.P_star * out.A1);

  out.p_critical = critical_probability(out.Sigma1, out.G);
  const double gap = 1.0 - out.p_critical.raw;
  out.required_qos = gap > 0.0 ? (1.0 - gap) / gap
                               : std::numeric_limits<double>::infinity();
  return out;
}

ObserverDesign design_observer(const LureSystem& sys, const Matrix& D2,
                               const ChannelModel& channel,
                               const DesignOptions& opts) {
  check_input_shapes(sys, D2, "D2");
  if (!channel.is_bernoulli()) {
    throw UnsupportedChannel(
        "observer design requires a Bernoulli output channel");
  }
  ObserverDesign out;
  out.q = channel.mean();
  out.Sigma2 = sector_weight(D2, "D2");
  if (opts.check_sector) {
    const SectorCheck sc = check_incremental_sector(sys.phi, D2, opts.grid);
    if (!sc.ok) {
      throw SectorInvalid(
          "D2 violates the incremental sector condition (worst margin " +
          std::to_string(sc.worst_margin) + ")");
    }
  }
  out.A2 = loop_transform(sys, out.Sigma2);
  out.dare = solve_dual_dare({out.A2, sys.B, sys.C, out.Sigma2}, opts.solve);
  out.Q_star = out.dare.P;
  out.H = symmetrize(sys.C * out.Q_star * sys.C.transpose());
  // L = A2 Q C' H^-1, computed as (H^-1 C Q A2')' with H symmetric.
  out.L = out.H.ldlt()
              .solve(sys.C * out.Q_star * out.A2.transpose())
              .transpose();
  out.q_critical = critical_probability(out.Sigma2, out.H);
  return out;
}

OutputFeedbackController design_output_feedback(
    const LureSystem& sys, const Matrix& D1, const Matrix& D2,
    const ChannelModel& input, const ChannelModel& output,
    const DesignOptions& opts) {
  if (!output.is_bernoulli()) {
    throw UnsupportedChannel(
        "output feedback supports only Bernoulli output channels");
  }
  OutputFeedbackController out;
  out.plant = sys;
  out.controller = design_state_feedback(sys, D1, input, opts);
  out.observer = design_observer(sys, D2, output, opts);
  out.K = out.controller.K;
  out.L = out.observer.L;
  out.p = input.mean();
  out.q = output.mean();
  out.p_c = out.controller.p_critical.value;
  out.q_c = out.observer.q_critical.value;
  out.p_margin = out.controller.channel_margin();
  out.q_margin = out.observer.channel_margin();
  out.feasible = out.p_margin > 0.0 && out.q_margin > 0.0;
  return out;
}

OutputFeedbackController design_output_feedback(const LureSystem& sys,
                                                const Matrix& D1,
                                                const Matrix& D2, double p,
                                                double q,
                                                const DesignOptions& opts) {
  return design_output_feedback(sys, D1, D2, ChannelModel::Bernoulli(p),
                                ChannelModel::Bernoulli(q), opts);
}

CalibrationResult calibrate_scalar_sector(const LureSystem& sys,
                                          const CalibrationOptions& opts) {
  const SectorConstants sc = sector_constants(sys.phi);
  if (!(sc.max_gain > 0.0) || !std::isfinite(sc.max_gain)) {
    throw std::invalid_argument(
        "admissible sector range is empty or unbounded (max_gain = " +
        std::to_string(sc.max_gain) + ")");
  }
  if (opts.points < 1) throw std::invalid_argument("need at least one point");

  CalibrationResult out;
  out.max_gain = sc.max_gain;
  out.lipschitz = sc.lipschitz;
  out.upper = 1.0 / sc.max_gain;
  out.target = opts.target;
  out.tolerance = opts.tolerance;
  out.points.reserve(static_cast<size_t>(opts.points));

  const int m = sys.m();
  const Matrix I = Matrix::Identity(m, m);
  for (int i = 1; i <= opts.points; ++i) {
    CalibrationPoint pt;
    pt.d = out.upper * static_cast<double>(i) / (opts.points + 1);
    pt.d1_sector_ok = pt.d * sc.max_gain < 1.0;
    pt.d2_sector_ok = pt.d * sc.lipschitz < 1.0;
    const Matrix Sigma = 2.0 * pt.d * I;
    const Matrix Abar = loop_transform(sys, Sigma);
    try {
      const DareSolution P =
          solve_primal_dare({Abar, sys.B, sys.C, Sigma}, opts.solve);
      const DareSolution Q =
          solve_dual_dare({Abar, sys.B, sys.C, Sigma}, opts.solve);
      const Matrix G = sys.B.transpose() * P.P * sys.B;
      const Matrix H = sys.C * Q.P * sys.C.transpose();
      const CriticalProbability pc = critical_probability(Sigma, G);
      const CriticalProbability qc = critical_probability(Sigma, H);
      pt.converged = true;
      pt.iterations = P.iterations + Q.iterations;
      pt.p_c = pc.raw;
      pt.q_c = qc.raw;
      pt.p_feasible = pc.feasible;
      pt.q_feasible = qc.feasible;
    } catch (const NonConvergence& e) {
      pt.iterations = e.last().iterations;
      pt.p_c = std::numeric_limits<double>::quiet_NaN();
      pt.q_c = std::numeric_limits<double>::quiet_NaN();
    }
    out.points.push_back(pt);
  }

  int ups = 0;
  int downs = 0;
  const CalibrationPoint* prev = nullptr;
  for (const auto& pt : out.points) {
    if (!pt.converged) continue;
    if (!out.best ||
        std::abs(pt.p_c - opts.target) < std::abs(out.best->p_c - opts.target)) {
      out.best = pt;
    }
    if (prev != nullptr) {
      if (pt.p_c > prev->p_c) ++ups;
      if (pt.p_c < prev->p_c) ++downs;
    }
    prev = &pt;
  }
  out.reproduced =
      out.best && std::abs(out.best->p_c - opts.target) < opts.tolerance;
  if (ups == 0 && downs == 0) {
    out.shape = "constant";
  } else if (downs == 0) {
    out.shape = "increasing";
  } else if (ups == 0) {
    out.shape = "decreasing";
  } else {
    out.shape = "non-monotone";
  }
  return out;
}

}  // namespace lurenet
