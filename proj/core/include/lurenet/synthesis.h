#pragma once

// Gain synthesis for observer-based control of Lure plants over erasure
// channels. Controller and observer are designed independently (separation),
// each from a loop-transformed Riccati equation; the erasure statistics only
// enter through the sufficient margins below.

#include <optional>
#include <string>
#include <vector>

#include "lurenet/model.h"
#include "lurenet/riccati.h"

namespace lurenet {

struct DesignOptions {
  SolveOptions solve;
  /// Run the numeric sector check on D before designing. Calibration sweeps
  /// turn this off and use the exact scalar predicates instead.
  bool check_sector = true;
  SectorGrid grid;
};

/// Threshold on the delivery probability above which the sufficient
/// condition holds. `raw` is 1 - lambda_min(S^-1/2 (Sigma - G) S^-1/2) with
/// S = Sigma + G; when raw >= 1 the deterministic positivity Sigma - G > 0
/// already fails, `feasible` is false and `value` is clamped to 1.
struct CriticalProbability {
  double value = 1.0;
  double raw = 1.0;
  bool feasible = false;
};

/// Throws std::invalid_argument if Sigma + G is not positive definite.
CriticalProbability critical_probability(const Matrix& Sigma, const Matrix& G);

/// lambda_min(Sigma - G - (1 - prob)(Sigma + G)); positive iff the sufficient
/// condition holds at delivery probability `prob`.
double sufficient_margin(const Matrix& Sigma, const Matrix& G, double prob);

/// Same condition with the channel weight 1/(1 + QoS), which covers both
/// Bernoulli (1/(1+Q) = 1 - p) and general multiplicative channels.
double sufficient_margin_qos(const Matrix& Sigma, const Matrix& G,
                             double quality_of_service);

struct StateFeedbackDesign {
  Matrix Sigma1;  // D1 + D1'
  Matrix A1;      // A - B Sigma1^-1 C
  Matrix P_star;
  Matrix G;       // B' P* B
  Matrix K;
  DareSolution dare;
  CriticalProbability p_critical;
  /// mu / (mu^2 + sigma^2); exactly the Bernoulli gain when 1.
  double gain_scale = 1.0;
  /// Smallest channel QoS satisfying the condition (infinite if none does).
  double required_qos = 0.0;
  ChannelModel channel = ChannelModel::Bernoulli(0.5);

  /// Sufficient margin evaluated at the design channel.
  double channel_margin() const;
  bool feasible_for_channel() const { return channel_margin() > 0.0; }
  double margin_at(double prob) const {
    return sufficient_margin(Sigma1, G, prob);
  }
};

struct ObserverDesign {
  Matrix Sigma2;  // D2 + D2'
  Matrix A2;      // A - B Sigma2^-1 C
  Matrix Q_star;
  Matrix H;       // C Q* C'
  Matrix L;
  DareSolution dare;
  CriticalProbability q_critical;
  double q = 0.5;

  double channel_margin() const { return margin_at(q); }
  double margin_at(double prob) const {
    return sufficient_margin(Sigma2, H, prob);
  }
};

/// K = -(mu/(mu^2+sigma^2)) (B'P*B)^-1 B'P* A1 where P* solves the primal
/// Riccati equation for (A1, B, C, Sigma1).
///
/// Throws SectorInvalid (D1 + D1' not PD, or the sector check fails),
/// NonConvergence (Riccati), DimensionMismatch. Infeasibility is reported in
/// the result and never thrown.
StateFeedbackDesign design_state_feedback(const LureSystem& sys,
                                          const Matrix& D1,
                                          const ChannelModel& channel,
                                          const DesignOptions& opts = {});

/// L = A2 Q* C' (C Q* C')^-1 where Q* solves the dual Riccati equation for
/// (A2, B, C, Sigma2). Only Bernoulli output channels are supported.
ObserverDesign design_observer(const LureSystem& sys, const Matrix& D2,
                               const ChannelModel& channel,
                               const DesignOptions& opts = {});

struct OutputFeedbackController {
  LureSystem plant;  // copy driven by the observer
  StateFeedbackDesign controller;
  ObserverDesign observer;
  Matrix K;
  Matrix L;
  double p = 0.0;
  double q = 0.0;
  double p_c = 1.0;
  double q_c = 1.0;
  double p_margin = 0.0;
  double q_margin = 0.0;
  bool feasible = false;
};

/// Designs K and L independently and reports joint feasibility
/// (p_margin > 0 and q_margin > 0). The returned controller drives
///   xhat[t+1] = A xhat - B phi(C xhat) + gamma B u + L xi (y - C xhat).
OutputFeedbackController design_output_feedback(const LureSystem& sys,
                                                const Matrix& D1,
                                                const Matrix& D2, double p,
                                                double q,
                                                const DesignOptions& opts = {});

/// Channel-model overload. A General output channel raises
/// UnsupportedChannel; a General input channel uses the QoS margin.
OutputFeedbackController design_output_feedback(
    const LureSystem& sys, const Matrix& D1, const Matrix& D2,
    const ChannelModel& input, const ChannelModel& output,
    const DesignOptions& opts = {});

// ---------------------------------------------------------------------------
// Scalar sector calibration: D1 = D2 = d I over the admissible range.

struct CalibrationPoint {
  double d = 0.0;
  bool converged = false;
  double p_c = 1.0;  // raw values (>= 1 means infeasible)
  double q_c = 1.0;
  bool p_feasible = false;
  bool q_feasible = false;
  bool d1_sector_ok = false;  // d * max_gain < 1
  bool d2_sector_ok = false;  // d * lipschitz < 1
  int iterations = 0;
};

struct CalibrationOptions {
  int points = 2000;
  double target = 0.3441;
  double tolerance = 0.002;
  SolveOptions solve;
};

struct CalibrationResult {
  std::vector<CalibrationPoint> points;
  double max_gain = 0.0;
  double lipschitz = 0.0;
  double upper = 0.0;  // 1 / max_gain
  double target = 0.0;
  double tolerance = 0.0;
  /// Converged point whose p_c is closest to the target (absent when no
  /// point converged).
  std::optional<CalibrationPoint> best;
  bool reproduced = false;  // |best.p_c - target| < tolerance
  /// "increasing", "decreasing", "constant" or "non-monotone" over the
  /// converged points.
  std::string shape;
};

/// Sweeps d over the open interval (0, 1/max_gain) on `points` equally spaced
/// interior points. Throws std::invalid_argument when the admissible range is
/// empty or unbounded (max_gain not a positive finite number).
CalibrationResult calibrate_scalar_sector(const LureSystem& sys,
                                          const CalibrationOptions& opts = {});

}  // namespace lurenet
