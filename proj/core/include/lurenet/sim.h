#pragma once

// Seeded Monte Carlo simulation of Lure plants over erasure channels with a
// TCP-style acknowledgment of the input channel state.
//
// One step, in order:
//   y = C x, yhat = C xhat, draw gamma ~ B(p), xi ~ B(q)
//   u = K xhat (output feedback) | K x (state feedback) | 0 (open loop)
//   x'    = A x    - B phi(y)    + gamma B u + w
//   xhat' = A xhat - B phi(yhat) + gamma B u + xi L (y - yhat)
//
// The observer uses gamma[t] when forming xhat[t+1], i.e. the ack arrives one
// step after u[t] was emitted.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lurenet/model.h"
#include "lurenet/rng.h"
#include "lurenet/synthesis.h"

namespace lurenet {

enum class LoopMode { kOpenLoop, kStateFeedback, kOutputFeedback };

const char* to_string(LoopMode mode);
/// Accepts "open_loop", "state_feedback", "output_feedback".
LoopMode parse_loop_mode(const std::string& name);

struct LoopGains {
  Matrix K;  // M x N, may be empty in open loop
  Matrix L;  // N x M, may be empty (observer then runs without correction)

  static LoopGains From(const OutputFeedbackController& c) {
    return {c.K, c.L};
  }
};

struct SimConfig {
  int horizon = 200;
  int realizations = 50;
  uint64_t seed = 1;
  Vector x0;     // empty -> 0.1 in every component
  Vector xhat0;  // empty -> 0
  double p = 1.0;
  double q = 1.0;
  double noise_variance = 0.0;
  LoopMode mode = LoopMode::kOutputFeedback;
  double divergence_norm = 1e12;
  unsigned threads = 0;  // 0 = hardware concurrency

  /// Fills defaulted initial conditions and checks ranges. Throws
  /// std::invalid_argument or DimensionMismatch.
  SimConfig resolved(const LureSystem& sys) const;
};

struct RealizationTrace {
  std::vector<Vector> x;     // x[0..steps]
  std::vector<Vector> xhat;  // xhat[0..steps]
  std::vector<uint8_t> gamma;  // gamma[0..steps-1]
  std::vector<uint8_t> xi;
  bool diverged = false;

  int steps() const { return static_cast<int>(gamma.size()); }
  Vector error(size_t t) const { return x[t] - xhat[t]; }
};

struct TraceSet {
  SimConfig config;
  std::vector<RealizationTrace> runs;
  /// Ensemble means over realizations, t = 0..horizon. +inf from the step a
  /// realization diverged onward.
  std::vector<double> mean_sq_state;
  std::vector<double> mean_sq_error;
  int diverged_count = 0;
};

// Update rules shared by the in-process simulator and the networked nodes, so
// both produce bit-identical trajectories.
Vector plant_step(const LureSystem& sys, const Vector& x, bool gamma,
                  const Vector& u, const Vector& w);
Vector observer_step(const LureSystem& sys, const Matrix& L,
                     const Vector& xhat, bool gamma, const Vector& u, bool xi,
                     const Vector& y);
Vector control_law(const LoopGains& gains, LoopMode mode, const Vector& x,
                   const Vector& xhat, int m);

/// Simulates a single realization with the given channel sources. `cfg` must
/// already be resolved.
RealizationTrace simulate_realization(const LureSystem& sys,
                                      const LoopGains& gains,
                                      const SimConfig& cfg,
                                      uint64_t realization,
                                      ChannelSource& gamma_src,
                                      ChannelSource& xi_src);

/// Full seeded ensemble; realizations run in parallel.
TraceSet simulate(const LureSystem& sys, const LoopGains& gains,
                  const SimConfig& cfg);

/// Ensemble driven by explicit channel sequences, one pair per realization
/// (realization count taken from the scripts).
TraceSet simulate_scripted(const LureSystem& sys, const LoopGains& gains,
                           const SimConfig& cfg,
                           const std::vector<std::vector<uint8_t>>& gammas,
                           const std::vector<std::vector<uint8_t>>& xis);

/// Recomputes ensemble statistics from cfg and runs.
TraceSet assemble_traces(const SimConfig& cfg,
                         std::vector<RealizationTrace> runs);

/// First t with norms[s] < threshold for every s in [t, t + hold]; the whole
/// window must lie within the series. nullopt if never.
std::optional<int> decay_time(const std::vector<double>& norms,
                              double threshold, int hold);

enum class Signal { kState, kError };

/// decay_time on ||x[t]|| or ||e[t]||; nullopt for diverged realizations.
std::optional<int> decay_time(const RealizationTrace& run, Signal signal,
                              double threshold, int hold);

struct RegionCell {
  double p = 0.0;
  double q = 0.0;
  double p_margin = 0.0;
  double q_margin = 0.0;
  bool feasible = false;
};

struct StabilityRegion {
  std::vector<double> p_grid;
  std::vector<double> q_grid;
  CriticalProbability p_critical;
  CriticalProbability q_critical;
  std::vector<RegionCell> cells;  // row-major: p index major, q index minor

  const RegionCell& at(size_t ip, size_t iq) const {
    return cells[ip * q_grid.size() + iq];
  }
  size_t feasible_count() const;
};

/// Designs once (the Riccati solutions do not depend on p, q) and evaluates
/// both sufficient margins on the grid.
StabilityRegion sweep_stability_region(const LureSystem& sys, const Matrix& D1,
                                       const Matrix& D2,
                                       const std::vector<double>& p_grid,
                                       const std::vector<double>& q_grid,
                                       const DesignOptions& opts = {});

struct DecayStudyOptions {
  double threshold = 1e-3;
  int hold = 10;
  int min_realizations = 100;
};

struct DecayStats {
  double mean = 0.0;  // censored realizations count as horizon
  double stddev = 0.0;
  double ci95 = 0.0;  // half-width of the normal-approximation CI of the mean
  int censored = 0;
};

struct DecayStudyRow {
  double p = 0.0;  // q = p
  int realizations = 0;
  DecayStats state;
  DecayStats error;
};

/// For each p (with q = p) runs max(cfg.realizations, min_realizations)
/// realizations and aggregates decay times.
std::vector<DecayStudyRow> decay_time_study(const LureSystem& sys,
                                            const LoopGains& gains,
                                            const std::vector<double>& p_values,
                                            const SimConfig& cfg,
                                            const DecayStudyOptions& opts = {});

}  // namespace lurenet
