#pragma once

// Independent certificates for synthesized loops: the stochastic positive
// real inequality, sampled Lyapunov decrease on the true nonlinear update, and
// exponential fits of ensemble second moments.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lurenet/model.h"

namespace lurenet {

enum class PrlSide { kController, kObserver };

const char* to_string(PrlSide side);

struct PrlCertificate {
  Matrix P;
  Matrix R;
  Matrix gain;   // K (controller, M x N) or L (observer, N x M)
  Matrix Sigma;  // M x M
  double prob = 1.0;
  PrlSide side = PrlSide::kController;
  /// lambda_min(P - R - E[T]); -inf when P or Sigma - B'PB is not PD.
  double margin = 0.0;
  std::string diagnostic;  // empty unless margin is -inf

  bool holds() const { return margin > 0.0; }
};

/// Closed-loop matrix for a given channel state:
///   controller: A + gamma B K      observer: A - xi L C
Matrix prl_closed_loop(const LureSystem& sys, const Matrix& gain,
                       PrlSide side, bool delivered);

/// T(Acl) = Acl'P Acl + (Acl'PB - C')(Sigma - B'PB)^-1 (B'P Acl - C).
/// nullopt when Sigma - B'PB is not positive definite.
std::optional<Matrix> prl_map(const LureSystem& sys, const Matrix& Acl,
                              const Matrix& Sigma, const Matrix& P);

/// P - R - [prob T(Acl(1)) + (1 - prob) T(Acl(0))]; nullopt as above.
/// Throws DimensionMismatch.
std::optional<Matrix> prl_defect(const LureSystem& sys, const Matrix& gain,
                                 const Matrix& Sigma, const Matrix& P,
                                 const Matrix& R, double prob, PrlSide side);

/// Throws DimensionMismatch, std::invalid_argument (prob outside [0, 1]).
PrlCertificate stochastic_prl_margin(const LureSystem& sys, const Matrix& gain,
                                     const Matrix& Sigma, const Matrix& P,
                                     const Matrix& R, double prob,
                                     PrlSide side);

/// lambda_min(P - R - T(Acl)) for a single deterministic closed loop.
double deterministic_prl_margin(const LureSystem& sys, const Matrix& Acl,
                                const Matrix& Sigma, const Matrix& P,
                                const Matrix& R);

struct CertificateSearchOptions {
  double delta_min = 1e-8;
  double delta_max = 1.0;
  int points = 41;  // log-spaced, inclusive
};

struct CertificateSearch {
  PrlCertificate best;  // positive-margin certificate with the smallest |delta|,
                        // or the largest margin seen when none is positive
  double delta = 0.0;   // signed
  bool found = false;
  std::vector<double> deltas;
  std::vector<double> margins;
};

/// Tries P = P_base + delta I and P_base - delta I for |delta| on a log grid,
/// in order of increasing |delta|, skipping candidates that are not PD.
CertificateSearch search_certificate(const LureSystem& sys, const Matrix& gain,
                                     const Matrix& Sigma, const Matrix& P_base,
                                     const Matrix& R, double prob, PrlSide side,
                                     const CertificateSearchOptions& opts = {});

struct StateSampleSpec {
  int count = 10000;
  double radius = 10.0;
  /// |y| values whose neighbourhoods get extra samples. Empty selects the
  /// nonzero breakpoint magnitudes of phi.
  std::vector<double> shells;
  double shell_fraction = 0.2;
  double shell_jitter = 1e-3;
  uint64_t seed = 1;
  unsigned threads = 0;
};

/// Deterministic sample of nonzero states: uniform in the ball plus points
/// with one output channel placed near +-shell.
std::vector<Vector> sample_states(const LureSystem& sys,
                                  const StateSampleSpec& spec);

struct DecreaseResult {
  /// max over samples of (E[V(next)] - V) / |z|^2; decrease holds when < 0.
  double worst_ratio = 0.0;
  int violations = 0;  // samples with ratio >= 0
  int samples = 0;
  Vector worst_state;
};

/// V(x) = x'Px on x+ = A x - B phi(Cx) + gamma B K x, exact expectation over
/// gamma ~ B(p). Throws DimensionMismatch.
DecreaseResult lyapunov_decrease_state(const LureSystem& sys, const Matrix& K,
                                       const Matrix& P, double p,
                                       const StateSampleSpec& spec = {});

/// V(e) = e'P_e e on e+ = (A - xi L C) e - B (phi(Cx) - phi(C(x - e))), exact
/// expectation over xi ~ B(q). States x and errors e are sampled
/// independently; the ratio is normalized by |e|^2.
DecreaseResult lyapunov_decrease_error(const LureSystem& sys, const Matrix& L,
                                       const Matrix& P_e, double q,
                                       const StateSampleSpec& spec = {});

/// V = x'P x + e'P_e e for the observer-based loop (u = K xhat), expectation
/// over the four (gamma, xi) outcomes, normalized by |x|^2 + |e|^2.
DecreaseResult lyapunov_decrease_output(const LureSystem& sys, const Matrix& K,
                                        const Matrix& L, const Matrix& P,
                                        const Matrix& P_e, double p, double q,
                                        const StateSampleSpec& spec = {});

struct DecayEstimate {
  double beta_hat = 1.0;
  double M_hat = 0.0;
  double r2 = 0.0;
  bool degenerate = false;  // some value was clamped at 1e-300
  size_t begin = 0;
  size_t end = 0;
};

/// [0, first t where series[t] < 1e-250 or is not finite).
std::pair<size_t, size_t> decaying_window(const std::vector<double>& series);

/// Least squares on log(series[t]) = log M + t log beta over [begin, end).
/// Throws std::invalid_argument for windows with fewer than two points or
/// non-finite / negative values.
DecayEstimate fit_decay(const std::vector<double>& series, size_t begin,
                        size_t end);
DecayEstimate fit_decay(const std::vector<double>& series);

}  // namespace lurenet
