#pragma once

// File formats. JSON for structured results, CSV for series and grids; CSV
// floats are printed with 17 significant digits, JSON floats with the
// shortest representation that round-trips (non-finite values become null).

#include <optional>
#include <string>
#include <vector>

#include "lurenet/model.h"
#include "lurenet/sim.h"
#include "lurenet/synthesis.h"
#include "lurenet/verify.h"

namespace lurenet {

/// Throws ParseError (unreadable file included).
std::string read_file(const std::string& path);
/// Throws Error.
void write_file(const std::string& path, const std::string& content);

/// "%.17g".
std::string format_double(double v);

/// {"A": [[..]], "B": [[..]], "C": [[..]],
///  "phi": {"channels": [{"breakpoints": [..], "slopes": [..]}]}}
/// Structural validation runs on load; violations raise ParseError.
LureSystem parse_system_json(const std::string& text);
LureSystem load_system(const std::string& path);
std::string system_to_json(const LureSystem& sys);

/// Reads "K" and (optionally) "L" from a synthesis document.
LoopGains parse_gains_json(const std::string& text);
LoopGains load_gains(const std::string& path);

/// Gains plus the Riccati data a verifier needs, read back from a
/// synthesis document.
struct SynthesisRecord {
  LoopGains gains;
  Matrix P_star;
  Matrix Q_star;
  Matrix Sigma1;
  Matrix Sigma2;
  double p = 0.0;
  double q = 0.0;
};

SynthesisRecord parse_synthesis_json(const std::string& text);
SynthesisRecord load_synthesis(const std::string& path);

/// Parses a JSON matrix (array of rows, or a bare number for 1x1).
Matrix parse_matrix_json(const std::string& text);

std::string synthesis_to_json(const OutputFeedbackController& c,
                              const Matrix& D1, const Matrix& D2,
                              const ChannelModel& input,
                              const ChannelModel& output);

struct CertificateEntry {
  std::string name;
  PrlCertificate certificate;
  std::optional<double> delta;  // set when found by search_certificate
};

struct DecreaseEntry {
  std::string name;
  double p = 0.0;
  double q = 0.0;
  DecreaseResult result;
};

std::string certificates_to_json(const std::vector<CertificateEntry>& certs,
                                 const std::vector<DecreaseEntry>& decreases);

/// t,realization,x_sqnorm,e_sqnorm,gamma,xi; gamma/xi empty on the last row
/// of each realization.
std::string trace_csv(const TraceSet& traces);

/// Config echo, ensemble means and decay fits.
std::string trace_summary_json(const TraceSet& traces,
                               const DecayEstimate& state_fit,
                               const DecayEstimate& error_fit);

std::string calibration_csv(const CalibrationResult& result);
std::string calibration_summary_json(const CalibrationResult& result);
std::string region_csv(const StabilityRegion& region);
std::string decay_study_csv(const std::vector<DecayStudyRow>& rows);

}  // namespace lurenet
