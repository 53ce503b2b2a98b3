#pragma once

#include <string>
#include <vector>

#include "lurenet/model.h"

namespace lurenet::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNegative = 2;  // infeasible / uncertified / diverged

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> outputs;  // file names relative to out_dir
  std::vector<uint64_t> seeds;
};

struct SynthArgs {
  std::string system;
  std::string d1;
  std::string d2;  // empty -> d1
  double p = 0.5;
  double q = 0.5;
  double mu = 0.0;
  double sigma2 = 0.0;  // > 0 selects the general input channel
};

struct CalibrateArgs {
  std::string system;
  int points = 2000;
  double target = 0.3441;
  double tolerance = 0.002;
};

struct SimulateArgs {
  std::string system;
  std::string gains;
  std::string mode = "output_feedback";
  double p = 0.35;
  double q = 0.35;
  int horizon = 200;
  int realizations = 50;
  uint64_t seed = 1;
  double noise = 0.0;
  std::string x0;
  std::string xhat0;
  unsigned threads = 0;
};

struct SweepArgs {
  std::string system;
  std::string d1;
  std::string d2;
  std::string p_grid = "0.01:0.99:99";
  std::string q_grid = "0.01:0.99:99";
};

struct DecayStudyArgs {
  std::string system;
  std::string gains;
  std::string p_values = "0.15,0.2,0.25,0.3,0.35,0.4,0.5,0.7,1";
  int horizon = 2000;
  int realizations = 100;
  uint64_t seed = 1;
  double noise = 0.0;
  double threshold = 1e-3;
  int hold = 10;
  std::string x0;
  unsigned threads = 0;
};

struct VerifyArgs {
  std::string system;
  std::string synthesis;
  double p = -1.0;  // < 0 -> value stored in the synthesis file
  double q = -1.0;
  double epsilon = 1e-6;
  int samples = 10000;
  uint64_t seed = 1;
  unsigned threads = 0;
};

struct NetDemoArgs {
  std::string role = "both";  // plant | controller | both
  std::string transport = "tcp";  // tcp | memory (memory needs role both)
  std::string endpoint = "127.0.0.1:47001";
  std::string system;
  std::string gains;
  double p = 0.35;
  double q = 0.35;
  int horizon = 200;
  int realizations = 1;
  uint64_t seed = 1;
  double noise = 0.0;
  std::string x0;
  int timeout_ms = 5000;
};

CommandResult cmd_synth(const SynthArgs& a, const std::string& out_dir);
CommandResult cmd_calibrate(const CalibrateArgs& a, const std::string& out_dir);
CommandResult cmd_simulate(const SimulateArgs& a, const std::string& out_dir);
CommandResult cmd_sweep(const SweepArgs& a, const std::string& out_dir);
CommandResult cmd_decay_study(const DecayStudyArgs& a,
                              const std::string& out_dir);
CommandResult cmd_verify(const VerifyArgs& a, const std::string& out_dir);
CommandResult cmd_net_demo(const NetDemoArgs& a, const std::string& out_dir);

// Argument helpers, exposed for tests.

/// "lo:hi:n" (inclusive, n >= 2) or a comma-separated list.
std::vector<double> parse_grid(const std::string& text);
/// Scalar d -> d I (m x m), otherwise a JSON matrix.
Matrix parse_sector_arg(const std::string& text, int m);
/// JSON array or comma list; empty text -> empty vector.
Vector parse_vector_arg(const std::string& text);

}  // namespace lurenet::cli
