#pragma once

// Domain types for discrete-time Lure plants over erasure channels:
//
//   x[t+1] = A x[t] - B phi(C x[t]) + B gamma[t] u[t]
//
// with phi a decoupled, per-channel, continuous piecewise-linear map.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace lurenet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Scalar continuous piecewise-linear map anchored at phi(0) = 0.
///
/// `breakpoints` partitions the real line into breakpoints.size() + 1
/// segments; `slopes[i]` is the slope on segment i, ordered left to right.
/// Values are obtained by integrating the slope from 0, so the map is
/// continuous and passes through the origin by construction.
class PiecewiseLinearMap {
 public:
  /// Throws std::invalid_argument if breakpoints are not strictly increasing
  /// and finite, or if slopes.size() != breakpoints.size() + 1. Negative
  /// slopes are accepted here and reported by validate_system().
  PiecewiseLinearMap(std::vector<double> breakpoints,
                     std::vector<double> slopes);

  /// phi(y) = slope * y.
  static PiecewiseLinearMap Linear(double slope);

  double operator()(double y) const;

  /// Slope of the segment containing y (right derivative at breakpoints).
  double slope_at(double y) const;

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& slopes() const { return slopes_; }
  int num_segments() const { return static_cast<int>(slopes_.size()); }

  bool operator==(const PiecewiseLinearMap&) const = default;

 private:
  int segment_of(double y) const;

  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
  std::vector<double> knot_values_;  // phi(breakpoints_[i])
};

/// Decoupled nonlinearity: channel i acts on output component i only.
struct Nonlinearity {
  std::vector<PiecewiseLinearMap> channels;

  int dim() const { return static_cast<int>(channels.size()); }
};

struct LureSystem {
  Matrix A;  // N x N
  Matrix B;  // N x M
  Matrix C;  // M x N
  Nonlinearity phi;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

struct SectorBounds {
  Matrix D1;  // bound for phi(y)'(y - D1 phi(y)) > 0
  Matrix D2;  // bound for the incremental condition
};

struct BernoulliChannel {
  double p;  // delivery probability
};

/// i.i.d. multiplicative uncertainty with mean mu and variance sigma2.
struct GeneralChannel {
  double mu;
  double sigma2;
};

class ChannelModel {
 public:
  using Variant = std::variant<BernoulliChannel, GeneralChannel>;

  /// Throws std::invalid_argument unless 0 < p < 1.
  static ChannelModel Bernoulli(double p);
  /// Throws std::invalid_argument unless sigma2 > 0 and both are finite.
  static ChannelModel General(double mu, double sigma2);

  bool is_bernoulli() const {
    return std::holds_alternative<BernoulliChannel>(v_);
  }
  const Variant& variant() const { return v_; }

  /// E[gamma] and Var[gamma].
  double mean() const;
  double variance() const;

 private:
  explicit ChannelModel(Variant v) : v_(v) {}
  Variant v_;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Structural checks. Violations are returned as data and never thrown.
ValidationReport validate_system(const LureSystem& sys);

/// Applies phi channel-wise. Throws DimensionMismatch if y.size() differs from
/// the number of channels.
Vector eval_phi(const Nonlinearity& nl, const Vector& y);

struct SectorConstants {
  double lipschitz;  // max slope
  double max_gain;   // sup_{y != 0} phi(y) / y
};

/// Exact for piecewise-linear maps: the chord ratio phi(y)/y is monotone on
/// every segment that does not contain 0, so its supremum is attained at a
/// breakpoint or approached along a terminal slope. For multiple channels the
/// maximum over channels is returned.
SectorConstants sector_constants(const PiecewiseLinearMap& map);
SectorConstants sector_constants(const Nonlinearity& nl);

struct SectorGrid {
  /// Samples cover [-half_width, half_width]. 0 selects
  /// 2 * max|breakpoint| + 10.
  double half_width = 0.0;
  int points = 2001;
  /// Offsets placed on both sides of every breakpoint.
  double breakpoint_offset = 1e-6;
  /// Extra random vector samples for M > 1.
  int random_vectors = 2000;
  uint64_t seed = 0x5eedu;
};

struct SectorCheck {
  bool ok;
  double worst_margin;      // min of the quadratic form over the sample
  Vector worst_y;           // argmin (first argument for incremental pairs)
};

/// phi(y)'(y - D1 phi(y)) > 0 over sampled y != 0.
SectorCheck check_sector_condition(const Nonlinearity& nl, const Matrix& D1,
                                   const SectorGrid& grid = {});

/// (phi(y1)-phi(y2))'((y1-y2) - D2 (phi(y1)-phi(y2))) > 0 over sampled pairs.
SectorCheck check_incremental_sector(const Nonlinearity& nl, const Matrix& D2,
                                     const SectorGrid& grid = {});

/// Both conditions; worst_margin is the smaller of the two.
SectorCheck check_sector(const Nonlinearity& nl, const SectorBounds& bounds,
                         const SectorGrid& grid = {});

/// Quality of service: p/(1-p) for Bernoulli(p), mu^2/sigma2 otherwise.
double qos(const ChannelModel& ch);

/// Three-state plant whose open loop evolves on a chaotic attractor:
/// companion-form A with last row [4.6, -3.5, -1], B = C' = e1 and an odd phi
/// with slopes 0.1 (|y| < 1), 13.6 (1 < |y| < 3) and 4.6 beyond.
LureSystem chaotic_lure_system();

/// Two-state plant with an unstable linear part and a mild saturation-like phi
/// (slope 0.2 for |y| < 1, 0.6 beyond). Unlike the chaotic plant it admits
/// feasible designs, which makes it the workhorse of the regression tests.
LureSystem stabilizable_demo_system();

}  // namespace lurenet
