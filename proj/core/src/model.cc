#include "lurenet/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lurenet/errors.h"

namespace lurenet {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

int numeric_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-12);
  return static_cast<int>(qr.rank());
}

std::vector<double> sample_line(const Nonlinearity& nl,
                                const SectorGrid& grid) {
  double half = grid.half_width;
  if (half <= 0.0) {
    double max_abs = 0.0;
    for (const auto& ch : nl.channels)
      for (double b : ch.breakpoints()) max_abs = std::max(max_abs, std::abs(b));
    half = 2.0 * max_abs + 10.0;
  }
  std::vector<double> ys;
  const int n = std::max(grid.points, 2);
  ys.reserve(static_cast<size_t>(n) + 64);
  for (int i = 0; i < n; ++i) {
    ys.push_back(-half + 2.0 * half * static_cast<double>(i) / (n - 1));
  }
  for (const auto& ch : nl.channels) {
    for (double b : ch.breakpoints()) {
      ys.push_back(b);
      ys.push_back(b - grid.breakpoint_offset);
      ys.push_back(b + grid.breakpoint_offset);
    }
  }
  // Points close to the origin probe the slope of the central segment.
  for (double s : {1e-6, 1e-3}) {
    ys.push_back(s);
    ys.push_back(-s);
  }
  std::erase_if(ys, [](double y) { return y == 0.0; });
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  return ys;
}

// Vector samples for the sector checks. For a single channel these are the
// scalar line samples; for M > 1 we add axis-aligned, diagonal and random
// vectors drawn from the line samples.
std::vector<Vector> sample_vectors(const Nonlinearity& nl,
                                   const SectorGrid& grid) {
  const std::vector<double> line = sample_line(nl, grid);
  const int m = nl.dim();
  std::vector<Vector> out;
  if (m == 1) {
    out.reserve(line.size());
    for (double y : line) out.push_back(Vector::Constant(1, y));
    return out;
  }
  for (int axis = 0; axis < m; ++axis) {
    for (double y : line) {
      Vector v = Vector::Zero(m);
      v(axis) = y;
      out.push_back(std::move(v));
    }
  }
  for (double y : line) out.push_back(Vector::Constant(m, y));
  std::mt19937_64 rng(grid.seed);
  std::uniform_int_distribution<size_t> pick(0, line.size() - 1);
  for (int k = 0; k < grid.random_vectors; ++k) {
    Vector v(m);
    for (int i = 0; i < m; ++i) v(i) = line[pick(rng)];
    out.push_back(std::move(v));
  }
  return out;
}

void require_square(const Matrix& D, int m, const char* name) {
  if (D.rows() != m || D.cols() != m) {
    std::ostringstream os;
    os << name << " must be " << m << "x" << m << ", got " << D.rows() << "x"
       << D.cols();
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

PiecewiseLinearMap::PiecewiseLinearMap(std::vector<double> breakpoints,
                                       std::vector<double> slopes)
    : breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)) {
  if (slopes_.size() != breakpoints_.size() + 1) {
    throw std::invalid_argument(
        "PiecewiseLinearMap: need exactly one slope per segment "
        "(breakpoints + 1)");
  }
  for (size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!std::isfinite(breakpoints_[i])) {
      throw std::invalid_argument("PiecewiseLinearMap: non-finite breakpoint");
    }
    if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1])) {
      throw std::invalid_argument(
          "PiecewiseLinearMap: breakpoints must be strictly increasing");
    }
  }
  for (double s : slopes_) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("PiecewiseLinearMap: non-finite slope");
    }
  }

  // Integrate outward from the origin. `zero_seg` is the segment holding 0;
  // breakpoints to its right accumulate left-to-right and those to its left
  // accumulate right-to-left, so every knot value is exact relative to 0.
  knot_values_.assign(breakpoints_.size(), 0.0);
  const int zero_seg = segment_of(0.0);
  double prev_x = 0.0;
  double prev_v = 0.0;
  for (size_t i = static_cast<size_t>(zero_seg); i < breakpoints_.size(); ++i) {
    // Segment i lies left of breakpoint i.
    prev_v += slopes_[i] * (breakpoints_[i] - prev_x);
    prev_x = breakpoints_[i];
    knot_values_[i] = prev_v;
  }
  prev_x = 0.0;
  prev_v = 0.0;
  for (int i = zero_seg - 1; i >= 0; --i) {
    // Segment i + 1 lies right of breakpoint i.
    prev_v -= slopes_[static_cast<size_t>(i) + 1] *
              (prev_x - breakpoints_[static_cast<size_t>(i)]);
    prev_x = breakpoints_[static_cast<size_t>(i)];
    knot_values_[static_cast<size_t>(i)] = prev_v;
  }
}

PiecewiseLinearMap PiecewiseLinearMap::Linear(double slope) {
  return PiecewiseLinearMap({}, {slope});
}

int PiecewiseLinearMap::segment_of(double y) const {
  // Segment i covers [breakpoints_[i-1], breakpoints_[i]).
  return static_cast<int>(
      std::upper_bound(breakpoints_.begin(), breakpoints_.end(), y) -
      breakpoints_.begin());
}

double PiecewiseLinearMap::operator()(double y) const {
  const int seg = segment_of(y);
  const int zero_seg = segment_of(0.0);
  const double s = slopes_[static_cast<size_t>(seg)];
  if (seg == zero_seg) return s * y;
  if (seg > zero_seg) {
    // Anchor at the left end of the segment.
    const size_t k = static_cast<size_t>(seg) - 1;
    return knot_values_[k] + s * (y - breakpoints_[k]);
  }
  // Anchor at the right end of the segment.
  const size_t k = static_cast<size_t>(seg);
  return knot_values_[k] + s * (y - breakpoints_[k]);
}

double PiecewiseLinearMap::slope_at(double y) const {
  return slopes_[static_cast<size_t>(segment_of(y))];
}

ChannelModel ChannelModel::Bernoulli(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("Bernoulli channel requires 0 < p < 1");
  }
  return ChannelModel(BernoulliChannel{p});
}

ChannelModel ChannelModel::General(double mu, double sigma2) {
  if (!std::isfinite(mu) || !std::isfinite(sigma2) || !(sigma2 > 0.0)) {
    throw std::invalid_argument(
        "General channel requires finite mu and sigma2 > 0");
  }
  return ChannelModel(GeneralChannel{mu, sigma2});
}

double ChannelModel::mean() const {
  if (const auto* b = std::get_if<BernoulliChannel>(&v_)) return b->p;
  return std::get<GeneralChannel>(v_).mu;
}

double ChannelModel::variance() const {
  if (const auto* b = std::get_if<BernoulliChannel>(&v_)) {
    return b->p * (1.0 - b->p);
  }
  return std::get<GeneralChannel>(v_).sigma2;
}

double qos(const ChannelModel& ch) {
  if (const auto* b = std::get_if<BernoulliChannel>(&ch.variant())) {
    return b->p / (1.0 - b->p);
  }
  const auto& g = std::get<GeneralChannel>(ch.variant());
  return g.mu * g.mu / g.sigma2;
}

ValidationReport validate_system(const LureSystem& sys) {
  ValidationReport report;
  auto& v = report.violations;
  const auto n = sys.A.rows();
  const auto m = sys.B.cols();

  if (n == 0 || sys.A.cols() != n) v.push_back("A is not a non-empty square matrix");
  if (sys.B.rows() != n) v.push_back("B row count does not match A");
  if (sys.C.cols() != n) v.push_back("C column count does not match A");
  if (sys.C.rows() != m) v.push_back("C row count does not match B column count");
  if (sys.phi.dim() != m) {
    v.push_back("phi channel count does not match the output dimension");
  }
  if (!all_finite(sys.A) || !all_finite(sys.B) || !all_finite(sys.C)) {
    v.push_back("system matrices contain non-finite entries");
  }
  if (m == 0 || numeric_rank(sys.B) < m) v.push_back("B not full column rank");
  if (sys.C.rows() == 0 || numeric_rank(sys.C) < sys.C.rows()) {
    v.push_back("C not full row rank");
  }

  constexpr double kEps = 1e-9;
  for (int c = 0; c < sys.phi.dim(); ++c) {
    const auto& ch = sys.phi.channels[static_cast<size_t>(c)];
    const std::string tag = "phi channel " + std::to_string(c) + ": ";
    for (size_t i = 0; i < ch.slopes().size(); ++i) {
      if (ch.slopes()[i] < 0.0) {
        v.push_back(tag + "non-monotone segment " + std::to_string(i) +
                    " (slope " + std::to_string(ch.slopes()[i]) + ")");
      }
    }
    for (double b : ch.breakpoints()) {
      const double left = ch(b - kEps);
      const double right = ch(b + kEps);
      const double tol = 1e-6 * (1.0 + std::abs(ch(b)));
      if (std::abs(left - right) > tol) {
        v.push_back(tag + "discontinuity at breakpoint " + std::to_string(b));
      }
    }
    if (ch(0.0) != 0.0) v.push_back(tag + "phi(0) != 0");
  }
  return report;
}

Vector eval_phi(const Nonlinearity& nl, const Vector& y) {
  if (y.size() != nl.dim()) {
    throw DimensionMismatch("eval_phi: y has " + std::to_string(y.size()) +
                            " entries, phi has " + std::to_string(nl.dim()) +
                            " channels");
  }
  Vector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out(i) = nl.channels[static_cast<size_t>(i)](y(i));
  }
  return out;
}

SectorConstants sector_constants(const PiecewiseLinearMap& map) {
  const auto& s = map.slopes();
  const auto& b = map.breakpoints();
  SectorConstants out{*std::max_element(s.begin(), s.end()),
                      -std::numeric_limits<double>::infinity()};
  // Terminal slopes are the limits of phi(y)/y as |y| -> infinity.
  out.max_gain = std::max(s.front(), s.back());
  // Near the origin the ratio equals the slope(s) of the adjoining segment(s).
  out.max_gain = std::max(out.max_gain, map.slope_at(0.0));
  for (size_t i = 0; i < b.size(); ++i) {
    if (b[i] == 0.0) {
      out.max_gain = std::max({out.max_gain, s[i], s[i + 1]});
      continue;
    }
    out.max_gain = std::max(out.max_gain, map(b[i]) / b[i]);
  }
  return out;
}

SectorConstants sector_constants(const Nonlinearity& nl) {
  if (nl.channels.empty()) throw DimensionMismatch("empty nonlinearity");
  SectorConstants out = sector_constants(nl.channels.front());
  for (size_t i = 1; i < nl.channels.size(); ++i) {
    const auto c = sector_constants(nl.channels[i]);
    out.lipschitz = std::max(out.lipschitz, c.lipschitz);
    out.max_gain = std::max(out.max_gain, c.max_gain);
  }
  return out;
}

SectorCheck check_sector_condition(const Nonlinearity& nl, const Matrix& D1,
                                   const SectorGrid& grid) {
  require_square(D1, nl.dim(), "D1");
  SectorCheck out{true, std::numeric_limits<double>::infinity(), Vector()};
  for (const Vector& y : sample_vectors(nl, grid)) {
    const Vector f = eval_phi(nl, y);
    const double form = f.dot(y - D1 * f);
    if (form < out.worst_margin) {
      out.worst_margin = form;
      out.worst_y = y;
    }
  }
  out.ok = out.worst_margin > 0.0;
  return out;
}

SectorCheck check_incremental_sector(const Nonlinearity& nl, const Matrix& D2,
                                     const SectorGrid& grid) {
  require_square(D2, nl.dim(), "D2");
  std::vector<Vector> ys = sample_vectors(nl, grid);
  ys.push_back(Vector::Zero(nl.dim()));
  std::vector<Vector> fs;
  fs.reserve(ys.size());
  for (const Vector& y : ys) fs.push_back(eval_phi(nl, y));

  SectorCheck out{true, std::numeric_limits<double>::infinity(), Vector()};
  for (size_t i = 0; i < ys.size(); ++i) {
    for (size_t j = i + 1; j < ys.size(); ++j) {
      const Vector dy = ys[i] - ys[j];
      if (dy.isZero(0.0)) continue;
      const Vector df = fs[i] - fs[j];
      const double form = df.dot(dy - D2 * df);
      if (form < out.worst_margin) {
        out.worst_margin = form;
        out.worst_y = ys[i];
      }
    }
  }
  out.ok = out.worst_margin > 0.0;
  return out;
}

SectorCheck check_sector(const Nonlinearity& nl, const SectorBounds& bounds,
                         const SectorGrid& grid) {
  SectorCheck a = check_sector_condition(nl, bounds.D1, grid);
  SectorCheck b = check_incremental_sector(nl, bounds.D2, grid);
  if (b.worst_margin < a.worst_margin) {
    a.worst_margin = b.worst_margin;
    a.worst_y = b.worst_y;
  }
  a.ok = a.ok && b.ok;
  return a;
}

LureSystem chaotic_lure_system() {
  LureSystem sys;
  sys.A.resize(3, 3);
  sys.A << 0.0, 1.0, 0.0,
           0.0, 0.0, 1.0,
           4.6, -3.5, -1.0;
  sys.B = Matrix::Zero(3, 1);
  sys.B(0, 0) = 1.0;
  sys.C = sys.B.transpose();
  sys.phi.channels.emplace_back(std::vector<double>{-3.0, -1.0, 1.0, 3.0},
                                std::vector<double>{4.6, 13.6, 0.1, 13.6, 4.6});
  return sys;
}

LureSystem stabilizable_demo_system() {
  LureSystem sys;
  sys.A.resize(2, 2);
  sys.A << 1.1, 0.5,
           -0.2, 1.05;
  sys.B.resize(2, 1);
  sys.B << 1.0, 0.0;
  sys.C.resize(1, 2);
  sys.C << 0.3, 0.2;
  sys.phi.channels.emplace_back(std::vector<double>{-1.0, 1.0},
                                std::vector<double>{0.6, 0.2, 0.6});
  return sys;
}

}  // namespace lurenet
