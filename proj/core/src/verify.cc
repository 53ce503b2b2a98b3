#include "lurenet/verify.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

#include "lurenet/errors.h"
#include "lurenet/parallel.h"
#include "lurenet/rng.h"

namespace lurenet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void check_square(const Matrix& m, int n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionMismatch(std::string(name) + " must be " +
                            std::to_string(n) + "x" + std::to_string(n));
  }
}

void check_gain(const LureSystem& sys, const Matrix& gain, PrlSide side) {
  const int n = sys.n();
  const int m = sys.m();
  const bool ok = side == PrlSide::kController
                      ? gain.rows() == m && gain.cols() == n
                      : gain.rows() == n && gain.cols() == m;
  if (!ok) {
    throw DimensionMismatch(side == PrlSide::kController
                                ? "K must be M x N"
                                : "L must be N x M");
  }
}

void check_prob(double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw std::invalid_argument("probability must lie in [0, 1]");
  }
}

double quad(const Matrix& P, const Vector& v) { return v.dot(P * v); }

// Min over per-sample ratios in index order.
DecreaseResult reduce(const std::vector<Vector>& samples,
                      const std::vector<double>& ratios) {
  DecreaseResult r;
  r.samples = static_cast<int>(ratios.size());
  r.worst_ratio = kNegInf;
  for (size_t i = 0; i < ratios.size(); ++i) {
    if (ratios[i] >= 0.0 || std::isnan(ratios[i])) ++r.violations;
    if (ratios[i] > r.worst_ratio || std::isnan(ratios[i])) {
      r.worst_ratio = ratios[i];
      r.worst_state = samples[i];
      if (std::isnan(ratios[i])) break;
    }
  }
  return r;
}

Vector uniform_ball(SplitMix64& rng, int dim, double radius) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    norm = v.norm();
  } while (norm == 0.0);
  const double r = radius * std::pow(rng.uniform(), 1.0 / dim);
  return v * (r / norm);
}

}  // namespace

const char* to_string(PrlSide side) {
  return side == PrlSide::kController ? "controller" : "observer";
}

Matrix prl_closed_loop(const LureSystem& sys, const Matrix& gain,
                       PrlSide side, bool delivered) {
  check_gain(sys, gain, side);
  if (!delivered) return sys.A;
  if (side == PrlSide::kController) return sys.A + sys.B * gain;
  return sys.A - gain * sys.C;
}

std::optional<Matrix> prl_map(const LureSystem& sys, const Matrix& Acl,
                              const Matrix& Sigma, const Matrix& P) {
  const int n = sys.n();
  check_square(Acl, n, "closed-loop matrix");
  check_square(P, n, "P");
  check_square(Sigma, sys.m(), "Sigma");
  const Matrix PB = P * sys.B;
  const Matrix W = symmetrize(Sigma - sys.B.transpose() * PB);
  Eigen::LLT<Matrix> llt(W);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Matrix cross = PB.transpose() * Acl - sys.C;  // B'P Acl - C
  return symmetrize(Acl.transpose() * P * Acl +
                    cross.transpose() * llt.solve(cross));
}

std::optional<Matrix> prl_defect(const LureSystem& sys, const Matrix& gain,
                                 const Matrix& Sigma, const Matrix& P,
                                 const Matrix& R, double prob, PrlSide side) {
  check_prob(prob);
  check_square(R, sys.n(), "R");
  const auto t1 = prl_map(sys, prl_closed_loop(sys, gain, side, true), Sigma, P);
  const auto t0 =
      prl_map(sys, prl_closed_loop(sys, gain, side, false), Sigma, P);
  if (!t1 || !t0) return std::nullopt;
  return Matrix(P - R - (prob * *t1 + (1.0 - prob) * *t0));
}

PrlCertificate stochastic_prl_margin(const LureSystem& sys, const Matrix& gain,
                                     const Matrix& Sigma, const Matrix& P,
                                     const Matrix& R, double prob,
                                     PrlSide side) {
  PrlCertificate c{P, R, gain, Sigma, prob, side, 0.0, {}};
  Eigen::LLT<Matrix> llt(symmetrize(P));
  if (llt.info() != Eigen::Success) {
    c.margin = kNegInf;
    c.diagnostic = "P is not positive definite";
    return c;
  }
  const auto defect = prl_defect(sys, gain, Sigma, P, R, prob, side);
  if (!defect) {
    c.margin = kNegInf;
    c.diagnostic = "Sigma - B'PB is not positive definite";
    return c;
  }
  c.margin = min_eigenvalue(*defect);
  return c;
}

double deterministic_prl_margin(const LureSystem& sys, const Matrix& Acl,
                                const Matrix& Sigma, const Matrix& P,
                                const Matrix& R) {
  check_square(R, sys.n(), "R");
  const auto t = prl_map(sys, Acl, Sigma, P);
  if (!t) return kNegInf;
  return min_eigenvalue(P - R - *t);
}

CertificateSearch search_certificate(const LureSystem& sys, const Matrix& gain,
                                     const Matrix& Sigma, const Matrix& P_base,
                                     const Matrix& R, double prob, PrlSide side,
                                     const CertificateSearchOptions& opts) {
  if (!(opts.delta_min > 0.0) || !(opts.delta_max >= opts.delta_min) ||
      opts.points < 1) {
    throw std::invalid_argument("bad certificate search grid");
  }
  check_square(P_base, sys.n(), "P");
  CertificateSearch out;
  const Matrix I = Matrix::Identity(sys.n(), sys.n());
  const double lo = std::log10(opts.delta_min);
  const double hi = std::log10(opts.delta_max);
  bool have_best = false;
  for (int i = 0; i < opts.points; ++i) {
    const double mag =
        opts.points == 1
            ? opts.delta_min
            : std::pow(10.0, lo + (hi - lo) * i / (opts.points - 1));
    for (double delta : {mag, -mag}) {
      const Matrix P = P_base + delta * I;
      PrlCertificate c = stochastic_prl_margin(sys, gain, Sigma, P, R, prob,
                                               side);
      out.deltas.push_back(delta);
      out.margins.push_back(c.margin);
      if (out.found) continue;
      if (c.holds() || !have_best || c.margin > out.best.margin) {
        out.best = std::move(c);
        out.delta = delta;
        have_best = true;
        out.found = out.best.holds();
      }
    }
  }
  return out;
}

std::vector<Vector> sample_states(const LureSystem& sys,
                                  const StateSampleSpec& spec) {
  if (spec.count < 1 || !(spec.radius > 0.0)) {
    throw std::invalid_argument("sample count and radius must be positive");
  }
  std::vector<double> shells = spec.shells;
  if (shells.empty()) {
    std::set<double> mags;
    for (const auto& ch : sys.phi.channels) {
      for (double b : ch.breakpoints()) {
        if (b != 0.0) mags.insert(std::abs(b));
      }
    }
    shells.assign(mags.begin(), mags.end());
  }
  const int n = sys.n();
  const int m = sys.m();
  const int n_shell =
      shells.empty()
          ? 0
          : static_cast<int>(std::lround(spec.count * spec.shell_fraction));
  // Minimum-norm correction that moves one output channel onto a shell.
  const Matrix pinv =
      sys.C.transpose() * (sys.C * sys.C.transpose()).inverse();

  std::vector<Vector> out(static_cast<size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    SplitMix64 rng = derive_stream(spec.seed, static_cast<uint64_t>(i),
                                   StreamId::kSampling);
    Vector x = uniform_ball(rng, n, spec.radius);
    if (i < n_shell) {
      const double level = shells[static_cast<size_t>(i) % shells.size()];
      const int ch = static_cast<int>(rng() % static_cast<uint64_t>(m));
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double jitter = spec.shell_jitter * (2.0 * rng.uniform() - 1.0);
      Vector dy = Vector::Zero(m);
      dy(ch) = sign * level * (1.0 + jitter) - (sys.C * x)(ch);
      x += pinv * dy;
      if (x.norm() == 0.0) x = uniform_ball(rng, n, spec.radius);
    }
    out[static_cast<size_t>(i)] = std::move(x);
  }
  return out;
}

DecreaseResult lyapunov_decrease_state(const LureSystem& sys, const Matrix& K,
                                       const Matrix& P, double p,
                                       const StateSampleSpec& spec) {
  check_gain(sys, K, PrlSide::kController);
  check_square(P, sys.n(), "P");
  check_prob(p);
  const std::vector<Vector> xs = sample_states(sys, spec);
  std::vector<double> ratios(xs.size());
  parallel_for(xs.size(), spec.threads, [&](size_t i) {
    const Vector& x = xs[i];
    const Vector drift = sys.A * x - sys.B * eval_phi(sys.phi, sys.C * x);
    const Vector push = sys.B * (K * x);
    const double ev = p * quad(P, drift + push) + (1.0 - p) * quad(P, drift);
    ratios[i] = (ev - quad(P, x)) / x.squaredNorm();
  });
  return reduce(xs, ratios);
}

DecreaseResult lyapunov_decrease_error(const LureSystem& sys, const Matrix& L,
                                       const Matrix& P_e, double q,
                                       const StateSampleSpec& spec) {
  check_gain(sys, L, PrlSide::kObserver);
  check_square(P_e, sys.n(), "P_e");
  check_prob(q);
  const std::vector<Vector> xs = sample_states(sys, spec);
  StateSampleSpec espec = spec;
  espec.seed = mix64(spec.seed ^ 0xe7ULL);
  const std::vector<Vector> es = sample_states(sys, espec);
  std::vector<double> ratios(xs.size());
  parallel_for(xs.size(), spec.threads, [&](size_t i) {
    const Vector& x = xs[i];
    const Vector& e = es[i];
    const Vector psi =
        eval_phi(sys.phi, sys.C * x) - eval_phi(sys.phi, sys.C * (x - e));
    const Vector open = sys.A * e - sys.B * psi;
    const Vector corr = L * (sys.C * e);
    const double ev = q * quad(P_e, open - corr) + (1.0 - q) * quad(P_e, open);
    ratios[i] = (ev - quad(P_e, e)) / e.squaredNorm();
  });
  std::vector<Vector> stacked(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    stacked[i] = Vector(2 * sys.n());
    stacked[i] << xs[i], es[i];
  }
  return reduce(stacked, ratios);
}

DecreaseResult lyapunov_decrease_output(const LureSystem& sys, const Matrix& K,
                                        const Matrix& L, const Matrix& P,
                                        const Matrix& P_e, double p, double q,
                                        const StateSampleSpec& spec) {
  check_gain(sys, K, PrlSide::kController);
  check_gain(sys, L, PrlSide::kObserver);
  check_square(P, sys.n(), "P");
  check_square(P_e, sys.n(), "P_e");
  check_prob(p);
  check_prob(q);
  const std::vector<Vector> xs = sample_states(sys, spec);
  StateSampleSpec espec = spec;
  espec.seed = mix64(spec.seed ^ 0xe7ULL);
  const std::vector<Vector> es = sample_states(sys, espec);
  std::vector<double> ratios(xs.size());
  parallel_for(xs.size(), spec.threads, [&](size_t i) {
    const Vector& x = xs[i];
    const Vector& e = es[i];
    const Vector xhat = x - e;
    const Vector phi_x = eval_phi(sys.phi, sys.C * x);
    const Vector drift = sys.A * x - sys.B * phi_x;
    const Vector push = sys.B * (K * xhat);
    const Vector open =
        sys.A * e - sys.B * (phi_x - eval_phi(sys.phi, sys.C * xhat));
    const Vector corr = L * (sys.C * e);
    // gamma and xi are independent and enter x+ and e+ separately.
    const double ex = p * quad(P, drift + push) + (1.0 - p) * quad(P, drift);
    const double ee = q * quad(P_e, open - corr) + (1.0 - q) * quad(P_e, open);
    const double v = quad(P, x) + quad(P_e, e);
    ratios[i] = (ex + ee - v) / (x.squaredNorm() + e.squaredNorm());
  });
  std::vector<Vector> stacked(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    stacked[i] = Vector(2 * sys.n());
    stacked[i] << xs[i], es[i];
  }
  return reduce(stacked, ratios);
}

std::pair<size_t, size_t> decaying_window(const std::vector<double>& series) {
  size_t end = 0;
  while (end < series.size() && std::isfinite(series[end]) &&
         series[end] >= 1e-250) {
    ++end;
  }
  return {0, end};
}

DecayEstimate fit_decay(const std::vector<double>& series, size_t begin,
                        size_t end) {
  if (end > series.size() || end < begin + 2) {
    throw std::invalid_argument("fit window needs at least two points");
  }
  DecayEstimate est;
  est.begin = begin;
  est.end = end;
  const double n = static_cast<double>(end - begin);
  double st = 0.0;
  double sy = 0.0;
  std::vector<double> logs;
  logs.reserve(end - begin);
  for (size_t t = begin; t < end; ++t) {
    double v = series[t];
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("series must be finite and non-negative");
    }
    if (v < 1e-300) {
      v = 1e-300;
      est.degenerate = true;
    }
    logs.push_back(std::log(v));
    st += static_cast<double>(t);
    sy += logs.back();
  }
  const double tm = st / n;
  const double ym = sy / n;
  double stt = 0.0;
  double sty = 0.0;
  double syy = 0.0;
  for (size_t i = 0; i < logs.size(); ++i) {
    const double dt = static_cast<double>(begin + i) - tm;
    const double dy = logs[i] - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  const double slope = sty / stt;
  const double intercept = ym - slope * tm;
  est.beta_hat = std::exp(slope);
  est.M_hat = std::exp(intercept);
  double ss_res = 0.0;
  for (size_t i = 0; i < logs.size(); ++i) {
    const double r =
        logs[i] - (intercept + slope * static_cast<double>(begin + i));
    ss_res += r * r;
  }
  est.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return est;
}

DecayEstimate fit_decay(const std::vector<double>& series) {
  const auto [b, e] = decaying_window(series);
  return fit_decay(series, b, e);
}

}  // namespace lurenet
