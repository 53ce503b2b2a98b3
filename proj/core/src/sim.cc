#include "lurenet/sim.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lurenet/errors.h"
#include "lurenet/parallel.h"

namespace lurenet {

const char* to_string(LoopMode mode) {
  switch (mode) {
    case LoopMode::kOpenLoop:
      return "open_loop";
    case LoopMode::kStateFeedback:
      return "state_feedback";
    case LoopMode::kOutputFeedback:
      return "output_feedback";
  }
  return "unknown";
}

LoopMode parse_loop_mode(const std::string& name) {
  if (name == "open_loop") return LoopMode::kOpenLoop;
  if (name == "state_feedback") return LoopMode::kStateFeedback;
  if (name == "output_feedback") return LoopMode::kOutputFeedback;
  throw std::invalid_argument("unknown loop mode '" + name + "'");
}

SimConfig SimConfig::resolved(const LureSystem& sys) const {
  SimConfig c = *this;
  const int n = sys.n();
  if (c.x0.size() == 0) c.x0 = Vector::Constant(n, 0.1);
  if (c.xhat0.size() == 0) c.xhat0 = Vector::Zero(n);
  if (c.x0.size() != n || c.xhat0.size() != n) {
    throw DimensionMismatch("initial conditions must have " +
                            std::to_string(n) + " entries");
  }
  if (c.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (c.realizations < 1) {
    throw std::invalid_argument("realizations must be >= 1");
  }
  if (!(c.p >= 0.0 && c.p <= 1.0) || !(c.q >= 0.0 && c.q <= 1.0)) {
    throw std::invalid_argument("p and q must lie in [0, 1]");
  }
  if (!(c.noise_variance >= 0.0)) {
    throw std::invalid_argument("noise variance must be >= 0");
  }
  return c;
}

Vector plant_step(const LureSystem& sys, const Vector& x, bool gamma,
                  const Vector& u, const Vector& w) {
  Vector next = sys.A * x - sys.B * eval_phi(sys.phi, sys.C * x);
  if (gamma) next += sys.B * u;
  if (w.size() != 0) next += w;
  return next;
}

Vector observer_step(const LureSystem& sys, const Matrix& L,
                     const Vector& xhat, bool gamma, const Vector& u, bool xi,
                     const Vector& y) {
  const Vector yhat = sys.C * xhat;
  Vector next = sys.A * xhat - sys.B * eval_phi(sys.phi, yhat);
  if (gamma) next += sys.B * u;
  if (xi && L.size() != 0) next += L * (y - yhat);
  return next;
}

Vector control_law(const LoopGains& gains, LoopMode mode, const Vector& x,
                   const Vector& xhat, int m) {
  switch (mode) {
    case LoopMode::kOpenLoop:
      return Vector::Zero(m);
    case LoopMode::kStateFeedback:
      return gains.K * x;
    case LoopMode::kOutputFeedback:
      return gains.K * xhat;
  }
  return Vector::Zero(m);
}

namespace {

void check_gains(const LureSystem& sys, const LoopGains& gains,
                 LoopMode mode) {
  const int n = sys.n();
  const int m = sys.m();
  if (mode != LoopMode::kOpenLoop &&
      (gains.K.rows() != m || gains.K.cols() != n)) {
    throw DimensionMismatch("K must be " + std::to_string(m) + "x" +
                            std::to_string(n) + " for closed-loop modes");
  }
  if (gains.L.size() != 0 && (gains.L.rows() != n || gains.L.cols() != m)) {
    throw DimensionMismatch("L must be " + std::to_string(n) + "x" +
                            std::to_string(m));
  }
}

bool blown_up(const Vector& v, double limit) {
  return !v.allFinite() || v.norm() > limit;
}

DecayStats summarize(const std::vector<std::optional<int>>& times,
                     int horizon) {
  DecayStats s;
  const double n = static_cast<double>(times.size());
  std::vector<double> values;
  values.reserve(times.size());
  for (const auto& t : times) {
    if (t) {
      values.push_back(*t);
    } else {
      values.push_back(horizon);
      ++s.censored;
    }
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  s.ci95 = 1.96 * s.stddev / std::sqrt(n);
  return s;
}

}  // namespace

RealizationTrace simulate_realization(const LureSystem& sys,
                                      const LoopGains& gains,
                                      const SimConfig& cfg,
                                      uint64_t realization,
                                      ChannelSource& gamma_src,
                                      ChannelSource& xi_src) {
  const int n = sys.n();
  const int m = sys.m();
  GaussianNoise noise(cfg.noise_variance, cfg.seed, realization);

  RealizationTrace run;
  run.x.reserve(static_cast<size_t>(cfg.horizon) + 1);
  run.xhat.reserve(static_cast<size_t>(cfg.horizon) + 1);
  run.gamma.reserve(static_cast<size_t>(cfg.horizon));
  run.xi.reserve(static_cast<size_t>(cfg.horizon));
  run.x.push_back(cfg.x0);
  run.xhat.push_back(cfg.xhat0);

  for (int t = 0; t < cfg.horizon; ++t) {
    const Vector& x = run.x.back();
    const Vector& xhat = run.xhat.back();
    const Vector y = sys.C * x;
    const bool gamma = gamma_src.next();
    const bool xi = xi_src.next();
    const Vector u = control_law(gains, cfg.mode, x, xhat, m);
    const Vector w = noise.sample(n);

    Vector x_next = plant_step(sys, x, gamma, u, w);
    Vector xhat_next = observer_step(sys, gains.L, xhat, gamma, u, xi, y);
    run.gamma.push_back(gamma ? 1 : 0);
    run.xi.push_back(xi ? 1 : 0);
    const bool stop = blown_up(x_next, cfg.divergence_norm) ||
                      blown_up(xhat_next, cfg.divergence_norm);
    run.x.push_back(std::move(x_next));
    run.xhat.push_back(std::move(xhat_next));
    if (stop) {
      run.diverged = true;
      break;
    }
  }
  return run;
}

TraceSet assemble_traces(const SimConfig& cfg,
                         std::vector<RealizationTrace> runs) {
  TraceSet out;
  out.config = cfg;
  const size_t len = static_cast<size_t>(cfg.horizon) + 1;
  out.mean_sq_state.assign(len, 0.0);
  out.mean_sq_error.assign(len, 0.0);
  const double inv = 1.0 / static_cast<double>(runs.size());
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    if (run.diverged) ++out.diverged_count;
    for (size_t t = 0; t < len; ++t) {
      if (t < run.x.size()) {
        out.mean_sq_state[t] += inv * run.x[t].squaredNorm();
        out.mean_sq_error[t] += inv * run.error(t).squaredNorm();
      } else {
        out.mean_sq_state[t] = inf;
        out.mean_sq_error[t] = inf;
      }
    }
  }
  out.runs = std::move(runs);
  return out;
}

TraceSet simulate(const LureSystem& sys, const LoopGains& gains,
                  const SimConfig& config) {
  const SimConfig cfg = config.resolved(sys);
  check_gains(sys, gains, cfg.mode);
  std::vector<RealizationTrace> runs(static_cast<size_t>(cfg.realizations));
  parallel_for(runs.size(), cfg.threads, [&](size_t r) {
    ChannelSource g = ChannelSource::Seeded(cfg.p, cfg.seed, r,
                                            StreamId::kInputChannel);
    ChannelSource xi = ChannelSource::Seeded(cfg.q, cfg.seed, r,
                                             StreamId::kOutputChannel);
    runs[r] = simulate_realization(sys, gains, cfg, r, g, xi);
  });
  return assemble_traces(cfg, std::move(runs));
}

TraceSet simulate_scripted(const LureSystem& sys, const LoopGains& gains,
                           const SimConfig& config,
                           const std::vector<std::vector<uint8_t>>& gammas,
                           const std::vector<std::vector<uint8_t>>& xis) {
  if (gammas.size() != xis.size() || gammas.empty()) {
    throw std::invalid_argument(
        "need one gamma and one xi script per realization");
  }
  SimConfig base = config;
  base.realizations = static_cast<int>(gammas.size());
  const SimConfig cfg = base.resolved(sys);
  check_gains(sys, gains, cfg.mode);
  std::vector<RealizationTrace> runs(gammas.size());
  parallel_for(runs.size(), cfg.threads, [&](size_t r) {
    ChannelSource g = ChannelSource::Scripted(gammas[r]);
    ChannelSource xi = ChannelSource::Scripted(xis[r]);
    runs[r] = simulate_realization(sys, gains, cfg, r, g, xi);
  });
  return assemble_traces(cfg, std::move(runs));
}

std::optional<int> decay_time(const std::vector<double>& norms,
                              double threshold, int hold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("decay threshold must be positive");
  }
  if (hold < 0) throw std::invalid_argument("hold must be >= 0");
  // below_run counts consecutive sub-threshold samples starting at index t.
  int below_run = 0;
  std::optional<int> first;
  for (int t = static_cast<int>(norms.size()) - 1; t >= 0; --t) {
    below_run = norms[static_cast<size_t>(t)] < threshold ? below_run + 1 : 0;
    if (below_run >= hold + 1) first = t;
  }
  return first;
}

std::optional<int> decay_time(const RealizationTrace& run, Signal signal,
                              double threshold, int hold) {
  if (run.diverged) return std::nullopt;
  std::vector<double> norms;
  norms.reserve(run.x.size());
  for (size_t t = 0; t < run.x.size(); ++t) {
    norms.push_back(signal == Signal::kState ? run.x[t].norm()
                                             : run.error(t).norm());
  }
  return decay_time(norms, threshold, hold);
}

size_t StabilityRegion::feasible_count() const {
  size_t n = 0;
  for (const auto& c : cells) n += c.feasible ? 1 : 0;
  return n;
}

StabilityRegion sweep_stability_region(const LureSystem& sys, const Matrix& D1,
                                       const Matrix& D2,
                                       const std::vector<double>& p_grid,
                                       const std::vector<double>& q_grid,
                                       const DesignOptions& opts) {
  for (double v : p_grid) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("p grid must lie in (0, 1)");
  }
  for (double v : q_grid) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("q grid must lie in (0, 1)");
  }
  const OutputFeedbackController design =
      design_output_feedback(sys, D1, D2, 0.5, 0.5, opts);
  StabilityRegion region;
  region.p_grid = p_grid;
  region.q_grid = q_grid;
  region.p_critical = design.controller.p_critical;
  region.q_critical = design.observer.q_critical;
  region.cells.reserve(p_grid.size() * q_grid.size());
  std::vector<double> q_margins;
  q_margins.reserve(q_grid.size());
  for (double q : q_grid) q_margins.push_back(design.observer.margin_at(q));
  for (double p : p_grid) {
    const double pm = design.controller.margin_at(p);
    for (size_t j = 0; j < q_grid.size(); ++j) {
      RegionCell c{p, q_grid[j], pm, q_margins[j], false};
      c.feasible = c.p_margin > 0.0 && c.q_margin > 0.0;
      region.cells.push_back(c);
    }
  }
  return region;
}

std::vector<DecayStudyRow> decay_time_study(const LureSystem& sys,
                                            const LoopGains& gains,
                                            const std::vector<double>& p_values,
                                            const SimConfig& cfg,
                                            const DecayStudyOptions& opts) {
  std::vector<DecayStudyRow> rows;
  rows.reserve(p_values.size());
  for (double p : p_values) {
    SimConfig c = cfg;
    c.p = p;
    c.q = p;
    c.realizations = std::max(cfg.realizations, opts.min_realizations);
    const TraceSet traces = simulate(sys, gains, c);
    std::vector<std::optional<int>> ts;
    std::vector<std::optional<int>> te;
    for (const auto& run : traces.runs) {
      ts.push_back(decay_time(run, Signal::kState, opts.threshold, opts.hold));
      te.push_back(decay_time(run, Signal::kError, opts.threshold, opts.hold));
    }
    DecayStudyRow row;
    row.p = p;
    row.realizations = c.realizations;
    row.state = summarize(ts, c.horizon);
    row.error = summarize(te, c.horizon);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lurenet
