#include "commands.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "lurenet/errors.h"
#include "lurenet/json_io.h"
#include "lurenet/netio.h"
#include "lurenet/sim.h"
#include "lurenet/synthesis.h"
#include "lurenet/verify.h"

namespace lurenet::cli {

namespace {

std::string path_in(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void emit(CommandResult& r, const std::string& dir, const std::string& name,
          const std::string& content) {
  write_file(path_in(dir, name), content);
  r.outputs.push_back(name);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\n\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text) {
  const std::string t = trim(text);
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != t.size()) {
    throw ParseError("not a number: '" + text + "'");
  }
  return v;
}

std::string fmt(double v) { return format_double(v); }

std::optional<DecayEstimate> try_fit(const std::vector<double>& series) {
  const auto [b, e] = decaying_window(series);
  if (e < b + 2) return std::nullopt;
  return fit_decay(series, b, e);
}

SimConfig base_config(int horizon, int realizations, uint64_t seed,
                      double noise, const std::string& x0,
                      const std::string& xhat0, unsigned threads) {
  SimConfig c;
  c.horizon = horizon;
  c.realizations = realizations;
  c.seed = seed;
  c.noise_variance = noise;
  c.x0 = parse_vector_arg(x0);
  c.xhat0 = parse_vector_arg(xhat0);
  c.threads = threads;
  return c;
}

std::string node_csv(const NodeResult& node, bool plant) {
  std::string out = "t,realization,x_sqnorm,e_sqnorm,gamma,xi\n";
  for (size_t r = 0; r < node.runs.size(); ++r) {
    const RealizationTrace& run = node.runs[r];
    const size_t len = plant ? run.x.size() : run.xhat.size();
    for (size_t t = 0; t < len; ++t) {
      out += std::to_string(t) + "," + std::to_string(r) + ",";
      out += plant ? fmt(run.x[t].squaredNorm()) : "";
      out += ",,";
      if (plant && t < run.gamma.size()) out += std::to_string(run.gamma[t]);
      out += ",";
      if (!plant && t < run.xi.size()) out += std::to_string(run.xi[t]);
      out += "\n";
    }
  }
  return out;
}

int node_exit(const NodeResult& node) {
  if (!node.complete()) {
    std::cerr << "error: " << (node.timed_out ? "peer timed out" : node.error)
              << "\n";
    return kExitError;
  }
  for (const auto& run : node.runs) {
    if (run.diverged) return kExitNegative;
  }
  return kExitOk;
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("empty grid");
  std::vector<double> out;
  const auto c1 = t.find(':');
  if (c1 != std::string::npos) {
    const auto c2 = t.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ParseError("grid must be lo:hi:n");
    const double lo = parse_number(t.substr(0, c1));
    const double hi = parse_number(t.substr(c1 + 1, c2 - c1 - 1));
    const double n = parse_number(t.substr(c2 + 1));
    if (n < 2 || n != std::floor(n)) {
      throw ParseError("grid point count must be an integer >= 2");
    }
    const int count = static_cast<int>(n);
    for (int i = 0; i < count; ++i) {
      out.push_back(lo + (hi - lo) * i / (count - 1));
    }
    return out;
  }
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item));
  return out;
}

Matrix parse_sector_arg(const std::string& text, int m) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("missing sector bound");
  if (t.front() == '[') {
    Matrix D = parse_matrix_json(t);
    if (D.rows() != m || D.cols() != m) {
      throw DimensionMismatch("sector bound must be " + std::to_string(m) +
                              "x" + std::to_string(m));
    }
    return D;
  }
  return parse_number(t) * Matrix::Identity(m, m);
}

Vector parse_vector_arg(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return Vector();
  if (t.front() == '[') {
    const Matrix m = parse_matrix_json(t);
    return Eigen::Map<const Vector>(m.data(), m.size());
  }
  const std::vector<double> v = parse_grid(t);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

CommandResult cmd_synth(const SynthArgs& a, const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  const Matrix D1 = parse_sector_arg(a.d1, sys.m());
  const Matrix D2 = a.d2.empty() ? D1 : parse_sector_arg(a.d2, sys.m());
  const ChannelModel input = a.sigma2 > 0.0
                                 ? ChannelModel::General(a.mu, a.sigma2)
                                 : ChannelModel::Bernoulli(a.p);
  const ChannelModel output = ChannelModel::Bernoulli(a.q);
  const OutputFeedbackController c =
      design_output_feedback(sys, D1, D2, input, output);

  CommandResult r;
  emit(r, out_dir, "synth.json", synthesis_to_json(c, D1, D2, input, output));
  std::cout << "p_c = " << fmt(c.p_c) << "  p_margin = " << fmt(c.p_margin)
            << "\nq_c = " << fmt(c.q_c) << "  q_margin = " << fmt(c.q_margin)
            << "\n" << (c.feasible ? "feasible" : "infeasible") << "\n";
  r.exit_code = c.feasible ? kExitOk : kExitNegative;
  return r;
}

CommandResult cmd_calibrate(const CalibrateArgs& a,
                            const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  CalibrationOptions opts;
  opts.points = a.points;
  opts.target = a.target;
  opts.tolerance = a.tolerance;
  const CalibrationResult res = calibrate_scalar_sector(sys, opts);

  CommandResult r;
  emit(r, out_dir, "calibration.csv", calibration_csv(res));
  emit(r, out_dir, "calibration.json", calibration_summary_json(res));
  bool any_feasible = false;
  for (const auto& pt : res.points) any_feasible |= pt.converged && pt.p_feasible;
  std::cout << "admissible d in (0, " << fmt(res.upper) << "), "
            << res.points.size() << " points, shape " << res.shape << "\n";
  if (res.best) {
    std::cout << "closest: d = " << fmt(res.best->d)
              << "  p_c = " << fmt(res.best->p_c)
              << "  q_c = " << fmt(res.best->q_c) << "\n";
  }
  std::cout << "target " << fmt(res.target)
            << (res.reproduced ? " reproduced" : " not reproduced") << "\n";
  r.exit_code = any_feasible ? kExitOk : kExitNegative;
  return r;
}

CommandResult cmd_simulate(const SimulateArgs& a, const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  SimConfig cfg = base_config(a.horizon, a.realizations, a.seed, a.noise, a.x0,
                              a.xhat0, a.threads);
  cfg.mode = parse_loop_mode(a.mode);
  cfg.p = a.p;
  cfg.q = a.q;
  LoopGains gains;
  if (!a.gains.empty()) {
    gains = load_gains(a.gains);
  } else if (cfg.mode != LoopMode::kOpenLoop) {
    throw ParseError("--gains is required for closed-loop modes");
  }
  const TraceSet traces = simulate(sys, gains, cfg);
  const auto fs = try_fit(traces.mean_sq_state);
  const auto fe = try_fit(traces.mean_sq_error);

  CommandResult r;
  r.seeds.push_back(cfg.seed);
  emit(r, out_dir, "trace.csv", trace_csv(traces));
  emit(r, out_dir, "summary.json",
       trace_summary_json(traces, fs.value_or(DecayEstimate{}),
                          fe.value_or(DecayEstimate{})));
  std::cout << traces.runs.size() << " realizations, "
            << traces.diverged_count << " diverged\n";
  if (fs) std::cout << "state beta_hat = " << fmt(fs->beta_hat) << "\n";
  if (fe) std::cout << "error beta_hat = " << fmt(fe->beta_hat) << "\n";
  r.exit_code = traces.diverged_count > 0 ? kExitNegative : kExitOk;
  return r;
}

CommandResult cmd_sweep(const SweepArgs& a, const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  const Matrix D1 = parse_sector_arg(a.d1, sys.m());
  const Matrix D2 = a.d2.empty() ? D1 : parse_sector_arg(a.d2, sys.m());
  const StabilityRegion region = sweep_stability_region(
      sys, D1, D2, parse_grid(a.p_grid), parse_grid(a.q_grid));

  CommandResult r;
  emit(r, out_dir, "region.csv", region_csv(region));
  std::cout << "p_c = " << fmt(region.p_critical.value)
            << "  q_c = " << fmt(region.q_critical.value) << "\n"
            << region.feasible_count() << " of " << region.cells.size()
            << " cells feasible\n";
  r.exit_code = region.feasible_count() > 0 ? kExitOk : kExitNegative;
  return r;
}

CommandResult cmd_decay_study(const DecayStudyArgs& a,
                              const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  const LoopGains gains = load_gains(a.gains);
  SimConfig cfg = base_config(a.horizon, a.realizations, a.seed, a.noise, a.x0,
                              "", a.threads);
  DecayStudyOptions opts;
  opts.threshold = a.threshold;
  opts.hold = a.hold;
  opts.min_realizations = std::min(opts.min_realizations, a.realizations);
  const auto rows =
      decay_time_study(sys, gains, parse_grid(a.p_values), cfg, opts);

  CommandResult r;
  r.seeds.push_back(cfg.seed);
  emit(r, out_dir, "decay_study.csv", decay_study_csv(rows));
  for (const auto& row : rows) {
    std::cout << "p = q = " << fmt(row.p) << "  mean decay " << fmt(row.state.mean)
              << " +- " << fmt(row.state.ci95) << "  (" << row.state.censored
              << " censored)\n";
  }
  return r;
}

CommandResult cmd_verify(const VerifyArgs& a, const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  const SynthesisRecord rec = load_synthesis(a.synthesis);
  const double p = a.p < 0.0 ? rec.p : a.p;
  const double q = a.q < 0.0 ? rec.q : a.q;
  const int n = sys.n();
  const Matrix R = a.epsilon * Matrix::Identity(n, n);

  const CertificateSearch ctrl =
      search_certificate(sys, rec.gains.K, rec.Sigma1, rec.P_star, R, p,
                         PrlSide::kController);
  const Matrix P_o = rec.Q_star.inverse();
  const PrlCertificate obs_plain = stochastic_prl_margin(
      sys, rec.gains.L, rec.Sigma2, P_o, R, q, PrlSide::kObserver);
  const CertificateSearch obs = search_certificate(
      sys, rec.gains.L, rec.Sigma2, P_o, R, q, PrlSide::kObserver);

  StateSampleSpec spec;
  spec.count = a.samples;
  spec.seed = a.seed;
  spec.threads = a.threads;
  const DecreaseResult dx =
      lyapunov_decrease_state(sys, rec.gains.K, ctrl.best.P, p, spec);
  const DecreaseResult de =
      lyapunov_decrease_error(sys, rec.gains.L, obs.best.P, q, spec);

  CommandResult r;
  r.seeds.push_back(a.seed);
  emit(r, out_dir, "certificate.json",
       certificates_to_json(
           {{"controller", ctrl.best, ctrl.delta},
            {"observer_inverse_q", obs_plain, std::nullopt},
            {"observer", obs.best, obs.delta}},
           {{"state_feedback", p, 1.0, dx}, {"observer_error", 1.0, q, de}}));
  std::cout << "controller PRL margin " << fmt(ctrl.best.margin) << " (delta "
            << fmt(ctrl.delta) << ")\nobserver PRL margin "
            << fmt(obs.best.margin) << " (delta " << fmt(obs.delta)
            << ")\nstate Lyapunov worst ratio " << fmt(dx.worst_ratio)
            << "\nerror Lyapunov worst ratio " << fmt(de.worst_ratio) << "\n";
  const bool ok = ctrl.found && obs.found && dx.worst_ratio < 0.0 &&
                  de.worst_ratio < 0.0;
  r.exit_code = ok ? kExitOk : kExitNegative;
  return r;
}

CommandResult cmd_net_demo(const NetDemoArgs& a, const std::string& out_dir) {
  const LureSystem sys = load_system(a.system);
  NetConfig cfg;
  cfg.sim = base_config(a.horizon, a.realizations, a.seed, a.noise, a.x0, "", 1);
  cfg.sim.p = a.p;
  cfg.sim.q = a.q;
  cfg.round_timeout = std::chrono::milliseconds(a.timeout_ms);
  LoopGains gains;
  if (!a.gains.empty()) {
    gains = load_gains(a.gains);
    cfg.sim.mode = LoopMode::kOutputFeedback;
  } else {
    cfg.sim.mode = LoopMode::kOpenLoop;
  }
  if (a.role != "plant" && a.role != "controller" && a.role != "both") {
    throw ParseError("role must be plant, controller or both");
  }
  if (a.transport != "tcp" && a.transport != "memory") {
    throw ParseError("transport must be tcp or memory");
  }
  if (a.transport == "memory" && a.role != "both") {
    throw ParseError("the memory transport needs --role both");
  }

  CommandResult r;
  r.seeds.push_back(a.seed);
  const auto timeout = cfg.round_timeout;

  if (a.role == "both") {
    TraceSet traces;
    if (a.transport == "memory") {
      traces = run_loopback(sys, gains, cfg);
    } else {
      const auto [host, port] = parse_endpoint(a.endpoint);
      TcpListener listener(host, port);
      NodeResult ctrl;
      std::thread ctrl_thread([&, host = host, bound = listener.port()] {
        try {
          auto conn = TcpTransport::connect(host, bound, timeout);
          ctrl = run_controller_node(sys, gains, *conn, cfg);
        } catch (const std::exception& e) {
          ctrl.error = e.what();
        }
      });
      NodeResult plant;
      try {
        auto conn = listener.accept(timeout);
        if (!conn) {
          plant.timed_out = true;
        } else {
          plant = run_plant_node(sys, *conn, cfg);
        }
      } catch (const std::exception& e) {
        plant.error = e.what();
      }
      ctrl_thread.join();
      if (node_exit(plant) == kExitError || node_exit(ctrl) == kExitError) {
        r.exit_code = kExitError;
        return r;
      }
      traces = merge_node_traces(sys, cfg, plant, ctrl);
    }
    emit(r, out_dir, "net_trace.csv", trace_csv(traces));
    const auto fs = try_fit(traces.mean_sq_state);
    const auto fe = try_fit(traces.mean_sq_error);
    emit(r, out_dir, "net_summary.json",
         trace_summary_json(traces, fs.value_or(DecayEstimate{}),
                            fe.value_or(DecayEstimate{})));
    std::cout << traces.runs.size() << " networked realizations, "
              << traces.diverged_count << " diverged\n";
    r.exit_code = traces.diverged_count > 0 ? kExitNegative : kExitOk;
    return r;
  }

  const auto [host, port] = parse_endpoint(a.endpoint);
  NodeResult node;
  if (a.role == "plant") {
    TcpListener listener(host, port);
    std::cout << "plant listening on " << host << ":" << listener.port()
              << std::endl;
    auto conn = listener.accept(timeout);
    if (!conn) {
      node.timed_out = true;
    } else {
      node = run_plant_node(sys, *conn, cfg);
    }
    emit(r, out_dir, "net_plant.csv", node_csv(node, true));
  } else {
    auto conn = TcpTransport::connect(host, port, timeout);
    node = run_controller_node(sys, gains, *conn, cfg);
    emit(r, out_dir, "net_controller.csv", node_csv(node, false));
  }
  r.exit_code = node_exit(node);
  return r;
}

}  // namespace lurenet::cli
