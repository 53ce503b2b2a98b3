#include "lurenet/json_io.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lurenet/errors.h"

namespace lurenet {

namespace {

using json = nlohmann::ordered_json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

json to_json(const CriticalProbability& c) {
  return {{"value", number(c.value)}, {"raw", number(c.raw)},
          {"feasible", c.feasible}};
}

json to_json(const ChannelModel& ch) {
  if (const auto* b = std::get_if<BernoulliChannel>(&ch.variant())) {
    return {{"type", "bernoulli"}, {"p", b->p}, {"qos", number(qos(ch))}};
  }
  const auto& g = std::get<GeneralChannel>(ch.variant());
  return {{"type", "general"},
          {"mu", g.mu},
          {"sigma2", g.sigma2},
          {"qos", number(qos(ch))}};
}

json to_json(const DareSolution& s) {
  return {{"iterations", s.iterations},
          {"residual", number(s.residual)},
          {"converged", s.converged}};
}

json to_json(const DecayEstimate& d) {
  return {{"beta_hat", number(d.beta_hat)},
          {"M_hat", number(d.M_hat)},
          {"r2", number(d.r2)},
          {"degenerate", d.degenerate},
          {"window", {d.begin, d.end}}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

double as_double(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

std::vector<double> as_doubles(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  std::vector<double> out;
  for (size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_double(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Matrix as_matrix(const json& j, const std::string& where) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw ParseError(where + ": expected a non-empty array of rows");
  }
  // A flat array is read as a single row.
  if (!j[0].is_array()) {
    const std::vector<double> row = as_doubles(j, where);
    Matrix m(1, static_cast<Eigen::Index>(row.size()));
    for (size_t k = 0; k < row.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = row[k];
    return m;
  }
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    const std::string rw = where + "[" + std::to_string(r) + "]";
    const std::vector<double> row = as_doubles(j[r], rw);
    if (row.size() != cols) throw ParseError(rw + ": ragged matrix");
    for (size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return m;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing \"" + key + "\"");
  }
  return obj.at(key);
}

void csv_row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "1" : "0"; }

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LureSystem parse_system_json(const std::string& text) {
  const json j = parse(text);
  LureSystem sys;
  sys.A = as_matrix(field(j, "A", "system"), "A");
  sys.B = as_matrix(field(j, "B", "system"), "B");
  sys.C = as_matrix(field(j, "C", "system"), "C");
  const json& channels =
      field(field(j, "phi", "system"), "channels", "phi");
  if (!channels.is_array()) throw ParseError("phi.channels: expected an array");
  for (size_t i = 0; i < channels.size(); ++i) {
    const std::string w = "phi.channels[" + std::to_string(i) + "]";
    try {
      sys.phi.channels.emplace_back(
          as_doubles(field(channels[i], "breakpoints", w), w + ".breakpoints"),
          as_doubles(field(channels[i], "slopes", w), w + ".slopes"));
    } catch (const std::invalid_argument& e) {
      throw ParseError(w + ": " + e.what());
    }
  }
  const ValidationReport report = validate_system(sys);
  if (!report.ok()) {
    std::string msg = "invalid system:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw ParseError(msg);
  }
  return sys;
}

LureSystem load_system(const std::string& path) {
  return parse_system_json(read_file(path));
}

std::string system_to_json(const LureSystem& sys) {
  json channels = json::array();
  for (const auto& ch : sys.phi.channels) {
    channels.push_back({{"breakpoints", to_json(ch.breakpoints())},
                        {"slopes", to_json(ch.slopes())}});
  }
  json j = {{"A", to_json(sys.A)},
            {"B", to_json(sys.B)},
            {"C", to_json(sys.C)},
            {"phi", {{"channels", channels}}}};
  return dump(j);
}

LoopGains parse_gains_json(const std::string& text) {
  const json j = parse(text);
  LoopGains g;
  g.K = as_matrix(field(j, "K", "gains"), "K");
  if (j.contains("L") && !j.at("L").is_null()) g.L = as_matrix(j.at("L"), "L");
  return g;
}

LoopGains load_gains(const std::string& path) {
  return parse_gains_json(read_file(path));
}

SynthesisRecord parse_synthesis_json(const std::string& text) {
  const json j = parse(text);
  SynthesisRecord r;
  r.gains.K = as_matrix(field(j, "K", "synthesis"), "K");
  r.gains.L = as_matrix(field(j, "L", "synthesis"), "L");
  const json& k = field(j, "controller", "synthesis");
  const json& o = field(j, "observer", "synthesis");
  r.P_star = as_matrix(field(k, "P_star", "controller"), "controller.P_star");
  r.Sigma1 = as_matrix(field(k, "Sigma1", "controller"), "controller.Sigma1");
  r.Q_star = as_matrix(field(o, "Q_star", "observer"), "observer.Q_star");
  r.Sigma2 = as_matrix(field(o, "Sigma2", "observer"), "observer.Sigma2");
  r.p = as_double(field(j, "p", "synthesis"), "p");
  r.q = as_double(field(j, "q", "synthesis"), "q");
  return r;
}

SynthesisRecord load_synthesis(const std::string& path) {
  return parse_synthesis_json(read_file(path));
}

Matrix parse_matrix_json(const std::string& text) {
  return as_matrix(parse(text), "matrix");
}

std::string synthesis_to_json(const OutputFeedbackController& c,
                              const Matrix& D1, const Matrix& D2,
                              const ChannelModel& input,
                              const ChannelModel& output) {
  const StateFeedbackDesign& k = c.controller;
  const ObserverDesign& o = c.observer;
  json j = {
      {"feasible", c.feasible},
      {"K", to_json(c.K)},
      {"L", to_json(c.L)},
      {"p", c.p},
      {"q", c.q},
      {"p_c", number(c.p_c)},
      {"q_c", number(c.q_c)},
      {"p_margin", number(c.p_margin)},
      {"q_margin", number(c.q_margin)},
      {"input_channel", to_json(input)},
      {"output_channel", to_json(output)},
      {"D1", to_json(D1)},
      {"D2", to_json(D2)},
      {"controller",
       {{"Sigma1", to_json(k.Sigma1)},
        {"A1", to_json(k.A1)},
        {"P_star", to_json(k.P_star)},
        {"G", to_json(k.G)},
        {"p_critical", to_json(k.p_critical)},
        {"gain_scale", number(k.gain_scale)},
        {"required_qos", number(k.required_qos)},
        {"riccati", to_json(k.dare)}}},
      {"observer",
       {{"Sigma2", to_json(o.Sigma2)},
        {"A2", to_json(o.A2)},
        {"Q_star", to_json(o.Q_star)},
        {"H", to_json(o.H)},
        {"q_critical", to_json(o.q_critical)},
        {"riccati", to_json(o.dare)}}},
  };
  return dump(j);
}

std::string certificates_to_json(const std::vector<CertificateEntry>& certs,
                                 const std::vector<DecreaseEntry>& decreases) {
  json jc = json::array();
  for (const auto& e : certs) {
    const PrlCertificate& c = e.certificate;
    json item = {{"name", e.name},
                 {"side", to_string(c.side)},
                 {"prob", c.prob},
                 {"margin", number(c.margin)},
                 {"holds", c.holds()},
                 {"P", to_json(c.P)},
                 {"R", to_json(c.R)},
                 {"gain", to_json(c.gain)},
                 {"Sigma", to_json(c.Sigma)}};
    if (e.delta) item["delta"] = *e.delta;
    if (!c.diagnostic.empty()) item["diagnostic"] = c.diagnostic;
    jc.push_back(std::move(item));
  }
  json jd = json::array();
  for (const auto& d : decreases) {
    jd.push_back({{"name", d.name},
                  {"p", d.p},
                  {"q", d.q},
                  {"worst_ratio", number(d.result.worst_ratio)},
                  {"violations", d.result.violations},
                  {"samples", d.result.samples},
                  {"worst_state", to_json(d.result.worst_state)}});
  }
  return dump({{"certificates", jc}, {"lyapunov", jd}});
}

std::string trace_csv(const TraceSet& traces) {
  std::string out;
  csv_row(out, {"t", "realization", "x_sqnorm", "e_sqnorm", "gamma", "xi"});
  for (size_t r = 0; r < traces.runs.size(); ++r) {
    const RealizationTrace& run = traces.runs[r];
    for (size_t t = 0; t < run.x.size(); ++t) {
      const bool has_step = t < run.gamma.size();
      csv_row(out, {std::to_string(t), std::to_string(r),
                    fmt(run.x[t].squaredNorm()),
                    fmt(run.error(t).squaredNorm()),
                    has_step ? fmt(static_cast<int>(run.gamma[t])) : "",
                    has_step ? fmt(static_cast<int>(run.xi[t])) : ""});
    }
  }
  return out;
}

std::string trace_summary_json(const TraceSet& traces,
                               const DecayEstimate& state_fit,
                               const DecayEstimate& error_fit) {
  const SimConfig& c = traces.config;
  json cfg = {{"horizon", c.horizon},
              {"realizations", c.realizations},
              {"seed", c.seed},
              {"x0", to_json(c.x0)},
              {"xhat0", to_json(c.xhat0)},
              {"p", c.p},
              {"q", c.q},
              {"noise_variance", c.noise_variance},
              {"mode", to_string(c.mode)},
              {"divergence_norm", c.divergence_norm}};
  json j = {{"config", cfg},
            {"diverged_count", traces.diverged_count},
            {"decay", {{"state", to_json(state_fit)}, {"error", to_json(error_fit)}}},
            {"mean_sq_state", to_json(traces.mean_sq_state)},
            {"mean_sq_error", to_json(traces.mean_sq_error)}};
  return dump(j);
}

std::string calibration_csv(const CalibrationResult& result) {
  std::string out;
  csv_row(out, {"d", "converged", "p_c", "q_c", "p_feasible", "q_feasible",
                "d1_sector_ok", "d2_sector_ok", "iterations"});
  for (const auto& p : result.points) {
    csv_row(out, {fmt(p.d), fmt(p.converged), fmt(p.p_c), fmt(p.q_c),
                  fmt(p.p_feasible), fmt(p.q_feasible), fmt(p.d1_sector_ok),
                  fmt(p.d2_sector_ok), fmt(p.iterations)});
  }
  return out;
}

std::string calibration_summary_json(const CalibrationResult& result) {
  json best = nullptr;
  if (result.best) {
    best = {{"d", result.best->d},
            {"p_c", number(result.best->p_c)},
            {"q_c", number(result.best->q_c)}};
  }
  size_t converged = 0;
  for (const auto& p : result.points) converged += p.converged ? 1 : 0;
  json j = {{"max_gain", number(result.max_gain)},
            {"lipschitz", number(result.lipschitz)},
            {"upper", number(result.upper)},
            {"points", result.points.size()},
            {"converged", converged},
            {"target", result.target},
            {"tolerance", result.tolerance},
            {"best", best},
            {"reproduced", result.reproduced},
            {"shape", result.shape}};
  return dump(j);
}

std::string region_csv(const StabilityRegion& region) {
  std::string out;
  csv_row(out, {"p", "q", "p_margin", "q_margin", "feasible"});
  for (const auto& c : region.cells) {
    csv_row(out, {fmt(c.p), fmt(c.q), fmt(c.p_margin), fmt(c.q_margin),
                  fmt(c.feasible)});
  }
  return out;
}

std::string decay_study_csv(const std::vector<DecayStudyRow>& rows) {
  std::string out;
  csv_row(out, {"p", "realizations", "state_mean", "state_std", "state_ci95",
                "state_censored", "error_mean", "error_std", "error_ci95",
                "error_censored"});
  for (const auto& r : rows) {
    csv_row(out, {fmt(r.p), fmt(r.realizations), fmt(r.state.mean),
                  fmt(r.state.stddev), fmt(r.state.ci95), fmt(r.state.censored),
                  fmt(r.error.mean), fmt(r.error.stddev), fmt(r.error.ci95),
                  fmt(r.error.censored)});
  }
  return out;
}

}  // namespace lurenet
