// lurenet: synthesis, verification, simulation and the networked demo for
// observer-based control of Lure plants over erasure channels.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.h"
#include "json.hpp"
#include "lurenet/errors.h"
#include "lurenet/json_io.h"

namespace {

using lurenet::cli::CommandResult;
using json = nlohmann::ordered_json;

struct Common {
  std::string out_dir = ".";
};

// Explicitly supplied options (command line or config file) as an argument
// list, and every option's effective value for the manifest echo.
void collect_options(const CLI::App* sub, std::vector<std::string>& args,
                     json& echo) {
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.rfind("--", 0) != 0 || name == "--help") continue;
    const bool is_flag = opt->get_expected_min() == 0;
    if (is_flag) {
      echo[name.substr(2)] = opt->count() > 0;
      if (opt->count() > 0) args.push_back(name);
      continue;
    }
    const auto& results = opt->results();
    if (!results.empty()) {
      args.push_back(name);
      for (const auto& v : results) args.push_back(v);
      echo[name.substr(2)] = results.size() == 1 ? json(results.front())
                                                 : json(results);
    } else {
      echo[name.substr(2)] = opt->get_default_str();
    }
  }
}

void write_manifest(const std::string& command, const CLI::App* sub,
                    const Common& common, const CommandResult& result,
                    double seconds) {
  std::vector<std::string> args{command};
  json options = json::object();
  collect_options(sub, args, options);
  json outputs = json::array();
  for (const auto& f : result.outputs) {
    const auto path = std::filesystem::path(common.out_dir) / f;
    outputs.push_back({{"path", f},
                       {"bytes", std::filesystem::file_size(path)}});
  }
  json m = {{"tool", "lurenet"},
            {"version", LURENET_VERSION},
            {"command", command},
            {"args", args},
            {"options", options},
            {"seeds", result.seeds},
            {"outputs", outputs},
            {"exit_code", result.exit_code},
            {"duration_seconds", seconds}};
  lurenet::write_file(
      (std::filesystem::path(common.out_dir) / (command + ".manifest.json"))
          .string(),
      m.dump(2) + "\n");
}

int run(std::vector<std::string> argv);

int replay(const std::string& manifest_path, const std::string& out_dir) {
  json m;
  try {
    m = json::parse(lurenet::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw lurenet::ParseError(std::string("bad manifest: ") + e.what());
  }
  if (!m.contains("args") || !m["args"].is_array() || m["args"].empty()) {
    throw lurenet::ParseError("manifest has no args");
  }
  std::vector<std::string> argv{"lurenet", "--out-dir", out_dir};
  for (const auto& a : m["args"]) argv.push_back(a.get<std::string>());
  return run(std::move(argv));
}

int run(std::vector<std::string> argv) {
  CLI::App app{
      "lurenet: observer-based control of Lure plants over erasure channels"};
  app.set_version_flag("--version", LURENET_VERSION);
  app.set_config("--config", "",
                 "TOML/INI file supplying any flag; the command line wins");
  app.require_subcommand(1);

  Common common;
  app.add_option("--out-dir", common.out_dir, "Directory for output files")
      ->capture_default_str();

  using namespace lurenet::cli;
  std::string selected;
  std::function<CommandResult()> action;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    return sub;
  };

  SynthArgs synth;
  CLI::App* s = add("synth", "Design K and L and report critical probabilities");
  s->add_option("--system", synth.system, "System JSON")->required();
  s->add_option("--d1", synth.d1, "Sector bound D1 (scalar or JSON matrix)")
      ->required();
  s->add_option("--d2", synth.d2, "Incremental bound D2 (defaults to D1)");
  s->add_option("--p", synth.p, "Input delivery probability")->capture_default_str();
  s->add_option("--q", synth.q, "Output delivery probability")->capture_default_str();
  s->add_option("--mu", synth.mu, "General input channel mean");
  s->add_option("--sigma2", synth.sigma2, "General input channel variance");

  CalibrateArgs cal;
  CLI::App* c = add("calibrate", "Sweep scalar sector bounds d over (0, 1/max_gain)");
  c->add_option("--system", cal.system, "System JSON")->required();
  c->add_option("--points", cal.points)->capture_default_str();
  c->add_option("--target", cal.target)->capture_default_str();
  c->add_option("--tolerance", cal.tolerance)->capture_default_str();

  SimulateArgs sim;
  CLI::App* m = add("simulate", "Monte Carlo ensemble over erasure channels");
  m->add_option("--system", sim.system, "System JSON")->required();
  m->add_option("--gains", sim.gains, "Synthesis JSON with K and L");
  m->add_option("--mode", sim.mode, "open_loop | state_feedback | output_feedback")
      ->capture_default_str();
  m->add_option("--p", sim.p)->capture_default_str();
  m->add_option("--q", sim.q)->capture_default_str();
  m->add_option("--T", sim.horizon, "Horizon")->capture_default_str();
  m->add_option("--n", sim.realizations, "Realizations")->capture_default_str();
  m->add_option("--seed", sim.seed)->capture_default_str();
  m->add_option("--noise", sim.noise, "Process noise variance")->capture_default_str();
  m->add_option("--x0", sim.x0, "Initial state (default 0.1 each)");
  m->add_option("--xhat0", sim.xhat0, "Initial estimate (default 0)");
  m->add_option("--threads", sim.threads)->capture_default_str();

  SweepArgs sweep;
  CLI::App* w = add("sweep", "Feasibility region over a (p, q) grid");
  w->add_option("--system", sweep.system, "System JSON")->required();
  w->add_option("--d1", sweep.d1)->required();
  w->add_option("--d2", sweep.d2);
  w->add_option("--p-grid", sweep.p_grid, "lo:hi:n or comma list")
      ->capture_default_str();
  w->add_option("--q-grid", sweep.q_grid)->capture_default_str();

  DecayStudyArgs decay;
  CLI::App* d = add("decay-study", "Mean decay time against p = q");
  d->add_option("--system", decay.system, "System JSON")->required();
  d->add_option("--gains", decay.gains, "Synthesis JSON")->required();
  d->add_option("--p-values", decay.p_values)->capture_default_str();
  d->add_option("--T", decay.horizon)->capture_default_str();
  d->add_option("--n", decay.realizations)->capture_default_str();
  d->add_option("--seed", decay.seed)->capture_default_str();
  d->add_option("--noise", decay.noise)->capture_default_str();
  d->add_option("--threshold", decay.threshold)->capture_default_str();
  d->add_option("--hold", decay.hold)->capture_default_str();
  d->add_option("--x0", decay.x0);
  d->add_option("--threads", decay.threads)->capture_default_str();

  VerifyArgs ver;
  CLI::App* v = add("verify", "PRL certificates and sampled Lyapunov decrease");
  v->add_option("--system", ver.system, "System JSON")->required();
  v->add_option("--gains", ver.synthesis, "Synthesis JSON from `synth`")
      ->required();
  v->add_option("--p", ver.p, "Defaults to the synthesis value");
  v->add_option("--q", ver.q, "Defaults to the synthesis value");
  v->add_option("--epsilon", ver.epsilon, "R = epsilon I")->capture_default_str();
  v->add_option("--samples", ver.samples)->capture_default_str();
  v->add_option("--seed", ver.seed)->capture_default_str();
  v->add_option("--threads", ver.threads)->capture_default_str();

  NetDemoArgs net;
  CLI::App* n = add("net-demo", "Two-node networked loop");
  n->add_option("--role", net.role, "plant | controller | both")
      ->capture_default_str();
  n->add_option("--transport", net.transport, "tcp | memory")
      ->capture_default_str();
  n->add_option("--endpoint", net.endpoint, "host:port")->capture_default_str();
  n->add_option("--system", net.system, "System JSON")->required();
  n->add_option("--gains", net.gains, "Synthesis JSON (controller side)");
  n->add_option("--p", net.p)->capture_default_str();
  n->add_option("--q", net.q)->capture_default_str();
  n->add_option("--T", net.horizon)->capture_default_str();
  n->add_option("--n", net.realizations)->capture_default_str();
  n->add_option("--seed", net.seed)->capture_default_str();
  n->add_option("--noise", net.noise)->capture_default_str();
  n->add_option("--x0", net.x0);
  n->add_option("--timeout-ms", net.timeout_ms)->capture_default_str();

  std::string manifest;
  CLI::App* r = add("replay", "Re-run the command recorded in a manifest");
  r->add_option("manifest", manifest, "Manifest JSON")->required();

  std::vector<std::string> rev(argv.rbegin(), argv.rend() - 1);
  try {
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? lurenet::cli::kExitOk : lurenet::cli::kExitError;
  }

  const std::map<const CLI::App*, std::function<CommandResult()>> actions = {
      {s, [&] { return cmd_synth(synth, common.out_dir); }},
      {c, [&] { return cmd_calibrate(cal, common.out_dir); }},
      {m, [&] { return cmd_simulate(sim, common.out_dir); }},
      {w, [&] { return cmd_sweep(sweep, common.out_dir); }},
      {d, [&] { return cmd_decay_study(decay, common.out_dir); }},
      {v, [&] { return cmd_verify(ver, common.out_dir); }},
      {n, [&] { return cmd_net_demo(net, common.out_dir); }},
  };

  try {
    if (r->parsed()) return replay(manifest, common.out_dir);
    std::filesystem::create_directories(common.out_dir);
    for (const auto& [sub, fn] : actions) {
      if (!sub->parsed()) continue;
      const auto t0 = std::chrono::steady_clock::now();
      const CommandResult result = fn();
      const double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
      if (result.exit_code != kExitError) {
        write_manifest(sub->get_name(), sub, common, result, secs);
      }
      return result.exit_code;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lurenet::cli::kExitError;
  }
  return lurenet::cli::kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}
