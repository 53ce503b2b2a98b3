#include <benchmark/benchmark.h>

#include <string>

#include "lurenet/netio.h"
#include "lurenet/riccati.h"
#include "lurenet/sim.h"
#include "lurenet/synthesis.h"

namespace {

using namespace lurenet;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

void BM_GoldenRatioDare(benchmark::State& state) {
  const DareProblem prob{scalar(0.5), scalar(1.0), scalar(1.0), scalar(2.0)};
  for (auto _ : state) benchmark::DoNotOptimize(solve_primal_dare(prob));
}
BENCHMARK(BM_GoldenRatioDare);

void BM_DemoOutputFeedbackDesign(benchmark::State& state) {
  const auto sys = stabilizable_demo_system();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.6));
  }
}
BENCHMARK(BM_DemoOutputFeedbackDesign);

void BM_Simulate(benchmark::State& state) {
  const auto sys = stabilizable_demo_system();
  const auto gains = LoopGains::From(
      design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.6));
  SimConfig cfg;
  cfg.p = cfg.q = 0.6;
  cfg.horizon = 200;
  cfg.realizations = static_cast<int>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(sys, gains, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.realizations * cfg.horizon);
}
BENCHMARK(BM_Simulate)->Arg(1)->Arg(50);

void BM_FrameRoundTrip(benchmark::State& state) {
  const Frame f{FrameKind::kSensor, 7, 3, 0, {0.25, -1.5}};
  for (auto _ : state) benchmark::DoNotOptimize(decode_frame(encode_frame(f)));
}
BENCHMARK(BM_FrameRoundTrip);

}  // namespace

BENCHMARK_MAIN();
