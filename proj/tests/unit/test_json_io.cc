#include <gtest/gtest.h>

#include "lurenet/errors.h"
#include "lurenet/json_io.h"
#include "test_util.h"

namespace lurenet {
namespace {

using testing::scalar;

TEST(SystemJson, ShippedFilesMatchBuiltIns) {
  const auto a = load_system(LURENET_DATA_DIR "/chaotic_system.json");
  const auto b = chaotic_lure_system();
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_EQ(a.C, b.C);
  EXPECT_TRUE(a.phi.channels == b.phi.channels);
  const auto d = load_system(LURENET_DATA_DIR "/demo_system.json");
  EXPECT_EQ(d.A, stabilizable_demo_system().A);
}

TEST(SystemJson, RoundTrip) {
  const auto s = stabilizable_demo_system();
  const auto r = parse_system_json(system_to_json(s));
  EXPECT_EQ(r.A, s.A);
  EXPECT_EQ(r.C, s.C);
  EXPECT_TRUE(r.phi.channels == s.phi.channels);
}

TEST(SystemJson, Errors) {
  EXPECT_THROW(parse_system_json("{bad"), ParseError);
  EXPECT_THROW(parse_system_json(R"({"A": [[1]]})"), ParseError);
  EXPECT_THROW(parse_system_json(
                   R"({"A": [[1, 2], [3]], "B": [[1]], "C": [[1]],
                       "phi": {"channels": []}})"),
               ParseError);
  // Structural validation runs on load.
  EXPECT_THROW(parse_system_json(
                   R"({"A": [[1]], "B": [[1]], "C": [[1]],
                       "phi": {"channels": [{"breakpoints": [0.5],
                                             "slopes": [1, -1]}]}})"),
               ParseError);
  EXPECT_THROW(read_file("/nonexistent/file.json"), ParseError);
}

TEST(SynthesisJson, RoundTripsGainsAndRiccatiData) {
  const auto sys = stabilizable_demo_system();
  const auto c = design_output_feedback(sys, scalar(0.8), scalar(0.8), 0.6, 0.6);
  const auto text = synthesis_to_json(c, scalar(0.8), scalar(0.8),
                                      ChannelModel::Bernoulli(0.6),
                                      ChannelModel::Bernoulli(0.6));
  const auto rec = parse_synthesis_json(text);
  EXPECT_EQ(rec.gains.K, c.K);
  EXPECT_EQ(rec.gains.L, c.L);
  EXPECT_EQ(rec.P_star, c.controller.P_star);
  EXPECT_EQ(rec.Q_star, c.observer.Q_star);
  EXPECT_EQ(rec.p, 0.6);
  const auto g = parse_gains_json(text);
  EXPECT_EQ(g.K, c.K);
}

TEST(Csv, TraceLayoutAndPrecision) {
  SimConfig cfg;
  cfg.horizon = 3;
  cfg.realizations = 2;
  cfg.mode = LoopMode::kOpenLoop;
  const auto t = simulate(stabilizable_demo_system(), {}, cfg);
  const std::string csv = trace_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,realization,x_sqnorm,e_sqnorm,gamma,xi");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 4);
  EXPECT_NE(csv.find("0,0,0.020000000000000004,0.020000000000000004,"),
            std::string::npos);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

}  // namespace
}  // namespace lurenet
