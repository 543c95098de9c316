#include <gtest/gtest.h>

#include <json.hpp>

#include "snot/error.hpp"
#include "snot/experiments.hpp"
#include "snot/train_config.hpp"

using namespace snot;
using nlohmann::json;

TEST(Config, ParsesTrainDocument) {
  const json j = json::parse(R"({
    "d": 2, "hidden_width": 8, "iterations": 100, "K_T": 4, "lambda_R1": 0.5,
    "schedule": {"kind": "rate_optimal", "m": 1, "E_absY": 0.8, "eps_min": 0.1, "period": 50},
    "source": {"kind": "perpendicular", "manifold_dim": 1},
    "target": {"kind": "perpendicular", "manifold_dim": 1}
  })");
  const RunSpec r = parse_run_spec(j);
  EXPECT_EQ(r.config.d, 2);
  EXPECT_EQ(r.config.k_t, 4);
  EXPECT_EQ(r.config.lambda_r1, 0.5);
  EXPECT_EQ(r.source.side, Side::Source);
  EXPECT_EQ(r.target.side, Side::Target);
  const auto* s = std::get_if<RateOptimalSchedule>(&r.config.schedule);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->e_abs_y, 0.8);
  EXPECT_EQ(s->period, 50);
  // Round trip through the emitter.
  const RunSpec back = parse_run_spec(to_json(r));
  EXPECT_EQ(to_json(back), to_json(r));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  json ok = json::parse(R"({"d": 1, "source": {"kind": "point_mass"}, "target": {"kind": "point_mass"}})");
  EXPECT_NO_THROW(parse_run_spec(ok));
  json j = ok;
  j["itertions"] = 5;
  EXPECT_THROW(parse_run_spec(j), ConfigError);
  j = ok;
  j["d"] = 0;
  EXPECT_THROW(parse_run_spec(j), ConfigError);
  j = ok;
  j["schedule"] = {{"kind", "cosine"}};
  EXPECT_THROW(parse_run_spec(j), ConfigError);
  j = ok;
  j["source"]["ambient_dim"] = 2;
  EXPECT_THROW(parse_run_spec(j), ConfigError);
  j = ok;
  j.erase("target");
  EXPECT_THROW(parse_run_spec(j), ConfigError);
}

TEST(Config, StepwiseTotalDefaultsToIterations) {
  const RunSpec r = parse_run_spec(json::parse(R"({"d": 1, "iterations": 777, "schedule": {"kind": "stepwise_linear"},
                                             "source": {"kind": "point_mass"}, "target": {"kind": "point_mass"}})"));
  EXPECT_EQ(std::get<StepwiseLinearSchedule>(r.config.schedule).total, 777);
}

TEST(Slope, GridAndTinyRun) {
  const Matrix g = cube_midpoint_grid(2, 4, 4);
  ASSERT_EQ(g.rows(), 16);
  ASSERT_EQ(g.cols(), 4);
  EXPECT_TRUE(g.rightCols(2).isZero(0.0));
  EXPECT_NEAR(g.col(0).mean(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(g.col(0).maxCoeff(), 0.75);

  SlopeParams p;
  p.m = 1;
  p.d = 2;
  p.eps_list = {0.0};
  p.n_list = {8, 16, 32};
  p.replicates = 3;
  p.grid_per_axis = 64;
  const SlopeResult a = run_slope(p, 2), b = run_slope(p, 1);
  ASSERT_EQ(a.rows.size(), 3u);
  ASSERT_EQ(a.fits.size(), 1u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.rows[i].mean, b.rows[i].mean);
  EXPECT_LT(a.fits[0].fit.slope, 0.0);
}

TEST(Slope, CapacityBecomesWarning) {
  SlopeParams p;
  p.m = 1;
  p.d = 1;
  p.eps_list = {0.1};
  p.n_list = {4, 8, 16, 1000};
  p.replicates = 2;
  p.grid_per_axis = 32;
  p.max_entries = 32 * 100;
  const SlopeResult r = run_slope(p, 1);
  EXPECT_EQ(r.rows.size(), 3u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(TerminalNoise, AffineMapBetweenCubes) {
  DatasetSpec s;
  s.kind = DatasetKind::UniformCubeEmbedded;
  s.ambient_dim = 3;
  s.manifold_dim = 2;
  s.params.low = 0.0;
  s.params.high = 1.0;
  DatasetSpec t = s;
  t.side = Side::Target;
  t.params.high = 2.0;
  t.params.offset = Vector(3);
  t.params.offset << 0.0, 0.0, 0.5;
  Matrix x(1, 3);
  x << 0.25, 1.0, 0.0;
  const Matrix y = cube_affine_map(s, t, x);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(y(0, 2), 0.5);
}

TEST(ScheduleTrace, ParsesParams) {
  const auto p = parse_schedule_trace_params(
      json::parse(R"({"schedule": {"kind": "constant", "eps": 0.2}, "iterations": 10, "batch_size": 4})"));
  EXPECT_EQ(p.iterations, 10);
  EXPECT_EQ(p.batch_size, 4);
  EXPECT_EQ(std::get<ConstantSchedule>(p.schedule).eps, 0.2);
}
