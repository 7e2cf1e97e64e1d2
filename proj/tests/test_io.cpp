#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ckf/config.hpp"
#include "ckf/io.hpp"

namespace {

ckf::SimulationRecord sample_record() {
  const auto model = ckf::oscillator_model(0.999, 0.005 * 2.0 * std::numbers::pi, 0.05, 0.5);
  return ckf::simulate(model, Eigen::Vector2d(5.0, 0.0), 50, ckf::CensorInterval{-0.5, ckf::kInf}, 3);
}

}  // namespace

TEST(SimulationCsv, RoundTripIsExact) {
  const auto rec = sample_record();
  std::stringstream ss;
  ckf::io::write_simulation_csv(ss, rec);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  EXPECT_EQ(header, "t,x_1,x_2,ystar_1,y_1,status_1");
  const auto back = ckf::io::read_simulation_csv(ss);
  EXPECT_EQ(back.states, rec.states);
  EXPECT_EQ(back.latent, rec.latent);
  ASSERT_EQ(back.steps(), rec.steps());
  for (std::size_t t = 0; t < rec.steps(); ++t) {
    EXPECT_EQ(back.observed[t].value, rec.observed[t].value);
    EXPECT_EQ(back.observed[t].status, rec.observed[t].status);
  }
}

TEST(SimulationCsv, RejectsMalformed) {
  std::stringstream bad_header("time,x\n1,2\n");
  EXPECT_THROW(ckf::io::read_simulation_csv(bad_header), ckf::domain_error);
  std::stringstream bad_cell("t,x_1,ystar_1,y_1,status_1\n1,0.5,abc,0.5,interior\n");
  EXPECT_THROW(ckf::io::read_simulation_csv(bad_cell), ckf::domain_error);
  std::stringstream bad_status("t,x_1,ystar_1,y_1,status_1\n1,0.5,0.1,0.1,maybe\n");
  EXPECT_THROW(ckf::io::read_simulation_csv(bad_status), ckf::domain_error);
}

TEST(SimulationJson, RoundTripKeepsInfiniteLimits) {
  const auto rec = sample_record();
  const auto j = ckf::io::to_json(rec);
  EXPECT_TRUE(j["intervals"][0]["upper"].is_null());
  const auto back = ckf::io::simulation_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.states, rec.states);
  ASSERT_EQ(back.intervals.size(), 1u);
  EXPECT_EQ(back.intervals[0].lower, -0.5);
  EXPECT_EQ(back.intervals[0].upper, ckf::kInf);
}

TEST(TraceOutput, CsvAndJsonShapes) {
  const auto rec = sample_record();
  const auto model = ckf::oscillator_model(0.999, 0.005 * 2.0 * std::numbers::pi, 0.05, 0.5);
  const auto trace = ckf::run_filter(model, rec.observed, rec.intervals[0], ckf::FilterVariant::CKF,
                                     {Eigen::Vector2d(5.0, 0.0), Eigen::Matrix2d::Identity()});
  std::stringstream ss;
  ckf::io::write_trace_csv(ss, trace);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header,
            "t,prior_mean_1,prior_mean_2,prior_var_1,prior_var_2,post_mean_1,post_mean_2,post_var_1,post_var_2,status_1,"
            "step_loglik");
  int rows = 0;
  for (std::string line; std::getline(ss, line);) ++rows;
  EXPECT_EQ(rows, 50);
  const auto j = ckf::io::to_json(trace);
  EXPECT_EQ(j["variant"], "CKF");
  EXPECT_EQ(j["steps"].size(), 50u);
  EXPECT_DOUBLE_EQ(j["total_loglik"].get<double>(), trace.total_loglik());
}

TEST(Config, ParsesAllSections) {
  const auto cfg = ckf::config::parse(R"(
[model]
c = 1.0
frequency = 0.01
q = 0.1
r2 = 0.25
[init]
x0 = [1.0, 2.0]
P0 = [[2.0, 0.0], [0.0, 3.0]]
[censoring]
lower = -1.5
[run]
steps = 10
replications = 3
seed = 99
variants = ["CKF", "KF"]
[estimation]
enabled = true
r2_min = 0.01
r2_max = 5.0
)");
  EXPECT_EQ(cfg.c, 1.0);
  EXPECT_NEAR(cfg.omega, 0.02 * std::numbers::pi, 1e-15);
  EXPECT_EQ(cfg.q, 0.1);
  EXPECT_EQ(cfg.r2, 0.25);
  EXPECT_EQ(cfg.x0, Eigen::Vector2d(1.0, 2.0));
  EXPECT_EQ(cfg.P0(1, 1), 3.0);
  EXPECT_EQ(cfg.lower, -1.5);
  EXPECT_EQ(cfg.upper, ckf::kInf);
  EXPECT_EQ(cfg.steps, 10u);
  EXPECT_EQ(cfg.replications, 3u);
  EXPECT_EQ(cfg.seed, 99u);
  ASSERT_EQ(cfg.variants.size(), 2u);
  EXPECT_EQ(cfg.variants[0], ckf::FilterVariant::CKF);
  EXPECT_TRUE(cfg.estimate_r2);
  ASSERT_TRUE(cfg.r2_bounds.has_value());
  EXPECT_EQ(cfg.r2_bounds->second, 5.0);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(ckf::config::parse("[model]\nc = 'fast'\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[model]\ndamping = 1.0\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[extras]\nx = 1\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[model]\nomega = 0.1\nfrequency = 0.1\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[run]\nreplications = -1\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[run]\nvariants = ['EKF']\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[censoring]\nlower = 1.0\nupper = 0.0\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[estimation]\nr2_min = 0.1\n"), ckf::domain_error);
  EXPECT_THROW(ckf::config::parse("[model\nc = 1"), ckf::domain_error);
  EXPECT_THROW(ckf::config::load("/nonexistent/config.toml"), ckf::domain_error);
}

TEST(Config, ShippedConfigsLoad) {
  const auto damped = ckf::config::load(CKF_SOURCE_DIR "/configs/table2_damped.toml");
  EXPECT_EQ(damped.c, 0.999);
  EXPECT_TRUE(damped.ckf_uses_estimate);
  const auto undamped = ckf::config::load(CKF_SOURCE_DIR "/configs/table3_undamped.toml");
  EXPECT_EQ(undamped.c, 1.0);
  EXPECT_FALSE(undamped.estimate_r2);
}
