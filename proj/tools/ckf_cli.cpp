// Command-line front end: simulate, filter, bench, estimate-r2, table1.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ckf/ckf.hpp"
#include "ckf/config.hpp"
#include "ckf/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> variants;
};

ckf::bench::ExperimentConfig load_config(const Common& c) {
  auto cfg = c.config_path.empty() ? ckf::bench::ExperimentConfig{} : ckf::config::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.variants.empty()) {
    cfg.variants.clear();
    for (const auto& v : c.variants) cfg.variants.push_back(ckf::parse_variant(v));
  }
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

template <class Writer>
std::string write_file(const fs::path& path, Writer&& w) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  w(os);
  if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
  return path.string();
}

std::string write_json(const fs::path& path, const json& j) {
  return write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

ckf::SimulationRecord load_or_simulate(const ckf::bench::ExperimentConfig& cfg, const std::string& input,
                                       std::size_t replication) {
  if (input.empty())
    return ckf::simulate(cfg.model(), cfg.x0, cfg.steps, cfg.interval(), ckf::derive_seed(cfg.seed, replication));
  std::ifstream is(input);
  if (!is) throw ckf::domain_error("cannot open input '" + input + "'");
  auto rec = ckf::io::read_simulation_csv(is);
  rec.intervals.assign(static_cast<std::size_t>(rec.latent.cols()), cfg.interval());
  return rec;
}

void add_common(CLI::App* cmd, Common& c, bool with_variants) {
  cmd->add_option("-c,--config", c.config_path, "TOML experiment configuration")->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", c.seed, "Override the configured seed");
  cmd->add_option("-o,--out", c.out_dir, "Output directory")->capture_default_str();
  if (with_variants) cmd->add_option("-v,--variant", c.variants, "Filter variant(s): KF, MissingKF, CKF");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Censored Kalman filtering experiments"};
  app.require_subcommand(1);

  Common common;
  std::size_t replication = 0;
  std::string input;
  std::optional<double> adaptive_c;
  std::optional<double> r2_override;
  std::optional<double> r2_min, r2_max;
  unsigned threads = 0;
  bool threads_set = false;
  bool dump_traces = false;
  std::uint64_t table_seed = 20190601;
  std::size_t table_n = 1000;
  double alpha = 0.05;
  std::optional<double> density_rho, density_a;

  auto* sim = app.add_subcommand("simulate", "Simulate one censored oscillator realization");
  add_common(sim, common, false);
  sim->add_option("-r,--replication", replication, "Replication index (selects the derived seed)");

  auto* filt = app.add_subcommand("filter", "Run filters over one realization and dump their traces");
  add_common(filt, common, true);
  filt->add_option("-r,--replication", replication, "Replication index when simulating");
  filt->add_option("-i,--input", input, "Simulation CSV to filter instead of simulating")->check(CLI::ExistingFile);
  filt->add_option("--adaptive-c", adaptive_c, "Use adaptive limits (H x^- +/- c) instead of the configured ones");
  filt->add_option("--r2", r2_override, "Measurement variance assumed by the filters");

  auto* ben = app.add_subcommand("bench", "Monte Carlo RMSE benchmark");
  add_common(ben, common, true);
  ben->add_option("-j,--threads", threads, "Worker threads (0 = all cores)")->each([&](const std::string&) {
    threads_set = true;
  });
  ben->add_flag("--traces", dump_traces, "Also dump replication-0 traces for plotting");

  auto* est = app.add_subcommand("estimate-r2", "Maximum-likelihood estimate of the measurement variance");
  add_common(est, common, false);
  est->add_option("-r,--replication", replication, "Replication index when simulating");
  est->add_option("-i,--input", input, "Simulation CSV instead of simulating")->check(CLI::ExistingFile);
  est->add_option("--r2-min", r2_min, "Lower end of the search range");
  est->add_option("--r2-max", r2_max, "Upper end of the search range");

  auto* tab = app.add_subcommand("table1", "K-S normality grid of x | y* <= a");
  tab->add_option("-s,--seed", table_seed, "Seed")->capture_default_str();
  tab->add_option("-n,--samples", table_n, "Samples per cell")->capture_default_str();
  tab->add_option("--alpha", alpha, "Significance level")->capture_default_str();
  tab->add_option("-o,--out", common.out_dir, "Output directory")->capture_default_str();
  tab->add_option("--density-rho", density_rho, "Also dump f(x | y* <= a) for this correlation");
  tab->add_option("--density-a", density_a, "Limit a for the density dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }

  try {
    json outputs = json::array();
    if (sim->parsed()) {
      const auto cfg = load_config(common);
      const auto out = prepare_out(common.out_dir);
      const auto rec = ckf::simulate(cfg.model(), cfg.x0, cfg.steps, cfg.interval(), ckf::derive_seed(cfg.seed, replication));
      outputs.push_back(write_file(out / "simulation.csv", [&](std::ostream& os) { ckf::io::write_simulation_csv(os, rec); }));
      outputs.push_back(write_json(out / "simulation.json", ckf::io::to_json(rec)));
    } else if (filt->parsed()) {
      const auto cfg = load_config(common);
      const auto out = prepare_out(common.out_dir);
      const auto rec = load_or_simulate(cfg, input, replication);
      const auto model = cfg.model(r2_override.value_or(-1.0));
      const ckf::LimitPolicy limits = adaptive_c ? ckf::LimitPolicy{ckf::AdaptiveLimits{*adaptive_c}}
                                                 : ckf::LimitPolicy{ckf::FixedLimits{rec.intervals}};
      // Adaptive limits censor the latent values on the fly.
      std::vector<ckf::CensoredMeasurement> data = rec.observed;
      if (adaptive_c)
        for (std::size_t t = 0; t < data.size(); ++t) data[t] = {rec.latent.row(static_cast<Eigen::Index>(t)).transpose(), data[t].status};
      for (auto v : cfg.variants) {
        const auto trace = ckf::run_filter(model, data, limits, v, cfg.init());
        const std::string stem = "trace_" + std::string(ckf::to_string(v));
        outputs.push_back(write_file(out / (stem + ".csv"), [&](std::ostream& os) { ckf::io::write_trace_csv(os, trace); }));
        outputs.push_back(write_json(out / (stem + ".json"), ckf::io::to_json(trace)));
      }
    } else if (ben->parsed()) {
      auto cfg = load_config(common);
      if (threads_set) cfg.threads = threads;
      const auto out = prepare_out(common.out_dir);
      const auto report = ckf::bench::run_experiment(cfg);
      outputs.push_back(write_json(out / "report.json", ckf::io::to_json(report)));
      outputs.push_back(
          write_file(out / "replications.csv", [&](std::ostream& os) { ckf::io::write_replications_csv(os, report); }));
      if (dump_traces) {
        const auto rep0 = ckf::bench::run_replication(cfg, 0);
        outputs.push_back(write_file(out / "replication0_simulation.csv",
                                     [&](std::ostream& os) { ckf::io::write_simulation_csv(os, rep0.simulation); }));
        for (const auto& trace : rep0.traces)
          outputs.push_back(write_file(out / ("replication0_trace_" + std::string(ckf::to_string(trace.variant)) + ".csv"),
                                       [&](std::ostream& os) { ckf::io::write_trace_csv(os, trace); }));
      }
    } else if (est->parsed()) {
      const auto cfg = load_config(common);
      const auto out = prepare_out(common.out_dir);
      const auto rec = load_or_simulate(cfg, input, replication);
      ckf::EstimateOptions opts;
      opts.bounds = cfg.r2_bounds;
      if (r2_min.has_value() != r2_max.has_value()) throw ckf::domain_error("give both --r2-min and --r2-max");
      if (r2_min) opts.bounds = std::pair{*r2_min, *r2_max};
      const auto e = ckf::estimate_r2(cfg.model(), rec.observed, ckf::LimitPolicy{ckf::FixedLimits{rec.intervals}},
                                      cfg.init(), opts);
      outputs.push_back(write_json(out / "noise_estimate.json", ckf::io::to_json(e)));
    } else if (tab->parsed()) {
      const auto out = prepare_out(common.out_dir);
      const auto cells = ckf::diagnostics::table1_experiment(table_seed, table_n, alpha);
      outputs.push_back(write_file(out / "table1.csv", [&](std::ostream& os) { ckf::io::write_grid_csv(os, cells); }));
      if (density_rho.has_value() != density_a.has_value())
        throw ckf::domain_error("give both --density-rho and --density-a");
      if (density_rho) {
        const auto curve = ckf::diagnostics::density_curve(*density_rho, *density_a, -5.0, 5.0, 501);
        outputs.push_back(write_file(out / "density.csv", [&](std::ostream& os) { ckf::io::write_density_csv(os, curve); }));
      }
      const auto agreement = ckf::diagnostics::compare_to_reference(cells);
      std::cout << json{{"reference_agreement", agreement.fraction()}, {"corners_match", agreement.corners_match}}.dump()
                << '\n';
    }
    std::cout << json{{"outputs", outputs}}.dump() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::string kind = "error";
    if (dynamic_cast<const ckf::domain_error*>(&e)) kind = "domain_error";
    else if (dynamic_cast<const ckf::numeric_error*>(&e)) kind = "numeric_error";
    else if (dynamic_cast<const ckf::contract_error*>(&e)) kind = "contract_error";
    std::cerr << json{{"error", {{"kind", kind}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
}
