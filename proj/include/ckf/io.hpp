#pragma once

// CSV and JSON encodings of simulation records, filter traces, noise
// estimates, normality grids and benchmark reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ckf/bench.hpp"
#include "ckf/diagnostics.hpp"
#include "ckf/errors.hpp"
#include "ckf/filters.hpp"
#include "ckf/likelihood.hpp"
#include "ckf/model.hpp"

namespace ckf::io {

using nlohmann::json;

namespace detail {

inline std::ostream& full_precision(std::ostream& os) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  return os;
}

inline json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
  return rows;
}

// Infinite limits are written as null.
inline json limit(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline double limit_from(const json& j, double if_null) { return j.is_null() ? if_null : j.get<double>(); }

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw domain_error("csv: '" + s + "' is not a number");
  }
  if (used != s.size()) throw domain_error("csv: '" + s + "' is not a number");
  return v;
}

inline void write_status_header(std::ostream& os, Eigen::Index m) {
  for (Eigen::Index i = 1; i <= m; ++i) os << ",status_" << i;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SimulationRecord
// ---------------------------------------------------------------------------

/// Columns: t, x_1..x_n, ystar_1..ystar_m, y_1..y_m, status_1..status_m.
inline void write_simulation_csv(std::ostream& os, const SimulationRecord& rec) {
  const auto n = rec.states.cols();
  const auto m = rec.latent.cols();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",ystar_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",y_" << i;
  detail::write_status_header(os, m);
  os << '\n';
  detail::full_precision(os);
  for (std::size_t t = 0; t < rec.steps(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    os << t + 1;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << rec.states(r, i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << rec.latent(r, i);
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << rec.observed[t].value[i];
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << to_string(rec.observed[t].status[static_cast<std::size_t>(i)]);
    os << '\n';
  }
}

/// Inverse of write_simulation_csv. Censoring intervals are not part of the
/// CSV and are left empty.
inline SimulationRecord read_simulation_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw domain_error("simulation csv: missing header");
  const auto header = detail::split(line);
  Eigen::Index n = 0, m = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++n;
    else if (h.rfind("ystar_", 0) == 0) ++m;
  }
  if (header.empty() || header[0] != "t" || n == 0 || m == 0 ||
      static_cast<Eigen::Index>(header.size()) != 1 + n + 3 * m)
    throw domain_error("simulation csv: unexpected header '" + line + "'");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = detail::split(line);
    if (cells.size() != header.size()) throw domain_error("simulation csv: ragged row '" + line + "'");
    rows.push_back(std::move(cells));
  }
  SimulationRecord rec;
  const auto T = static_cast<Eigen::Index>(rows.size());
  rec.states.resize(T, n);
  rec.latent.resize(T, m);
  for (Eigen::Index r = 0; r < T; ++r) {
    const auto& c = rows[static_cast<std::size_t>(r)];
    CensoredMeasurement meas{Eigen::VectorXd(m), std::vector<CensorStatus>(static_cast<std::size_t>(m))};
    for (Eigen::Index i = 0; i < n; ++i) rec.states(r, i) = detail::parse_double(c[static_cast<std::size_t>(1 + i)]);
    for (Eigen::Index i = 0; i < m; ++i) {
      rec.latent(r, i) = detail::parse_double(c[static_cast<std::size_t>(1 + n + i)]);
      meas.value[i] = detail::parse_double(c[static_cast<std::size_t>(1 + n + m + i)]);
      meas.status[static_cast<std::size_t>(i)] = parse_status(c[static_cast<std::size_t>(1 + n + 2 * m + i)]);
    }
    rec.observed.push_back(std::move(meas));
  }
  return rec;
}

inline json to_json(const SimulationRecord& rec) {
  json obs = json::array();
  for (const auto& o : rec.observed) {
    json status = json::array();
    for (auto s : o.status) status.push_back(std::string(to_string(s)));
    obs.push_back({{"value", detail::vec(o.value)}, {"status", status}});
  }
  json ivs = json::array();
  for (const auto& iv : rec.intervals) ivs.push_back({{"lower", detail::limit(iv.lower)}, {"upper", detail::limit(iv.upper)}});
  return {{"steps", rec.steps()},
          {"states", detail::mat(rec.states)},
          {"latent", detail::mat(rec.latent)},
          {"observed", obs},
          {"intervals", ivs}};
}

inline SimulationRecord simulation_from_json(const json& j) {
  SimulationRecord rec;
  const auto rows = [](const json& a) {
    const auto T = static_cast<Eigen::Index>(a.size());
    const auto w = T ? static_cast<Eigen::Index>(a[0].size()) : 0;
    Eigen::MatrixXd out(T, w);
    for (Eigen::Index r = 0; r < T; ++r)
      for (Eigen::Index c = 0; c < w; ++c) out(r, c) = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    return out;
  };
  rec.states = rows(j.at("states"));
  rec.latent = rows(j.at("latent"));
  for (const auto& o : j.at("observed")) {
    const auto v = o.at("value").get<std::vector<double>>();
    CensoredMeasurement meas{Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())), {}};
    for (const auto& s : o.at("status")) meas.status.push_back(parse_status(s.get<std::string>()));
    rec.observed.push_back(std::move(meas));
  }
  for (const auto& iv : j.at("intervals"))
    rec.intervals.push_back({detail::limit_from(iv.at("lower"), -kInf), detail::limit_from(iv.at("upper"), kInf)});
  return rec;
}

// ---------------------------------------------------------------------------
// FilterTrace
// ---------------------------------------------------------------------------

/// Columns: t, prior_mean_1..n, prior_var_1..n, post_mean_1..n, post_var_1..n,
/// status_1..m, step_loglik.
inline void write_trace_csv(std::ostream& os, const FilterTrace& trace) {
  const auto n = trace.final_belief.mean.size();
  const auto m = trace.steps.empty() ? Eigen::Index{0} : trace.steps.front().measurement.size();
  os << "t";
  for (const char* prefix : {"prior_mean_", "prior_var_", "post_mean_", "post_var_"})
    for (Eigen::Index i = 1; i <= n; ++i) os << ',' << prefix << i;
  detail::write_status_header(os, m);
  os << ",step_loglik\n";
  detail::full_precision(os);
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const auto& s = trace.steps[t];
    os << t + 1;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << s.prior.mean[i];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << s.prior.cov(i, i);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << s.posterior.mean[i];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << s.posterior.cov(i, i);
    for (auto st : s.measurement.status) os << ',' << to_string(st);
    os << ',' << s.loglik << '\n';
  }
}

inline json to_json(const GaussianBelief& b) { return {{"mean", detail::vec(b.mean)}, {"cov", detail::mat(b.cov)}}; }

inline json to_json(const FilterTrace& trace) {
  json steps = json::array();
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const auto& s = trace.steps[t];
    json status = json::array();
    for (auto st : s.measurement.status) status.push_back(std::string(to_string(st)));
    steps.push_back({{"t", t + 1},
                     {"prior", to_json(s.prior)},
                     {"posterior", to_json(s.posterior)},
                     {"measurement", detail::vec(s.measurement.value)},
                     {"status", status},
                     {"step_loglik", s.loglik},
                     {"max_abs_correlation", s.max_abs_correlation},
                     {"high_correlation", s.high_correlation},
                     {"clamped", s.clamped}});
  }
  return {{"variant", std::string(to_string(trace.variant))},
          {"total_loglik", trace.total_loglik()},
          {"high_correlation_steps", trace.high_correlation_steps},
          {"clamp_events", trace.clamp_events},
          {"final", to_json(trace.final_belief)},
          {"steps", steps}};
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

inline json to_json(const NoiseEstimate& e) {
  json trace = json::array();
  for (const auto& [r2, ll] : e.search_trace) trace.push_back({{"r2", r2}, {"loglik", ll}});
  return {{"r2_hat", e.r2_hat},     {"loglik_at_opt", e.loglik_at_opt}, {"r2_min", e.r2_min},
          {"r2_max", e.r2_max},     {"at_boundary", e.at_boundary},     {"search_trace", trace}};
}

inline json to_json(const LogLikSummary& s) {
  return {{"total", s.total},
          {"per_step", s.per_step},
          {"counts", {{"interior", s.interior}, {"at_lower", s.at_lower}, {"at_upper", s.at_upper}}}};
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Columns: a, rho, ks_stat, reject.
inline void write_grid_csv(std::ostream& os, std::span<const diagnostics::GridCell> cells) {
  os << "a,rho,ks_stat,reject\n";
  detail::full_precision(os);
  for (const auto& c : cells)
    os << c.verdict.a << ',' << c.verdict.rho << ',' << c.verdict.ks_stat << ',' << (c.verdict.reject ? 1 : 0) << '\n';
}

/// Columns: x, density.
inline void write_density_csv(std::ostream& os, std::span<const std::pair<double, double>> curve) {
  os << "x,density\n";
  detail::full_precision(os);
  for (const auto& [x, f] : curve) os << x << ',' << f << '\n';
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

inline json to_json(const bench::ExperimentConfig& c) {
  json variants = json::array();
  for (auto v : c.variants) variants.push_back(std::string(to_string(v)));
  json j = {{"model", {{"c", c.c}, {"omega", c.omega}, {"q", c.q}, {"r2", c.r2}}},
            {"init", {{"x0", detail::vec(c.x0)}, {"P0", detail::mat(c.P0)}}},
            {"censoring", {{"lower", detail::limit(c.lower)}, {"upper", detail::limit(c.upper)}}},
            {"run", {{"steps", c.steps}, {"replications", c.replications}, {"seed", c.seed}, {"variants", variants}}},
            {"estimation", {{"enabled", c.estimate_r2}, {"ckf_uses_estimate", c.ckf_uses_estimate}}}};
  if (c.r2_bounds) {
    j["estimation"]["r2_min"] = c.r2_bounds->first;
    j["estimation"]["r2_max"] = c.r2_bounds->second;
  }
  return j;
}

/// The report proper is deterministic given the config; wall-clock figures
/// live under "timing" only.
inline json to_json(const bench::BenchReport& r) {
  json variants = json::array();
  json timing = json::object();
  for (const auto& v : r.variants) {
    variants.push_back({{"variant", std::string(to_string(v.variant))}, {"mean_rmse", detail::vec(v.mean_rmse)}});
    timing[std::string(to_string(v.variant))] = v.wall_clock_seconds;
  }
  double cf = 0.0;
  for (double f : r.censored_fraction) cf += f;
  cf /= static_cast<double>(std::max<std::size_t>(1, r.censored_fraction.size()));
  json j = {{"config", to_json(r.config)}, {"variants", variants}, {"mean_censored_fraction", cf}};
  if (r.r2) {
    j["r2_estimation"] = {{"mean", r.r2->mean},
                          {"std", r.r2->std},
                          {"boundary_hits", r.r2->boundary_hits},
                          {"estimates", r.r2->estimates}};
    timing["r2_estimation"] = r.r2->wall_clock_seconds;
  }
  j["timing"] = timing;
  return j;
}

/// Columns: replication, variant, rmse_1..rmse_n[, r2_hat].
inline void write_replications_csv(std::ostream& os, const bench::BenchReport& r) {
  const auto n = r.variants.empty() ? Eigen::Index{0} : r.variants.front().mean_rmse.size();
  os << "replication,variant";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",rmse_" << i;
  if (r.r2) os << ",r2_hat";
  os << '\n';
  detail::full_precision(os);
  for (std::size_t rep = 0; rep < r.config.replications; ++rep)
    for (const auto& v : r.variants) {
      os << rep << ',' << to_string(v.variant);
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << v.per_replication[rep][i];
      if (r.r2) os << ',' << r.r2->estimates[rep];
      os << '\n';
    }
}

}  // namespace ckf::io
