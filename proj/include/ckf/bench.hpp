#pragma once

// Monte Carlo benchmark on the noisy oscillator: paired replications,
// per-coordinate RMSE per filter variant, optional r^2 recovery.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ckf/errors.hpp"
#include "ckf/filters.hpp"
#include "ckf/likelihood.hpp"
#include "ckf/model.hpp"

namespace ckf::bench {

struct ExperimentConfig {
  // Oscillator
  double c = 0.999;
  double omega = 0.005 * 2.0 * std::numbers::pi;
  double q = 0.05;
  double r2 = 0.5;
  // Filter initialization; also the true initial state of every simulation.
  Eigen::VectorXd x0 = Eigen::Vector2d(5.0, 0.0);
  Eigen::MatrixXd P0 = Eigen::Matrix2d::Identity();
  // Censoring
  double lower = -0.5;
  double upper = 0.5;
  // Monte Carlo
  std::size_t steps = 1000;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::vector<FilterVariant> variants{FilterVariant::KF, FilterVariant::MissingKF, FilterVariant::CKF};
  // Noise-variance recovery
  bool estimate_r2 = false;
  std::optional<std::pair<double, double>> r2_bounds;
  /// Run CKF with each replication's r^2 estimate instead of the true value.
  bool ckf_uses_estimate = false;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 1;

  StateSpaceModel model(double r2_override = -1.0) const {
    return oscillator_model(c, omega, q, r2_override > 0.0 ? r2_override : r2);
  }
  CensorInterval interval() const { return {lower, upper}; }
  GaussianBelief init() const { return {x0, P0}; }

  void validate() const {
    if (replications < 1) throw domain_error("config: replications must be >= 1");
    if (steps < 2) throw domain_error("config: steps must be >= 2");
    if (!(lower < upper)) throw domain_error("config: censoring requires lower < upper");
    if (x0.size() != 2 || P0.rows() != 2 || P0.cols() != 2) throw domain_error("config: x0 must be 2-D and P0 2x2");
    if (variants.empty()) throw domain_error("config: no filter variants selected");
    if (ckf_uses_estimate && !estimate_r2) throw domain_error("config: ckf_uses_estimate requires estimate_r2");
    if (r2_bounds && !(r2_bounds->first > 0.0 && r2_bounds->second > r2_bounds->first))
      throw domain_error("config: r2 bounds must satisfy 0 < min < max");
    (void)model();
  }
};

/// Per-coordinate sqrt(mean_t (est - truth)^2).
inline Eigen::VectorXd rmse(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& truth) {
  if (estimates.rows() != truth.rows() || estimates.cols() != truth.cols())
    throw domain_error("rmse: estimates and truth differ in shape");
  if (estimates.rows() == 0) throw domain_error("rmse: empty input");
  return ((estimates - truth).array().square().colwise().sum() / static_cast<double>(estimates.rows()))
      .sqrt()
      .transpose();
}

struct VariantResult {
  FilterVariant variant = FilterVariant::KF;
  Eigen::VectorXd mean_rmse;
  std::vector<Eigen::VectorXd> per_replication;
  double wall_clock_seconds = 0.0;
};

struct R2Summary {
  std::vector<double> estimates;
  std::vector<bool> at_boundary;
  double mean = 0.0;
  double std = 0.0;
  std::size_t boundary_hits = 0;
  double wall_clock_seconds = 0.0;
};

struct BenchReport {
  ExperimentConfig config;
  std::vector<VariantResult> variants;
  std::optional<R2Summary> r2;
  /// Fraction of measurements that were censored, per replication.
  std::vector<double> censored_fraction;

  const VariantResult* find(FilterVariant v) const {
    for (const auto& r : variants)
      if (r.variant == v) return &r;
    return nullptr;
  }
};

/// Everything produced by one replication.
struct ReplicationResult {
  SimulationRecord simulation;
  std::vector<FilterTrace> traces;  // in config.variants order
  std::vector<Eigen::VectorXd> rmse;
  std::vector<double> filter_seconds;
  std::optional<NoiseEstimate> r2;
  double r2_seconds = 0.0;
};

inline ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t rep) {
  using clock = std::chrono::steady_clock;
  ReplicationResult out;
  const auto truth_model = cfg.model();
  out.simulation = simulate(truth_model, cfg.x0, cfg.steps, cfg.interval(), derive_seed(cfg.seed, rep));
  const auto& data = out.simulation.observed;

  double ckf_r2 = cfg.r2;
  if (cfg.estimate_r2) {
    EstimateOptions opts;
    opts.bounds = cfg.r2_bounds;
    const auto t0 = clock::now();
    out.r2 = estimate_r2(truth_model, data, cfg.interval(), cfg.init(), opts);
    out.r2_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (cfg.ckf_uses_estimate) ckf_r2 = out.r2->r2_hat;
  }

  for (auto v : cfg.variants) {
    const auto model = v == FilterVariant::CKF ? cfg.model(ckf_r2) : truth_model;
    const auto t0 = clock::now();
    auto trace = run_filter(model, data, cfg.interval(), v, cfg.init());
    out.filter_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    out.rmse.push_back(rmse(trace.posterior_means(), out.simulation.states));
    out.traces.push_back(std::move(trace));
  }
  return out;
}

namespace detail {

// Calls fn(i) for i in [0, count) on up to `threads` workers; rethrows the first failure.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Runs every replication (in parallel when configured) and reduces the
/// results in replication order, so the report does not depend on scheduling.
inline BenchReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t reps = cfg.replications;
  const std::size_t nv = cfg.variants.size();

  std::vector<std::vector<Eigen::VectorXd>> rmses(reps);
  std::vector<std::vector<double>> seconds(reps);
  std::vector<std::optional<NoiseEstimate>> r2s(reps);
  std::vector<double> r2_seconds(reps, 0.0);
  std::vector<double> censored(reps, 0.0);

  detail::parallel_for(reps, cfg.threads, [&](std::size_t rep) {
    auto r = run_replication(cfg, rep);
    rmses[rep] = std::move(r.rmse);
    seconds[rep] = std::move(r.filter_seconds);
    r2s[rep] = std::move(r.r2);
    r2_seconds[rep] = r.r2_seconds;
    std::size_t count = 0;
    for (const auto& m : r.simulation.observed) count += m.any_censored() ? 1 : 0;
    censored[rep] = static_cast<double>(count) / static_cast<double>(r.simulation.steps());
  });

  BenchReport report;
  report.config = cfg;
  report.censored_fraction = std::move(censored);
  for (std::size_t k = 0; k < nv; ++k) {
    VariantResult vr;
    vr.variant = cfg.variants[k];
    vr.mean_rmse = Eigen::VectorXd::Zero(2);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      vr.per_replication.push_back(rmses[rep][k]);
      vr.mean_rmse += rmses[rep][k];
      vr.wall_clock_seconds += seconds[rep][k];
    }
    vr.mean_rmse /= static_cast<double>(reps);
    report.variants.push_back(std::move(vr));
  }
  if (cfg.estimate_r2) {
    R2Summary s;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      s.estimates.push_back(r2s[rep]->r2_hat);
      s.at_boundary.push_back(r2s[rep]->at_boundary);
      s.boundary_hits += r2s[rep]->at_boundary ? 1 : 0;
      s.wall_clock_seconds += r2_seconds[rep];
      s.mean += r2s[rep]->r2_hat;
    }
    s.mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double e : s.estimates) ss += (e - s.mean) * (e - s.mean);
    s.std = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    report.r2 = std::move(s);
  }
  return report;
}

}  // namespace ckf::bench
