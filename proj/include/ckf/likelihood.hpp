#pragma once

// Censored prediction-error likelihood of a measurement sequence and
// maximum-likelihood estimation of the latent measurement-noise variance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <tuple>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ckf/errors.hpp"
#include "ckf/filters.hpp"
#include "ckf/model.hpp"
#include "ckf/step_likelihood.hpp"

namespace ckf {

struct LogLikSummary {
  double total = 0.0;
  std::vector<double> per_step;
  std::size_t interior = 0;
  std::size_t at_lower = 0;
  std::size_t at_upper = 0;
};

struct NoiseEstimate {
  double r2_hat = 0.0;
  double loglik_at_opt = -std::numeric_limits<double>::infinity();
  /// Every (r2, loglik) evaluated, grid first, then the refinement.
  std::vector<std::pair<double, double>> search_trace;
  double r2_min = 0.0;
  double r2_max = 0.0;
  /// The maximum sits at an end of the search range; the estimate is unreliable.
  bool at_boundary = false;
};

struct EstimateOptions {
  /// Search range; defaults to [1e-4, 1e2] times the variance of the observed values.
  std::optional<std::pair<double, double>> bounds;
  int grid_points = 25;
  /// Refinement stops once the bracket is narrower than rel_tol * r2.
  double rel_tol = 1e-4;
};

namespace detail {

inline void tally(LogLikSummary& s, const CensoredMeasurement& meas) {
  for (auto st : meas.status) {
    if (st == CensorStatus::Interior) ++s.interior;
    else if (st == CensorStatus::AtLower) ++s.at_lower;
    else ++s.at_upper;
  }
}

/// Likelihood pass. When `include_prior_spread` is false the predictive
/// variance drops the H P^- H^T term and uses R alone; that variant exists
/// only to demonstrate the bias it introduces.
inline LogLikSummary total_loglik_impl(double r2, const StateSpaceModel& model,
                                       std::span<const CensoredMeasurement> data, const LimitPolicy& limits,
                                       const GaussianBelief& init, bool include_prior_spread) {
  if (!(r2 > 0.0) || !std::isfinite(r2)) throw domain_error("total_loglik: r2 must be positive and finite");
  const auto m = model.measurement_dim();
  const StateSpaceModel candidate = model.with_measurement_noise(r2 * Eigen::MatrixXd::Identity(m, m));
  const FilterTrace trace = run_filter(candidate, data, limits, FilterVariant::CKF, init);

  LogLikSummary s;
  s.per_step.reserve(trace.size());
  for (const auto& st : trace.steps) {
    double ll = st.loglik;
    if (!include_prior_spread) {
      const Eigen::VectorXd m_y = candidate.H() * st.prior.mean;
      ll = 0.0;
      for (Eigen::Index i = 0; i < m; ++i)
        ll += step_loglik(m_y[i], r2, st.measurement.value[i], st.measurement.status[static_cast<std::size_t>(i)],
                          st.intervals[static_cast<std::size_t>(i)]);
    }
    s.per_step.push_back(ll);
    s.total += ll;
    tally(s, st.measurement);
  }
  return s;
}

// Golden-section search for a maximum of f on [lo, hi].
inline std::pair<double, double> golden_section_maximize(const std::function<double(double)>& f, double lo, double hi,
                                                         double rel_tol,
                                                         std::vector<std::pair<double, double>>& trace) {
  constexpr double kInvPhi = 0.6180339887498948482;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  trace.emplace_back(x1, f1);
  trace.emplace_back(x2, f2);
  for (int iter = 0; iter < 200 && (hi - lo) > rel_tol * 0.5 * (hi + lo); ++iter) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
      trace.emplace_back(x1, f1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
      trace.emplace_back(x2, f2);
    }
  }
  return f1 >= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

inline double observed_variance(std::span<const CensoredMeasurement> data) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t count = 0;
  for (const auto& d : data)
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      sum += d.value[i];
      sum2 += d.value[i] * d.value[i];
      ++count;
    }
  if (count < 2) return 1.0;
  const double mean = sum / static_cast<double>(count);
  const double var = (sum2 - static_cast<double>(count) * mean * mean) / static_cast<double>(count - 1);
  return var > 0.0 && std::isfinite(var) ? var : 1.0;
}

}  // namespace detail

/// Sum over steps of the censored predictive log-density, with the filter run
/// as a censored Kalman filter under R = r2 I. Interior steps contribute
/// log(phi(e/s)/s) with s^2 = H P^- H^T + r2; censored steps contribute
/// log Phi(a*) or log(1 - Phi(b*)).
inline LogLikSummary total_loglik(double r2, const StateSpaceModel& model, std::span<const CensoredMeasurement> data,
                                  const LimitPolicy& limits, const GaussianBelief& init) {
  return detail::total_loglik_impl(r2, model, data, limits, init, true);
}

inline LogLikSummary total_loglik(double r2, const StateSpaceModel& model, std::span<const CensoredMeasurement> data,
                                  const CensorInterval& interval, const GaussianBelief& init) {
  return total_loglik(r2, model, data, LimitPolicy{FixedLimits{{interval}}}, init);
}

namespace detail {

inline NoiseEstimate estimate_r2_impl(const StateSpaceModel& model, std::span<const CensoredMeasurement> data,
                                      const LimitPolicy& limits, const GaussianBelief& init,
                                      const EstimateOptions& opts, bool include_prior_spread) {
  double lo, hi;
  if (opts.bounds) {
    std::tie(lo, hi) = *opts.bounds;
  } else {
    const double scale = observed_variance(data);
    lo = 1e-4 * scale;
    hi = 1e2 * scale;
  }
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw domain_error("estimate_r2: bounds must satisfy 0 < r2_min < r2_max");
  if (opts.grid_points < 3) throw domain_error("estimate_r2: need at least 3 grid points");
  if (!(opts.rel_tol > 0.0)) throw domain_error("estimate_r2: rel_tol must be positive");

  const auto eval = [&](double r2) {
    const double ll = total_loglik_impl(r2, model, data, limits, init, include_prior_spread).total;
    return std::isnan(ll) ? -std::numeric_limits<double>::infinity() : ll;
  };

  NoiseEstimate est;
  est.r2_min = lo;
  est.r2_max = hi;
  const int n = opts.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  for (int i = 0; i < n; ++i) {
    grid[static_cast<std::size_t>(i)] =
        i == 0 ? lo : (i == n - 1 ? hi : std::exp(log_lo + (log_hi - log_lo) * i / (n - 1)));
    est.search_trace.emplace_back(grid[static_cast<std::size_t>(i)], eval(grid[static_cast<std::size_t>(i)]));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (est.search_trace[i].second > est.search_trace[best].second) best = i;
  est.at_boundary = best == 0 || best + 1 == grid.size();

  const double br_lo = grid[best == 0 ? 0 : best - 1];
  const double br_hi = grid[std::min(best + 1, grid.size() - 1)];
  golden_section_maximize(eval, br_lo, br_hi, opts.rel_tol, est.search_trace);

  const auto top = std::max_element(est.search_trace.begin(), est.search_trace.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; });
  est.r2_hat = top->first;
  est.loglik_at_opt = top->second;
  return est;
}

}  // namespace detail

/// Maximizes total_loglik over r2: a log-spaced grid scan locates the best
/// bracket, then golden-section search refines inside it.
inline NoiseEstimate estimate_r2(const StateSpaceModel& model, std::span<const CensoredMeasurement> data,
                                 const LimitPolicy& limits, const GaussianBelief& init,
                                 const EstimateOptions& opts = {}) {
  return detail::estimate_r2_impl(model, data, limits, init, opts, true);
}

inline NoiseEstimate estimate_r2(const StateSpaceModel& model, std::span<const CensoredMeasurement> data,
                                 const CensorInterval& interval, const GaussianBelief& init,
                                 const EstimateOptions& opts = {}) {
  return estimate_r2(model, data, LimitPolicy{FixedLimits{{interval}}}, init, opts);
}

}  // namespace ckf
