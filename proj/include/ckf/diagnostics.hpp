#pragma once

// Empirical normality study of x | y* <= a for a standardized bivariate normal
// pair with correlation rho, and the exact sampler behind it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "ckf/errors.hpp"
#include "ckf/model.hpp"
#include "ckf/truncnorm.hpp"

namespace ckf::diagnostics {

struct NormalityVerdict {
  double a = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double ks_stat = 0.0;
  double critical = 0.0;
  bool reject = false;
  std::size_t n = 0;
};

inline double standard_normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

/// Draws n values of x given y* <= a, where (x, y*) is standard bivariate
/// normal with correlation rho. y* is drawn from the truncated law by inverse
/// CDF and x | y* ~ N(rho y*, 1 - rho^2), so every draw is kept.
inline std::vector<double> sample_conditional_lower(double rho, double a, std::size_t n, std::uint64_t seed) {
  if (!(std::abs(rho) < 1.0)) throw domain_error("sample_conditional_lower: |rho| must be < 1");
  if (n < 1) throw domain_error("sample_conditional_lower: n must be >= 1");
  if (std::isnan(a)) throw domain_error("sample_conditional_lower: NaN limit");
  const double mass = truncnorm::normal_cdf(a);
  if (!(mass > 0.0)) throw domain_error("sample_conditional_lower: limit too far in the lower tail to sample");

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double spread = std::sqrt(1.0 - rho * rho);
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const double u = unif(rng);
    if (u <= 0.0) continue;
    const double y = standard_normal_quantile(u * mass);
    out.push_back(rho * y + spread * normal(rng));
  }
  return out;
}

/// f(x | y* <= a) = phi(x) Phi((a - rho x) / sqrt(1 - rho^2)) / Phi(a).
inline double conditional_density_lower(double x, double rho, double a) {
  if (!(std::abs(rho) < 1.0)) throw domain_error("conditional_density_lower: |rho| must be < 1");
  const double s = std::sqrt(1.0 - rho * rho);
  const double log_f =
      truncnorm::normal_log_pdf(x) + truncnorm::log_normal_cdf((a - rho * x) / s) - truncnorm::log_normal_cdf(a);
  return std::exp(log_f);
}

/// Points (x, f(x | y* <= a)) on a uniform grid, for plotting.
inline std::vector<std::pair<double, double>> density_curve(double rho, double a, double x_min, double x_max,
                                                            std::size_t points) {
  if (points < 2 || !(x_max > x_min)) throw domain_error("density_curve: need >= 2 points on a non-empty range");
  std::vector<std::pair<double, double>> out;
  out.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(points - 1);
    out.emplace_back(x, conditional_density_lower(x, rho, a));
  }
  return out;
}

/// Asymptotic one-sample Kolmogorov-Smirnov critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
inline double ks_critical_value(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw domain_error("ks_critical_value: alpha must be in (0, 1)");
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(static_cast<double>(n));
}

/// K-S distance between the sample and the normal with the sample's own mean
/// and standard deviation, judged against the asymptotic critical value
/// (no Lilliefors correction).
inline NormalityVerdict ks_normality_test(std::span<const double> samples, double alpha = 0.05) {
  const std::size_t n = samples.size();
  if (n < 50) throw domain_error("ks_normality_test: need at least 50 samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) throw domain_error("ks_normality_test: degenerate sample (zero variance)");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double F = truncnorm::normal_cdf((sorted[i] - mean) / sd);
    d = std::max({d, static_cast<double>(i + 1) / static_cast<double>(n) - F, F - static_cast<double>(i) / static_cast<double>(n)});
  }
  NormalityVerdict v;
  v.ks_stat = std::clamp(d, 0.0, 1.0);
  v.critical = ks_critical_value(n, alpha);
  v.reject = v.ks_stat > v.critical;
  v.n = n;
  return v;
}

// ---------------------------------------------------------------------------
// Grid experiment
// ---------------------------------------------------------------------------

inline constexpr int kGridLimits = 18;       // a = -3.00, -2.65, ..., 2.95
inline constexpr int kGridCorrelations = 10;  // rho = 0.05, 0.15, ..., 0.95

inline double grid_limit(int i) { return (-300.0 + 35.0 * i) / 100.0; }
inline double grid_correlation(int j) { return (5.0 + 10.0 * j) / 100.0; }

/// Reference accept(false)/reject(true) pattern for the grid: never reject for
/// rho <= 0.75; at rho = 0.85 reject for a in [-1.95, 0.85]; at rho = 0.95
/// reject for a <= 1.20.
inline bool reference_reject(double a, double rho) {
  if (rho < 0.8) return false;
  if (rho < 0.9) return a > -1.96 && a < 0.86;
  return a < 1.21;
}

struct GridCell {
  NormalityVerdict verdict;
  bool reference_reject = false;
};

/// K-S verdicts on the 18 x 10 grid of (a, rho), n samples per cell. Cell
/// (i, j) draws from derive_seed(seed, j * 18 + i). Row-major in a.
inline std::vector<GridCell> table1_experiment(std::uint64_t seed, std::size_t n = 1000, double alpha = 0.05) {
  std::vector<GridCell> cells;
  cells.reserve(kGridLimits * kGridCorrelations);
  for (int i = 0; i < kGridLimits; ++i) {
    for (int j = 0; j < kGridCorrelations; ++j) {
      const double a = grid_limit(i);
      const double rho = grid_correlation(j);
      const auto xs = sample_conditional_lower(rho, a, n, derive_seed(seed, static_cast<std::uint64_t>(j * kGridLimits + i)));
      GridCell cell;
      cell.verdict = ks_normality_test(xs, alpha);
      cell.verdict.a = a;
      cell.verdict.rho = rho;
      cell.reference_reject = reference_reject(a, rho);
      cells.push_back(cell);
    }
  }
  return cells;
}

struct GridAgreement {
  std::size_t matching = 0;
  std::size_t total = 0;
  bool corners_match = true;
  double fraction() const { return total ? static_cast<double>(matching) / static_cast<double>(total) : 0.0; }
};

/// Agreement with the reference pattern. The corners are every rho <= 0.75
/// cell (accept) and rho = 0.95 with a in [-3.00, -2.30] (reject).
inline GridAgreement compare_to_reference(std::span<const GridCell> cells) {
  GridAgreement g;
  for (const auto& c : cells) {
    ++g.total;
    if (c.verdict.reject == c.reference_reject) ++g.matching;
    const bool corner = c.verdict.rho < 0.8 || (c.verdict.rho > 0.9 && c.verdict.a < -2.2);
    if (corner && c.verdict.reject != c.reference_reject) g.corners_match = false;
  }
  return g;
}

}  // namespace ckf::diagnostics
