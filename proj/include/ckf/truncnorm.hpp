#pragma once

// Standard-normal tail kernels and the moments of a Gaussian state conditioned
// on a one-dimensional censoring event {y* <= a} or {y* >= b}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ckf/errors.hpp"
#include "ckf/linalg.hpp"

namespace ckf::truncnorm {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;
inline constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

/// Below this standardized point the lower Mills ratio is evaluated with a
/// continued fraction instead of dividing pdf by cdf.
inline constexpr double kTailSwitch = -6.0;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

/// 1 - Phi(z), accurate in the upper tail.
inline double normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

namespace detail {

// Laplace continued fraction for the Mills ratio (1 - Phi(x)) / phi(x),
//   R(x) = 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...)))),
// evaluated backwards. Returns 1 / R(x). Needs x >= 6 for full precision at
// this depth.
inline double inverse_mills_tail(double x) {
  constexpr int kTerms = 160;
  double f = x;
  for (int k = kTerms; k >= 1; --k) f = x + k / f;
  return f;
}

}  // namespace detail

/// phi(z) / Phi(z). Strictly decreasing, ~ -z as z -> -inf, ~ phi(z) as z -> +inf.
inline double mills_lower(double z) {
  if (!std::isfinite(z)) throw domain_error("mills_lower: non-finite argument");
  if (z < kTailSwitch) return detail::inverse_mills_tail(-z);
  return normal_pdf(z) / normal_cdf(z);
}

/// phi(z) / (1 - Phi(z)), by reflection of mills_lower.
inline double mills_upper(double z) {
  if (!std::isfinite(z)) throw domain_error("mills_upper: non-finite argument");
  return mills_lower(-z);
}

/// log Phi(z), finite for every finite z.
inline double log_normal_cdf(double z) {
  if (std::isnan(z)) throw domain_error("log_normal_cdf: NaN argument");
  if (z == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (z == std::numeric_limits<double>::infinity()) return 0.0;
  if (z < kTailSwitch) return normal_log_pdf(z) - std::log(detail::inverse_mills_tail(-z));
  if (z > 0.0) return std::log1p(-normal_sf(z));
  return std::log(normal_cdf(z));
}

/// log(1 - Phi(z)).
inline double log_normal_sf(double z) { return log_normal_cdf(-z); }

namespace detail {

inline double standardize(double m, double s, double limit, const char* who) {
  if (!(s > 0.0) || !std::isfinite(s)) throw domain_error(std::string(who) + ": scale must be positive and finite");
  if (!std::isfinite(m)) throw domain_error(std::string(who) + ": non-finite mean");
  if (std::isnan(limit)) throw domain_error(std::string(who) + ": NaN limit");
  return (limit - m) / s;
}

}  // namespace detail

/// Mean of N(m, s^2) truncated to (-inf, a]. a = +inf means no truncation.
inline double truncated_mean_below(double m, double s, double a) {
  const double a_std = detail::standardize(m, s, a, "truncated_mean_below");
  if (a_std == std::numeric_limits<double>::infinity()) return m;
  return m - s * mills_lower(a_std);
}

/// E[Y^2 | Y <= a] for Y ~ N(m, s^2).
///
/// Uses m^2 + s^2 - 2 m s lambda - s^2 a* lambda with lambda = mills_lower(a*).
/// The form sometimes printed with a repeated m^2 term and an m^2 s cross
/// term is not dimensionally consistent and does not match quadrature.
inline double truncated_second_moment_below(double m, double s, double a) {
  const double a_std = detail::standardize(m, s, a, "truncated_second_moment_below");
  if (a_std == std::numeric_limits<double>::infinity()) return m * m + s * s;
  const double lambda = mills_lower(a_std);
  return m * m + s * s - 2.0 * m * s * lambda - s * s * a_std * lambda;
}

/// Var[Y | Y <= a] = s^2 (1 - a* lambda - lambda^2), computed without
/// subtracting the two raw moments.
inline double truncated_variance_below(double m, double s, double a) {
  const double a_std = detail::standardize(m, s, a, "truncated_variance_below");
  if (a_std == std::numeric_limits<double>::infinity()) return s * s;
  const double lambda = mills_lower(a_std);
  return s * s * (1.0 - lambda * (a_std + lambda));
}

/// Mean and covariance of a Gaussian state conditioned on a censoring event.
struct ConditionalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  /// Variance-reduction factor applied along S_xy S_xy^T / s_y^2, in [0, 1].
  double reduction = 0.0;
  /// Smallest eigenvalue of the symmetrized covariance before clamping.
  double min_eigenvalue = 0.0;
  bool clamped = false;
};

/// Variance-reduction factor for the lower event at standardized limit a*:
/// a* lambda + lambda^2, lambda = mills_lower(a*). Always in (0, 1).
inline double lower_reduction_factor(double a_std) {
  const double lambda = mills_lower(a_std);
  const double f = lambda * (a_std + lambda);
  return std::clamp(f, 0.0, 1.0);
}

/// Upper-event factor lambda_u^2 - b* lambda_u, lambda_u = mills_upper(b*).
/// This is lower_reduction_factor(-b*); the denominator is 1 - Phi(b*), the
/// same one that appears in the upper-event mean.
inline double upper_reduction_factor(double b_std) { return lower_reduction_factor(-b_std); }

namespace detail {

inline void check_moment_inputs(const Eigen::VectorXd& m_x, const Eigen::MatrixXd& S_x, const Eigen::VectorXd& S_xy,
                                const char* who) {
  if (S_x.rows() != m_x.size() || S_x.cols() != m_x.size() || S_xy.size() != m_x.size())
    throw domain_error(std::string(who) + ": dimension mismatch between m_x, S_x and S_xy");
}

inline ConditionalMoments shifted_moments(const Eigen::VectorXd& m_x, const Eigen::MatrixXd& S_x,
                                          const Eigen::VectorXd& S_xy, double s_y, double mean_shift,
                                          double reduction) {
  ConditionalMoments out;
  out.mean = m_x + (S_xy / s_y) * mean_shift;
  out.reduction = reduction;
  Eigen::MatrixXd cov = S_x - (S_xy * S_xy.transpose()) * (reduction / (s_y * s_y));
  const auto psd = linalg::symmetrize_and_clamp(cov);
  out.cov = std::move(cov);
  out.min_eigenvalue = psd.min_eigenvalue;
  out.clamped = psd.clamped;
  return out;
}

}  // namespace detail

/// Moments of x given y* <= a, where (x, y*) is jointly Gaussian with
/// x ~ N(m_x, S_x), y* ~ N(m_y, s_y^2) and Cov(x, y*) = S_xy.
inline ConditionalMoments conditional_moments_lower(const Eigen::VectorXd& m_x, const Eigen::MatrixXd& S_x,
                                                    const Eigen::VectorXd& S_xy, double m_y, double s_y, double a) {
  detail::check_moment_inputs(m_x, S_x, S_xy, "conditional_moments_lower");
  const double a_std = truncnorm::detail::standardize(m_y, s_y, a, "conditional_moments_lower");
  if (a_std == std::numeric_limits<double>::infinity()) return detail::shifted_moments(m_x, S_x, S_xy, s_y, 0.0, 0.0);
  return detail::shifted_moments(m_x, S_x, S_xy, s_y, -mills_lower(a_std), lower_reduction_factor(a_std));
}

/// Moments of x given y* >= b. Mirror image of conditional_moments_lower.
inline ConditionalMoments conditional_moments_upper(const Eigen::VectorXd& m_x, const Eigen::MatrixXd& S_x,
                                                    const Eigen::VectorXd& S_xy, double m_y, double s_y, double b) {
  detail::check_moment_inputs(m_x, S_x, S_xy, "conditional_moments_upper");
  const double b_std = truncnorm::detail::standardize(m_y, s_y, b, "conditional_moments_upper");
  if (b_std == -std::numeric_limits<double>::infinity()) return detail::shifted_moments(m_x, S_x, S_xy, s_y, 0.0, 0.0);
  return detail::shifted_moments(m_x, S_x, S_xy, s_y, mills_upper(b_std), upper_reduction_factor(b_std));
}

}  // namespace ckf::truncnorm
