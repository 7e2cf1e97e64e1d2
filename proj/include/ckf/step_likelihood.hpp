#pragma once

// Gaussian beliefs, one-step predictive statistics and the censored predictive
// log-density of a single measurement.

#include <cmath>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "ckf/errors.hpp"
#include "ckf/model.hpp"
#include "ckf/truncnorm.hpp"

namespace ckf {

/// Mean and covariance of the state, either before (prior) or after (posterior)
/// a measurement update.
struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Moments of y*_t given the past, read off a prior belief:
/// m_y = H x^-, S_yy = H P^- H^T + R, S_xy = P^- H^T, s2_y = diag(S_yy).
struct PredictiveStats {
  Eigen::VectorXd m_y;
  Eigen::VectorXd s2_y;
  Eigen::MatrixXd S_xy;
  Eigen::MatrixXd S_yy;
};

inline PredictiveStats predictive_stats(const GaussianBelief& prior, const StateSpaceModel& model,
                                        std::size_t step = 0) {
  if (prior.mean.size() != model.state_dim() || prior.cov.rows() != model.state_dim() ||
      prior.cov.cols() != model.state_dim())
    throw domain_error("predictive_stats: belief dimension does not match the model");
  PredictiveStats p;
  p.m_y = model.H() * prior.mean;
  p.S_xy = prior.cov * model.H().transpose();
  p.S_yy = model.H() * p.S_xy + model.R(step);
  p.S_yy = (0.5 * (p.S_yy + p.S_yy.transpose())).eval();
  p.s2_y = p.S_yy.diagonal();
  return p;
}

/// Log of the censored predictive law of one measurement coordinate with
/// y* ~ N(m_y, s2_y):
///   interior:  log( phi((y - m_y)/s) / s )
///   at lower:  log Phi((a - m_y)/s)
///   at upper:  log(1 - Phi((b - m_y)/s))
/// Tail terms are evaluated in log space and stay finite far into the tails.
inline double step_loglik(double m_y, double s2_y, double value, CensorStatus status, const CensorInterval& interval) {
  if (!(s2_y > 0.0) || !std::isfinite(s2_y)) throw domain_error("step_loglik: predictive variance must be positive");
  const double s = std::sqrt(s2_y);
  switch (status) {
    case CensorStatus::Interior: {
      const double z = (value - m_y) / s;
      return truncnorm::normal_log_pdf(z) - std::log(s);
    }
    case CensorStatus::AtLower:
      if (!std::isfinite(interval.lower))
        throw contract_error("step_loglik: measurement flagged AtLower but the interval has no lower limit");
      return truncnorm::log_normal_cdf((interval.lower - m_y) / s);
    case CensorStatus::AtUpper:
      if (!std::isfinite(interval.upper))
        throw contract_error("step_loglik: measurement flagged AtUpper but the interval has no upper limit");
      return truncnorm::log_normal_sf((interval.upper - m_y) / s);
  }
  return 0.0;
}

/// Scalar-measurement form.
inline double step_loglik(const PredictiveStats& pred, const CensoredMeasurement& meas, const CensorInterval& interval) {
  if (pred.m_y.size() != 1 || meas.size() != 1 || meas.status.size() != 1)
    throw domain_error("step_loglik: scalar form needs a one-dimensional measurement");
  return step_loglik(pred.m_y[0], pred.s2_y[0], meas.value[0], meas.status[0], interval);
}

/// Vector-measurement form. With every coordinate interior this is the joint
/// Gaussian predictive density; otherwise the coordinates' marginal censored
/// terms are summed (exact when S_yy is diagonal).
inline double step_loglik(const PredictiveStats& pred, const CensoredMeasurement& meas,
                          std::span<const CensorInterval> intervals) {
  const auto m = pred.m_y.size();
  if (meas.size() != m || static_cast<Eigen::Index>(meas.status.size()) != m ||
      static_cast<Eigen::Index>(intervals.size()) != m)
    throw domain_error("step_loglik: measurement, predictive stats and intervals disagree in dimension");
  if (m == 1) return step_loglik(pred, meas, intervals[0]);
  if (!meas.any_censored()) {
    Eigen::LLT<Eigen::MatrixXd> llt(pred.S_yy);
    if (llt.info() != Eigen::Success) throw numeric_error("step_loglik: predictive covariance is not positive definite");
    const Eigen::VectorXd e = meas.value - pred.m_y;
    const Eigen::VectorXd w = llt.matrixL().solve(e);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * w.squaredNorm() - 0.5 * log_det - static_cast<double>(m) * truncnorm::kLogSqrt2Pi;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    total += step_loglik(pred.m_y[i], pred.s2_y[i], meas.value[i], meas.status[static_cast<std::size_t>(i)],
                         intervals[static_cast<std::size_t>(i)]);
  return total;
}

}  // namespace ckf
