#pragma once

// Recursive filters for censored measurements: the vanilla Kalman filter, a
// baseline that treats censored measurements as missing, and the censored
// Kalman filter (scalar and coordinate-wise multidimensional updates).

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ckf/errors.hpp"
#include "ckf/linalg.hpp"
#include "ckf/model.hpp"
#include "ckf/step_likelihood.hpp"
#include "ckf/truncnorm.hpp"

namespace ckf {

enum class FilterVariant { KF, MissingKF, CKF };

inline std::string_view to_string(FilterVariant v) {
  switch (v) {
    case FilterVariant::KF: return "KF";
    case FilterVariant::MissingKF: return "MissingKF";
    case FilterVariant::CKF: return "CKF";
  }
  return "KF";
}

inline FilterVariant parse_variant(std::string_view s) {
  if (s == "KF" || s == "kf") return FilterVariant::KF;
  if (s == "MissingKF" || s == "missingkf" || s == "missing") return FilterVariant::MissingKF;
  if (s == "CKF" || s == "ckf") return FilterVariant::CKF;
  throw domain_error("unknown filter variant '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Single steps
// ---------------------------------------------------------------------------

namespace detail {

inline void check_belief(const GaussianBelief& b, const StateSpaceModel& model, const char* who) {
  const auto n = model.state_dim();
  if (b.mean.size() != n || b.cov.rows() != n || b.cov.cols() != n)
    throw domain_error(std::string(who) + ": belief dimension does not match the model");
}

inline GaussianBelief finish(Eigen::VectorXd mean, Eigen::MatrixXd cov, linalg::PsdRepair* repair) {
  const auto r = linalg::symmetrize_and_clamp(cov);
  if (repair) *repair = r;
  return {std::move(mean), std::move(cov)};
}

// Solves K S = S_xy for K with S symmetric positive definite.
inline Eigen::MatrixXd gain(const Eigen::MatrixXd& S_xy, const Eigen::MatrixXd& S, const char* who) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success || !(S.diagonal().minCoeff() > 0.0))
    throw numeric_error(std::string(who) + ": innovation covariance is singular or not positive definite");
  return llt.solve(S_xy.transpose()).transpose();
}

}  // namespace detail

/// x^- = A x, P^- = A P A^T + Q_step.
inline GaussianBelief predict(const GaussianBelief& belief, const StateSpaceModel& model, std::size_t step = 0) {
  detail::check_belief(belief, model, "predict");
  Eigen::MatrixXd cov = model.A() * belief.cov * model.A().transpose() + model.Q(step);
  cov = (0.5 * (cov + cov.transpose())).eval();
  return {model.A() * belief.mean, std::move(cov)};
}

/// Standard Kalman measurement update with y taken at face value.
inline GaussianBelief kf_update(const GaussianBelief& prior, const Eigen::VectorXd& y, const StateSpaceModel& model,
                                std::size_t step = 0, linalg::PsdRepair* repair = nullptr) {
  detail::check_belief(prior, model, "kf_update");
  if (y.size() != model.measurement_dim()) throw domain_error("kf_update: measurement has the wrong dimension");
  const auto pred = predictive_stats(prior, model, step);
  const Eigen::MatrixXd K = detail::gain(pred.S_xy, pred.S_yy, "kf_update");
  Eigen::VectorXd mean = prior.mean + K * (y - pred.m_y);
  Eigen::MatrixXd cov = prior.cov - K * pred.S_yy * K.transpose();
  return detail::finish(std::move(mean), std::move(cov), repair);
}

/// Censored update for a scalar measurement.
///
/// Interior measurements get the ordinary Kalman update. A measurement at a
/// limit is replaced by the event y* <= a (or y* >= b) and the posterior is the
/// Gaussian with the conditional moments of x given that event, using
/// m_x = x^-, S_x = P^-, S_xy = P^- H^T and s_y^2 = H P^- H^T + r^2.
inline GaussianBelief ckf_update_scalar(const GaussianBelief& prior, const CensoredMeasurement& meas,
                                        const CensorInterval& interval, const StateSpaceModel& model,
                                        std::size_t step = 0, linalg::PsdRepair* repair = nullptr) {
  detail::check_belief(prior, model, "ckf_update_scalar");
  if (model.measurement_dim() != 1 || meas.size() != 1 || meas.status.size() != 1)
    throw domain_error("ckf_update_scalar: requires a one-dimensional measurement");
  const auto status = meas.status[0];
  if (status == CensorStatus::Interior) return kf_update(prior, meas.value, model, step, repair);

  const auto pred = predictive_stats(prior, model, step);
  const double s_y = std::sqrt(pred.s2_y[0]);
  if (!(s_y > 0.0)) throw numeric_error("ckf_update_scalar: predictive variance is not positive");
  const Eigen::VectorXd S_xy = pred.S_xy.col(0);

  truncnorm::ConditionalMoments cm;
  if (status == CensorStatus::AtLower) {
    if (!std::isfinite(interval.lower))
      throw contract_error("ckf_update_scalar: measurement flagged AtLower but the interval has no lower limit");
    cm = truncnorm::conditional_moments_lower(prior.mean, prior.cov, S_xy, pred.m_y[0], s_y, interval.lower);
  } else {
    if (!std::isfinite(interval.upper))
      throw contract_error("ckf_update_scalar: measurement flagged AtUpper but the interval has no upper limit");
    cm = truncnorm::conditional_moments_upper(prior.mean, prior.cov, S_xy, pred.m_y[0], s_y, interval.upper);
  }
  if (repair) *repair = {cm.min_eigenvalue, cm.clamped};
  return {std::move(cm.mean), std::move(cm.cov)};
}

/// Coordinate-wise censored update for a vector measurement with diagonal R.
///
/// With S1 = P^- H^T, S2 = H P^- H^T + R and K = S1 S2^{-1}, each coordinate i
/// contributes an innovation surrogate E[i] and a diagonal weight G[i,i]:
///   interior:  E = y_i - (H x^-)_i,               G = 1
///   at lower:  E = -sqrt(S2[i,i]) lambda(a*_i),    G = a* lambda + lambda^2
///   at upper:  E = +sqrt(S2[i,i]) lambda_u(b*_i),  G = lambda_u^2 - b* lambda_u
/// and x = x^- + K E, P = (I - K G H) P^-.
inline GaussianBelief ckf_update_multi(const GaussianBelief& prior, const CensoredMeasurement& meas,
                                       std::span<const CensorInterval> intervals, const StateSpaceModel& model,
                                       std::size_t step = 0, linalg::PsdRepair* repair = nullptr) {
  detail::check_belief(prior, model, "ckf_update_multi");
  const auto m = model.measurement_dim();
  if (meas.size() != m || static_cast<Eigen::Index>(meas.status.size()) != m ||
      static_cast<Eigen::Index>(intervals.size()) != m)
    throw domain_error("ckf_update_multi: measurement, intervals and model disagree in dimension");
  if (!model.measurement_noise_diagonal(step))
    throw domain_error(
        "ckf_update_multi: measurement noise covariance must be diagonal (coordinates are updated as uncorrelated)");

  const auto pred = predictive_stats(prior, model, step);
  const Eigen::MatrixXd K = detail::gain(pred.S_xy, pred.S_yy, "ckf_update_multi");

  Eigen::VectorXd E(m);
  Eigen::VectorXd G = Eigen::VectorXd::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& iv = intervals[static_cast<std::size_t>(i)];
    const double s = std::sqrt(pred.S_yy(i, i));
    switch (meas.status[static_cast<std::size_t>(i)]) {
      case CensorStatus::Interior:
        E[i] = meas.value[i] - pred.m_y[i];
        break;
      case CensorStatus::AtLower: {
        if (!std::isfinite(iv.lower))
          throw contract_error("ckf_update_multi: coordinate flagged AtLower but its interval has no lower limit");
        const double a_std = (iv.lower - pred.m_y[i]) / s;
        E[i] = -s * truncnorm::mills_lower(a_std);
        G[i] = truncnorm::lower_reduction_factor(a_std);
        break;
      }
      case CensorStatus::AtUpper: {
        if (!std::isfinite(iv.upper))
          throw contract_error("ckf_update_multi: coordinate flagged AtUpper but its interval has no upper limit");
        const double b_std = (iv.upper - pred.m_y[i]) / s;
        E[i] = s * truncnorm::mills_upper(b_std);
        G[i] = truncnorm::upper_reduction_factor(b_std);
        break;
      }
    }
  }
  const auto n = model.state_dim();
  Eigen::VectorXd mean = prior.mean + K * E;
  Eigen::MatrixXd cov =
      (Eigen::MatrixXd::Identity(n, n) - K * G.asDiagonal() * model.H()) * prior.cov;
  return detail::finish(std::move(mean), std::move(cov), repair);
}

/// Limits centred on the predicted measurement: ((H x^-)_i - c, (H x^-)_i + c).
inline std::vector<CensorInterval> adaptive_limits(const GaussianBelief& prior, const StateSpaceModel& model,
                                                   double c) {
  if (!(c > 0.0) || std::isnan(c)) throw domain_error("adaptive_limits: offset c must be positive");
  detail::check_belief(prior, model, "adaptive_limits");
  const Eigen::VectorXd center = model.H() * prior.mean;
  std::vector<CensorInterval> out;
  out.reserve(static_cast<std::size_t>(center.size()));
  for (Eigen::Index i = 0; i < center.size(); ++i) out.push_back({center[i] - c, center[i] + c});
  return out;
}

// ---------------------------------------------------------------------------
// Full passes
// ---------------------------------------------------------------------------

/// Known, fixed limits per measurement coordinate (one entry is broadcast).
struct FixedLimits {
  std::vector<CensorInterval> intervals;
};

/// Limits recomputed from each prior; the measurement values are then treated
/// as latent and censored on the fly.
struct AdaptiveLimits {
  double c = 0.0;
};

using LimitPolicy = std::variant<FixedLimits, AdaptiveLimits>;

struct FilterOptions {
  /// A censored step whose predictive state/measurement correlation exceeds
  /// this in magnitude is flagged: the Gaussian re-approximation of the
  /// conditional law is poor there.
  double correlation_warning = 0.75;
};

struct FilterStep {
  GaussianBelief prior;
  GaussianBelief posterior;
  double loglik = 0.0;
  CensoredMeasurement measurement;
  std::vector<CensorInterval> intervals;
  /// max |S_xy(j,i)| / sqrt(P^-(j,j) s2_y(i)) over states j and censored coordinates i; 0 if none censored.
  double max_abs_correlation = 0.0;
  bool high_correlation = false;
  double min_eigenvalue = 0.0;
  bool clamped = false;
};

struct FilterTrace {
  FilterVariant variant = FilterVariant::KF;
  std::vector<FilterStep> steps;
  GaussianBelief final_belief;
  std::size_t high_correlation_steps = 0;
  std::size_t clamp_events = 0;

  std::size_t size() const { return steps.size(); }

  double total_loglik() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.loglik;
    return s;
  }

  /// T x n matrix of posterior means.
  Eigen::MatrixXd posterior_means() const {
    const auto n = final_belief.mean.size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(steps.size()), n);
    for (std::size_t t = 0; t < steps.size(); ++t) out.row(static_cast<Eigen::Index>(t)) = steps[t].posterior.mean;
    return out;
  }
};

namespace detail {

inline double max_censored_correlation(const GaussianBelief& prior, const PredictiveStats& pred,
                                       const CensoredMeasurement& meas) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < meas.size(); ++i) {
    if (meas.status[static_cast<std::size_t>(i)] == CensorStatus::Interior) continue;
    for (Eigen::Index j = 0; j < prior.mean.size(); ++j) {
      const double denom = std::sqrt(prior.cov(j, j) * pred.s2_y[i]);
      if (denom > 0.0) best = std::max(best, std::abs(pred.S_xy(j, i)) / denom);
    }
  }
  return best;
}

// Kalman update restricted to the interior coordinates of a partly censored measurement.
inline GaussianBelief missing_update(const GaussianBelief& prior, const CensoredMeasurement& meas,
                                     const StateSpaceModel& model, std::size_t step, linalg::PsdRepair* repair) {
  if (!meas.any_censored()) return kf_update(prior, meas.value, model, step, repair);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < meas.size(); ++i)
    if (meas.status[static_cast<std::size_t>(i)] == CensorStatus::Interior) keep.push_back(i);
  if (keep.empty()) {
    if (repair) *repair = {linalg::min_eigenvalue(prior.cov), false};
    return prior;
  }
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd H(k, model.state_dim());
  Eigen::MatrixXd R(k, k);
  Eigen::VectorXd y(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    H.row(r) = model.H().row(keep[static_cast<std::size_t>(r)]);
    y[r] = meas.value[keep[static_cast<std::size_t>(r)]];
    for (Eigen::Index c = 0; c < k; ++c)
      R(r, c) = model.R(step)(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]);
  }
  const StateSpaceModel reduced(model.A(), H, model.Q(step), R);
  return kf_update(prior, y, reduced, 0, repair);
}

}  // namespace detail

/// One filter step on a prior that has already been predicted.
inline GaussianBelief update(FilterVariant variant, const GaussianBelief& prior, const CensoredMeasurement& meas,
                             std::span<const CensorInterval> intervals, const StateSpaceModel& model,
                             std::size_t step = 0, linalg::PsdRepair* repair = nullptr) {
  switch (variant) {
    case FilterVariant::KF:
      return kf_update(prior, meas.value, model, step, repair);
    case FilterVariant::MissingKF:
      return detail::missing_update(prior, meas, model, step, repair);
    case FilterVariant::CKF:
      if (model.measurement_dim() == 1) return ckf_update_scalar(prior, meas, intervals[0], model, step, repair);
      return ckf_update_multi(prior, meas, intervals, model, step, repair);
  }
  return prior;
}

/// Runs predict/update over the whole sequence starting from `init`, the
/// belief at time 0. Every step records the censored predictive log-density
/// of its measurement under that step's prior.
inline FilterTrace run_filter(const StateSpaceModel& model, std::span<const CensoredMeasurement> measurements,
                              const LimitPolicy& limits, FilterVariant variant, const GaussianBelief& init,
                              const FilterOptions& options = {}) {
  detail::check_belief(init, model, "run_filter");
  const auto m = static_cast<std::size_t>(model.measurement_dim());
  std::vector<CensorInterval> fixed;
  if (const auto* f = std::get_if<FixedLimits>(&limits)) {
    if (f->intervals.size() == 1) fixed.assign(m, f->intervals.front());
    else if (f->intervals.size() == m) fixed = f->intervals;
    else throw domain_error("run_filter: need one censor interval per measurement coordinate");
    for (const auto& iv : fixed) validate(iv);
  } else if (!(std::get<AdaptiveLimits>(limits).c > 0.0)) {
    throw domain_error("run_filter: adaptive offset c must be positive");
  }

  FilterTrace trace;
  trace.variant = variant;
  trace.steps.reserve(measurements.size());
  GaussianBelief belief = init;
  for (std::size_t t = 0; t < measurements.size(); ++t) {
    const auto& raw = measurements[t];
    if (raw.size() != static_cast<Eigen::Index>(m) || raw.status.size() != m)
      throw domain_error("run_filter: measurement " + std::to_string(t) + " has the wrong dimension");

    FilterStep st;
    st.prior = predict(belief, model, t);
    if (const auto* a = std::get_if<AdaptiveLimits>(&limits)) {
      st.intervals = adaptive_limits(st.prior, model, a->c);
      st.measurement = censor(raw.value, st.intervals);
    } else {
      st.intervals = fixed;
      st.measurement = raw;
    }
    const auto pred = predictive_stats(st.prior, model, t);
    st.loglik = step_loglik(pred, st.measurement, st.intervals);
    st.max_abs_correlation = detail::max_censored_correlation(st.prior, pred, st.measurement);
    st.high_correlation = st.max_abs_correlation > options.correlation_warning;

    linalg::PsdRepair repair;
    st.posterior = update(variant, st.prior, st.measurement, st.intervals, model, t, &repair);
    st.min_eigenvalue = repair.min_eigenvalue;
    st.clamped = repair.clamped;
    if (st.high_correlation && variant == FilterVariant::CKF) ++trace.high_correlation_steps;
    if (st.clamped) ++trace.clamp_events;

    belief = st.posterior;
    trace.steps.push_back(std::move(st));
  }
  trace.final_belief = belief;
  return trace;
}

inline FilterTrace run_filter(const StateSpaceModel& model, std::span<const CensoredMeasurement> measurements,
                              const CensorInterval& interval, FilterVariant variant, const GaussianBelief& init,
                              const FilterOptions& options = {}) {
  return run_filter(model, measurements, LimitPolicy{FixedLimits{{interval}}}, variant, init, options);
}

}  // namespace ckf
