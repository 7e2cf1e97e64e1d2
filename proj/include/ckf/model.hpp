#pragma once

// Linear-Gaussian state-space model, Tobit Type-I censoring and seeded simulation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ckf/errors.hpp"
#include "ckf/linalg.hpp"

namespace ckf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// The generator used everywhere: 64-bit Mersenne Twister.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under a base seed. Replication i of an experiment
/// with seed s draws from Rng(derive_seed(s, i)); streams never share state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ (0xD1B54A32D192ED03ULL * (index + 1)));
}

// ---------------------------------------------------------------------------
// Censoring
// ---------------------------------------------------------------------------

enum class CensorStatus { Interior, AtLower, AtUpper };

inline std::string_view to_string(CensorStatus s) {
  switch (s) {
    case CensorStatus::Interior: return "interior";
    case CensorStatus::AtLower: return "lower";
    case CensorStatus::AtUpper: return "upper";
  }
  return "interior";
}

inline CensorStatus parse_status(std::string_view s) {
  if (s == "interior" || s == "0") return CensorStatus::Interior;
  if (s == "lower" || s == "-1") return CensorStatus::AtLower;
  if (s == "upper" || s == "1") return CensorStatus::AtUpper;
  throw domain_error("unknown censoring status '" + std::string(s) + "'");
}

/// Saturation limits of one measurement coordinate. Either side may be infinite.
struct CensorInterval {
  double lower = -kInf;
  double upper = kInf;

  bool valid() const { return !std::isnan(lower) && !std::isnan(upper) && lower < upper; }
  bool operator==(const CensorInterval&) const = default;
};

inline void validate(const CensorInterval& iv) {
  if (!iv.valid()) throw domain_error("censor interval requires lower < upper");
}

/// A possibly saturated measurement. Coordinates flagged AtLower/AtUpper carry
/// the limit as their value.
struct CensoredMeasurement {
  Eigen::VectorXd value;
  std::vector<CensorStatus> status;

  Eigen::Index size() const { return value.size(); }
  bool any_censored() const {
    for (auto s : status)
      if (s != CensorStatus::Interior) return true;
    return false;
  }
  bool all_censored() const {
    for (auto s : status)
      if (s == CensorStatus::Interior) return false;
    return !status.empty();
  }
};

/// Coordinate-wise Tobit Type-I censoring. y* <= lower maps to AtLower and
/// y* >= upper maps to AtUpper, so values on a limit count as censored.
inline CensoredMeasurement censor(const Eigen::VectorXd& latent, std::span<const CensorInterval> intervals) {
  if (static_cast<std::size_t>(latent.size()) != intervals.size())
    throw domain_error("censor: latent dimension does not match the number of intervals");
  CensoredMeasurement out{latent, std::vector<CensorStatus>(intervals.size(), CensorStatus::Interior)};
  for (Eigen::Index i = 0; i < latent.size(); ++i) {
    const auto& iv = intervals[static_cast<std::size_t>(i)];
    validate(iv);
    if (latent[i] <= iv.lower) {
      out.value[i] = iv.lower;
      out.status[static_cast<std::size_t>(i)] = CensorStatus::AtLower;
    } else if (latent[i] >= iv.upper) {
      out.value[i] = iv.upper;
      out.status[static_cast<std::size_t>(i)] = CensorStatus::AtUpper;
    }
  }
  return out;
}

inline CensoredMeasurement censor(double latent, const CensorInterval& interval) {
  return censor(Eigen::VectorXd::Constant(1, latent), std::span<const CensorInterval>(&interval, 1));
}

// ---------------------------------------------------------------------------
// State-space model
// ---------------------------------------------------------------------------

/// x_{t+1} = A x_t + w_t,  y*_t = H x_t + v_t,  w_t ~ N(0, Q_t),  v_t ~ N(0, R_t).
///
/// Q and R are constant unless per-step overrides are attached; step k uses
/// the k-th override when one exists and the constant matrix otherwise.
class StateSpaceModel {
 public:
  StateSpaceModel(Eigen::MatrixXd A, Eigen::MatrixXd H, Eigen::MatrixXd Q, Eigen::MatrixXd R)
      : A_(std::move(A)), H_(std::move(H)), Q_(std::move(Q)), R_(std::move(R)) {
    const auto n = A_.rows();
    if (n == 0 || A_.cols() != n) throw domain_error("model: A must be square and non-empty");
    if (H_.cols() != n || H_.rows() == 0) throw domain_error("model: H must be m x n with m >= 1");
    check_noise(Q_, n, "Q");
    check_noise(R_, H_.rows(), "R");
  }

  Eigen::Index state_dim() const { return A_.rows(); }
  Eigen::Index measurement_dim() const { return H_.rows(); }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::MatrixXd& Q(std::size_t step = 0) const { return step < Q_seq_.size() ? Q_seq_[step] : Q_; }
  const Eigen::MatrixXd& R(std::size_t step = 0) const { return step < R_seq_.size() ? R_seq_[step] : R_; }

  bool time_varying() const { return !Q_seq_.empty() || !R_seq_.empty(); }

  /// Copy with per-step noise overrides. Either sequence may be empty.
  StateSpaceModel with_noise_schedule(std::vector<Eigen::MatrixXd> Q_seq, std::vector<Eigen::MatrixXd> R_seq) const {
    for (const auto& q : Q_seq) check_noise(q, state_dim(), "Q_t");
    for (const auto& r : R_seq) check_noise(r, measurement_dim(), "R_t");
    StateSpaceModel out = *this;
    out.Q_seq_ = std::move(Q_seq);
    out.R_seq_ = std::move(R_seq);
    return out;
  }

  /// Copy with a different constant measurement covariance and no R overrides.
  StateSpaceModel with_measurement_noise(Eigen::MatrixXd R) const {
    check_noise(R, measurement_dim(), "R");
    StateSpaceModel out = *this;
    out.R_ = std::move(R);
    out.R_seq_.clear();
    return out;
  }

  bool measurement_noise_diagonal(std::size_t step = 0) const {
    const auto& r = R(step);
    const Eigen::MatrixXd off = r - Eigen::MatrixXd(r.diagonal().asDiagonal());
    return off.cwiseAbs().maxCoeff() == 0.0;
  }

 private:
  static void check_noise(const Eigen::MatrixXd& m, Eigen::Index dim, const char* name) {
    const std::string who = std::string("model: ") + name;
    if (m.rows() != dim || m.cols() != dim) throw domain_error(who + " has the wrong shape");
    if (!m.allFinite()) throw domain_error(who + " has non-finite entries");
    if (!linalg::is_symmetric(m, 1e-12)) throw domain_error(who + " is not symmetric");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (linalg::min_eigenvalue(m) < -1e-12 * scale) throw domain_error(who + " is not positive semidefinite");
  }

  Eigen::MatrixXd A_, H_, Q_, R_;
  std::vector<Eigen::MatrixXd> Q_seq_, R_seq_;
};

/// Damped planar rotation observed through its first coordinate:
/// A = c [cos w, -sin w; sin w, cos w], H = [1 0], Q = q^2 I, R = [r2].
inline StateSpaceModel oscillator_model(double c, double omega, double q, double r2) {
  if (!std::isfinite(c) || !std::isfinite(omega)) throw domain_error("oscillator_model: non-finite c or omega");
  if (!(q >= 0.0) || !std::isfinite(q)) throw domain_error("oscillator_model: q must be >= 0");
  if (!(r2 > 0.0) || !std::isfinite(r2)) throw domain_error("oscillator_model: r2 must be > 0");
  Eigen::MatrixXd A(2, 2);
  A << std::cos(omega), -std::sin(omega), std::sin(omega), std::cos(omega);
  A *= c;
  Eigen::MatrixXd H(1, 2);
  H << 1.0, 0.0;
  return StateSpaceModel(A, H, q * q * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Constant(1, 1, r2));
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Ground truth and measurements for steps t = 1..T (row t-1).
struct SimulationRecord {
  Eigen::MatrixXd states;  // T x n, x_t
  Eigen::MatrixXd latent;  // T x m, y*_t
  std::vector<CensoredMeasurement> observed;
  std::vector<CensorInterval> intervals;

  std::size_t steps() const { return observed.size(); }
};

namespace detail {

// Symmetric square root usable for PSD (possibly singular) covariances.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::VectorXd draw_standard(Rng& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

}  // namespace detail

/// Draws x_t = A x_{t-1} + w_{t-1} and y*_t = H x_t + v_t for t = 1..T from
/// the fixed initial state x0, then censors y*_t coordinate-wise.
inline SimulationRecord simulate(const StateSpaceModel& model, const Eigen::VectorXd& x0, std::size_t steps,
                                 std::span<const CensorInterval> intervals, std::uint64_t seed) {
  if (steps < 1) throw domain_error("simulate: need at least one step");
  if (x0.size() != model.state_dim()) throw domain_error("simulate: x0 has the wrong dimension");
  if (static_cast<Eigen::Index>(intervals.size()) != model.measurement_dim())
    throw domain_error("simulate: one censor interval per measurement coordinate is required");
  for (const auto& iv : intervals) validate(iv);

  const auto n = model.state_dim();
  const auto m = model.measurement_dim();
  SimulationRecord rec;
  rec.states.resize(static_cast<Eigen::Index>(steps), n);
  rec.latent.resize(static_cast<Eigen::Index>(steps), m);
  rec.observed.reserve(steps);
  rec.intervals.assign(intervals.begin(), intervals.end());

  Rng rng(seed);
  std::optional<Eigen::MatrixXd> q_root, r_root;
  Eigen::VectorXd x = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    if (!q_root || model.time_varying()) q_root = detail::psd_sqrt(model.Q(k));
    if (!r_root || model.time_varying()) r_root = detail::psd_sqrt(model.R(k));
    x = model.A() * x + *q_root * detail::draw_standard(rng, n);
    const Eigen::VectorXd y = model.H() * x + *r_root * detail::draw_standard(rng, m);
    const auto row = static_cast<Eigen::Index>(k);
    rec.states.row(row) = x.transpose();
    rec.latent.row(row) = y.transpose();
    rec.observed.push_back(censor(y, intervals));
  }
  return rec;
}

inline SimulationRecord simulate(const StateSpaceModel& model, const Eigen::VectorXd& x0, std::size_t steps,
                                 const CensorInterval& interval, std::uint64_t seed) {
  std::vector<CensorInterval> ivs(static_cast<std::size_t>(model.measurement_dim()), interval);
  return simulate(model, x0, steps, ivs, seed);
}

}  // namespace ckf
