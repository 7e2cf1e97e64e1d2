#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the closed-form moment code: truncated moments come from numerical
// integration of plain Gaussian conditionals, sampled ones from brute force.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace oracle {

inline double integrate(const auto& f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-14);
}

inline double phi(double z) { return boost::math::pdf(boost::math::normal(), z); }
inline double Phi(double z) { return boost::math::cdf(boost::math::normal(), z); }
inline double Phi_upper(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal(), z)); }

// log of the standard normal density restricted to z <= a (lower) or z >= a,
// written relative to the tail mass so nothing underflows at a = -38.
inline double log_tail_density(double z, double a, bool lower) {
  const double mass = lower ? boost::math::erfc(-a / std::sqrt(2.0)) / 2.0 : boost::math::erfc(a / std::sqrt(2.0)) / 2.0;
  return -0.5 * z * z - 0.5 * std::log(2.0 * M_PI) - std::log(mass);
}

/// E[g(Z) | Z <= a] (lower) or E[g(Z) | Z >= a] (upper) for Z ~ N(0, 1).
inline double tail_expectation(const auto& g, double a, bool lower) {
  const auto f = [&](double t) {
    const double z = lower ? a - t : a + t;
    return g(z) * std::exp(log_tail_density(z, a, lower));
  };
  // The integrand decays like exp(-t^2/2 - |a| t); split where it is tiny.
  const double cut = 12.0;
  return integrate(f, 0.0, cut) + integrate(f, cut, std::numeric_limits<double>::infinity());
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Moments of x given the event y* <= limit (lower) or y* >= limit, with
/// (x, y*) jointly Gaussian. Averages the ordinary Gaussian conditional
/// moments of x | y* over the truncated law of y*.
inline Moments conditional_by_quadrature(const Eigen::VectorXd& m_x, const Eigen::MatrixXd& S_x,
                                         const Eigen::VectorXd& S_xy, double m_y, double s_y, double limit,
                                         bool lower) {
  const double a = (limit - m_y) / s_y;
  // x | y* = m_y + s_y z  ~  N(m_x + (S_xy / s_y) z, S_x - S_xy S_xy^T / s_y^2)
  const double e1 = tail_expectation([](double z) { return z; }, a, lower);
  const double e2 = tail_expectation([](double z) { return z * z; }, a, lower);
  const Eigen::VectorXd g = S_xy / s_y;
  Moments out;
  out.mean = m_x + g * e1;
  out.cov = S_x - g * g.transpose() + g * g.transpose() * (e2 - e1 * e1);
  return out;
}

/// Mean of N(m, s^2) restricted to (-inf, a], by direct integration of y f(y).
inline double truncated_mean_quadrature(double m, double s, double a) {
  const double as = (a - m) / s;
  return m + s * tail_expectation([](double z) { return z; }, as, true);
}

inline double truncated_second_moment_quadrature(double m, double s, double a) {
  const double as = (a - m) / s;
  return tail_expectation([&](double z) { return (m + s * z) * (m + s * z); }, as, true);
}

struct SampleMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov_se;
  std::size_t draws = 0;
};

/// Monte Carlo estimate of the conditional moments with per-entry standard
/// errors. With `rejection` the joint Gaussian is sampled and draws outside
/// the event discarded; otherwise y* comes from the exact truncated law by
/// inverse CDF (needed when the event is too rare to hit by rejection).
inline SampleMoments conditional_by_sampling(const Eigen::VectorXd& m_x, const Eigen::MatrixXd& S_x,
                                             const Eigen::VectorXd& S_xy, double m_y, double s_y, double limit,
                                             bool lower, std::size_t n, std::uint64_t seed, bool rejection) {
  const auto d = m_x.size();
  Eigen::MatrixXd joint(d + 1, d + 1);
  joint.topLeftCorner(d, d) = S_x;
  joint.topRightCorner(d, 1) = S_xy;
  joint.bottomLeftCorner(1, d) = S_xy.transpose();
  joint(d, d) = s_y * s_y;
  const Eigen::MatrixXd L = joint.llt().matrixL();

  const Eigen::VectorXd g = S_xy / s_y;
  const Eigen::MatrixXd cond_cov = S_x - g * g.transpose();
  Eigen::MatrixXd cond_L = Eigen::MatrixXd::Zero(d, d);
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cond_cov);
    cond_L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  const double a = (limit - m_y) / s_y;
  const double mass = lower ? Phi(a) : Phi_upper(a);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(n);
  Eigen::VectorXd z(d + 1);
  std::size_t draws = 0;
  while (xs.size() < n) {
    ++draws;
    if (rejection) {
      for (Eigen::Index i = 0; i <= d; ++i) z[i] = normal(rng);
      const Eigen::VectorXd v = L * z;
      const double y = m_y + v[d];
      if (lower ? y <= limit : y >= limit) xs.push_back(m_x + v.head(d));
    } else {
      const double u = unif(rng);
      if (u <= 0.0) continue;
      const double p = u * mass;
      const double zy = lower ? -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p)
                              : std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
      for (Eigen::Index i = 0; i < d; ++i) z[i] = normal(rng);
      xs.push_back(m_x + g * zy + cond_L * z.head(d));
    }
  }

  SampleMoments out;
  out.draws = draws;
  const double nn = static_cast<double>(n);
  out.mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : xs) out.mean += x;
  out.mean /= nn;
  out.cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : xs) {
    const Eigen::VectorXd c = x - out.mean;
    const Eigen::MatrixXd p = c * c.transpose();
    out.cov += p;
    sq += p.cwiseProduct(p);
  }
  out.cov /= nn - 1.0;
  out.mean_se = (out.cov.diagonal() / nn).cwiseSqrt();
  // Var of the product of centred coordinates, estimated from the sample.
  out.cov_se = ((sq / nn - out.cov.cwiseProduct(out.cov)).cwiseMax(0.0) / nn).cwiseSqrt();
  return out;
}

}  // namespace oracle
