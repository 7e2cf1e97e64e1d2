// Track a damped oscillator through a sensor that saturates at +/-0.5 and
// compare the plain Kalman filter with the censored one.

#include <cstdio>
#include <numbers>

#include "ckf/ckf.hpp"

int main() {
  const auto model = ckf::oscillator_model(0.999, 0.005 * 2.0 * std::numbers::pi, 0.05, 0.5);
  const Eigen::Vector2d x0(5.0, 0.0);
  const ckf::CensorInterval limits{-0.5, 0.5};

  const auto sim = ckf::simulate(model, x0, 1000, limits, /*seed=*/42);
  const ckf::GaussianBelief init{x0, Eigen::Matrix2d::Identity()};

  for (auto v : {ckf::FilterVariant::KF, ckf::FilterVariant::MissingKF, ckf::FilterVariant::CKF}) {
    const auto trace = ckf::run_filter(model, sim.observed, limits, v, init);
    const auto err = ckf::bench::rmse(trace.posterior_means(), sim.states);
    std::printf("%-10s rmse = (%.4f, %.4f)\n", std::string(ckf::to_string(v)).c_str(), err[0], err[1]);
  }

  const auto est = ckf::estimate_r2(model, sim.observed, limits, init);
  std::printf("r2_hat = %.4f (true 0.5)%s\n", est.r2_hat, est.at_boundary ? "  [at search boundary]" : "");
}
