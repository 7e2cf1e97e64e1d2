#pragma once

#include <algorithm>

#include <Eigen/Dense>

namespace ckf::linalg {

/// Eigenvalues below this are treated as genuine indefiniteness and clamped.
inline constexpr double kClampThreshold = -1e-9;

struct PsdRepair {
  double min_eigenvalue = 0.0;
  bool clamped = false;
};

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Replace C by (C + C^T) / 2 and, if any eigenvalue is below
/// kClampThreshold, rebuild it with negative eigenvalues set to zero.
/// Tiny negative eigenvalues in [kClampThreshold, 0) are left alone.
inline PsdRepair symmetrize_and_clamp(Eigen::MatrixXd& cov) {
  cov = (0.5 * (cov + cov.transpose())).eval();
  PsdRepair out;
  if (cov.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  if (out.min_eigenvalue < kClampThreshold) {
    const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
    cov = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();
    out.clamped = true;
  }
  return out;
}

/// True when lhs <= rhs in the Loewner order, up to tol on eigenvalues of rhs - lhs.
inline bool loewner_leq(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs, double tol = 1e-9) {
  const Eigen::MatrixXd diff = 0.5 * ((rhs - lhs) + (rhs - lhs).transpose());
  return min_eigenvalue(diff) >= -tol;
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

}  // namespace ckf::linalg
