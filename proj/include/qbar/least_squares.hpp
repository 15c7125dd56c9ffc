#pragma once

// Small dense damped least-squares solver (Levenberg-Marquardt with column
// scaling and Nielsen damping updates). Problems here have at most a handful
// of parameters and a few thousand residuals.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace qbar::lsq {

// Fills residuals r (size m) and, when jac != nullptr, the m x n Jacobian.
// Returns false when p lies outside the feasible domain; the step is then
// rejected as if the cost had increased.
using ResidualFn = std::function<bool(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct Options {
  double tol = 1e-10;
  int max_iter = 200;
  // Per-parameter absolute floor for the relative-step test:
  // |dp_j| < tol * (|p_j| + step_floor_j). Empty means all zeros.
  Eigen::VectorXd step_floor;
  double initial_damping = 1e-3;
};

struct Result {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0;  // 0.5 * |r|^2
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> rms_history;  // sqrt(|r|^2 / m) after each accepted step
};

Result levenberg_marquardt(const ResidualFn& fn, std::size_t num_residuals, const Eigen::VectorXd& p0,
                           const Options& options = {});

// s2 * (J^T J)^{-1}. Throws DegenerateFitError when J is rank deficient.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& jacobian, double residual_variance);

}  // namespace qbar::lsq
