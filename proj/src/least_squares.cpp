#include "qbar/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qbar/errors.hpp"

namespace qbar::lsq {

namespace {

constexpr double kMaxDamping = 1e20;

Eigen::VectorXd column_norms(const Eigen::MatrixXd& j) {
  Eigen::VectorXd n(j.cols());
  for (Eigen::Index c = 0; c < j.cols(); ++c) n(c) = j.col(c).norm();
  return n;
}

}  // namespace

Result levenberg_marquardt(const ResidualFn& fn, std::size_t num_residuals, const Eigen::VectorXd& p0,
                           const Options& options) {
  const Eigen::Index n = p0.size();
  const auto m = static_cast<Eigen::Index>(num_residuals);
  if (m < n) throw ArgumentError("levenberg_marquardt: fewer residuals than parameters");

  Eigen::VectorXd floor = options.step_floor.size() == n ? options.step_floor : Eigen::VectorXd::Zero(n);

  Result res;
  res.params = p0;
  res.residuals.resize(m);
  res.jacobian.resize(m, n);
  if (!fn(res.params, res.residuals, &res.jacobian)) {
    throw DomainError("levenberg_marquardt: initial parameters are infeasible");
  }
  res.cost = 0.5 * res.residuals.squaredNorm();

  // Column scaling, never allowed to shrink (MINPACK convention).
  Eigen::VectorXd scale = column_norms(res.jacobian);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (scale(c) == 0.0) scale(c) = 1.0;
  }

  double damping = options.initial_damping;
  double nu = 2.0;
  Eigen::VectorXd trial_r(m);
  Eigen::MatrixXd trial_j(m, n);
  Eigen::MatrixXd augmented(m + n, n);
  Eigen::VectorXd rhs(m + n);

  if (res.cost == 0.0) {
    res.converged = true;
    res.stop_reason = "zero residual";
    return res;
  }

  while (res.iterations < options.max_iter) {
    ++res.iterations;
    scale = scale.cwiseMax(column_norms(res.jacobian));

    // Gradient test on the scaled problem: cosine between r and each column.
    const Eigen::VectorXd grad = res.jacobian.transpose() * res.residuals;
    const double rnorm = res.residuals.norm();
    double gcos = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double cn = res.jacobian.col(c).norm();
      if (cn > 0.0) gcos = std::max(gcos, std::abs(grad(c)) / (cn * rnorm));
    }
    if (gcos < options.tol) {
      res.converged = true;
      res.stop_reason = "gradient";
      break;
    }

    // Solve min |J D^-1 ds + r|^2 + damping |ds|^2 by QR of the augmented system.
    augmented.topRows(m) = res.jacobian * scale.cwiseInverse().asDiagonal();
    augmented.bottomRows(n) = std::sqrt(damping) * Eigen::MatrixXd::Identity(n, n);
    rhs.head(m) = -res.residuals;
    rhs.tail(n).setZero();
    const Eigen::VectorXd scaled_step = augmented.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd step = scaled_step.cwiseQuotient(scale);

    double rel_step = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      rel_step = std::max(rel_step, std::abs(step(c)) / (std::abs(res.params(c)) + floor(c)));
    }

    const Eigen::VectorXd trial = res.params + step;
    const bool feasible = trial.allFinite() && fn(trial, trial_r, &trial_j) && trial_r.allFinite();
    const double trial_cost = feasible ? 0.5 * trial_r.squaredNorm() : std::numeric_limits<double>::infinity();

    if (trial_cost < res.cost) {
      // Gain ratio against the linearized model.
      const Eigen::VectorXd js = res.jacobian * step;
      const double predicted = -(grad.dot(step)) - 0.5 * js.squaredNorm();
      const double rho = predicted > 0.0 ? (res.cost - trial_cost) / predicted : 1.0;
      res.params = trial;
      res.residuals = trial_r;
      res.jacobian = trial_j;
      res.cost = trial_cost;
      res.rms_history.push_back(std::sqrt(2.0 * res.cost / static_cast<double>(m)));
      damping *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (rel_step < options.tol) {
        res.converged = true;
        res.stop_reason = "relative step";
        break;
      }
      if (res.cost == 0.0) {
        res.converged = true;
        res.stop_reason = "zero residual";
        break;
      }
    } else {
      if (rel_step < options.tol) {
        // The damped step has shrunk below resolution without any further
        // decrease: the current point is a minimum to within tolerance.
        res.converged = true;
        res.stop_reason = "relative step";
        break;
      }
      damping *= nu;
      nu *= 2.0;
      if (damping > kMaxDamping) {
        res.stop_reason = "stalled";
        break;
      }
    }
  }
  if (!res.converged && res.stop_reason.empty()) res.stop_reason = "max_iter";
  return res;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& jacobian, double residual_variance) {
  const Eigen::Index n = jacobian.cols();
  Eigen::VectorXd norms = column_norms(jacobian);
  for (Eigen::Index c = 0; c < n; ++c) {
    if (!(norms(c) > 0.0)) throw DegenerateFitError("parameter has no influence on the residuals");
  }
  const Eigen::MatrixXd scaled = jacobian * norms.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(n - 1) <= 1e-12 * sv(0)) throw DegenerateFitError("singular normal matrix");
  const Eigen::MatrixXd v = svd.matrixV() * sv.cwiseInverse().asDiagonal();
  Eigen::MatrixXd inv_normal = v * v.transpose();
  inv_normal = norms.cwiseInverse().asDiagonal() * inv_normal * norms.cwiseInverse().asDiagonal();
  Eigen::MatrixXd cov = residual_variance * inv_normal;
  return 0.5 * (cov + cov.transpose());
}

}  // namespace qbar::lsq
