#pragma once

#include <Eigen/Core>

#include <limits>
#include <span>

namespace geoexp {

inline constexpr double kInfiniteLambda = std::numeric_limits<double>::infinity();

struct ShrinkageResult {
  double lambda = kInfiniteLambda;
  double u = 1.0;  ///< grid coordinate: typical weight on a brand's own estimate
  double beta_bar_hat = 0.0;
  Eigen::VectorXd beta_tilde;
  Eigen::VectorXd weights;  ///< lambda / (var_b + lambda)
  double sure_value = 0.0;
};

/// Stein unbiased risk estimate of the shrinkage estimator at `lambda`, per
/// brand average. lambda = infinity gives the risk of the unshrunk estimates.
double sure_g(double lambda, std::span<const double> beta_hats, std::span<const double> var_hats);

/// beta_tilde_b = w_b beta_hat_b + (1 - w_b) mean(beta_hat), w_b = lambda / (var_b + lambda).
Eigen::VectorXd shrink(std::span<const double> beta_hats, std::span<const double> var_hats,
                       double lambda);

/// Grid search over u in {0, 1/(n-1), ..., 1} with lambda = mean(var) u / (1 - u).
/// Ties go to the larger u.
ShrinkageResult choose_lambda(std::span<const double> beta_hats, std::span<const double> var_hats,
                              int grid_points = 1001);

/// sum (beta_hat - beta)^2 / sum (beta_tilde - beta)^2; +infinity when the
/// denominator is zero.
double efficiency(std::span<const double> beta_hats, std::span<const double> beta_tildes,
                  std::span<const double> beta_true);

}  // namespace geoexp
