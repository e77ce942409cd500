#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "geoexp/sim.hpp"

namespace geoexp {

/// Weighted least squares fit of y_post = alpha0 + alpha1 y_pre + beta x_post
/// with weights 1 / y_pre^2.
struct FitResult {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double beta_hat = 0.0;
  double var_beta = 0.0;
  double p_value = 1.0;  ///< two-sided, H0: beta = 0, Student t with dof
  int dof = 0;           ///< G - 3
  double sigma2_hat = 0.0;
};

struct PooledEstimate {
  double beta_bar_hat = 0.0;
  double var_beta_bar = 0.0;
};

/// Joint fit of the model with per-GEO adjustments gamma_g to every brand's
/// return, identified by sum_g gamma_g = 0.
struct GeoResponseFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::MatrixXd alphas;  ///< B x 2: (alpha0_b, alpha1_b)
  Eigen::VectorXd beta_se;
  Eigen::VectorXd gamma_se;
  double sigma2_hat = 0.0;
  int dof = 0;
};

/// Cholesky factorization of a symmetric positive definite matrix after
/// symmetric diagonal scaling to unit diagonal. A pivot below
/// `tolerance` times the largest scaled diagonal is treated as singular.
class ScaledCholesky {
 public:
  static constexpr double kDefaultTolerance = 1e-12;

  explicit ScaledCholesky(const Eigen::MatrixXd& a, double tolerance = kDefaultTolerance);

  bool ok() const { return ok_; }
  /// Index of the first pivot that failed, -1 when ok().
  int failed_pivot() const { return failed_pivot_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::VectorXd scale_;
  Eigen::MatrixXd lower_;
  bool ok_ = false;
  int failed_pivot_ = -1;
};

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
double two_sided_t_pvalue(double t, int dof);

/// Throws InsufficientDataError when G < 4, PreconditionError on non-positive
/// y_pre or length mismatch, DegenerateDesignError on singular normal equations.
FitResult wls_fit_single(std::span<const double> y_pre, std::span<const double> x_post,
                         std::span<const double> y_post);

/// One independent fit per brand column. Errors are rethrown with the brand index.
std::vector<FitResult> fit_all_brands(const Dataset& dataset);

PooledEstimate pooled_mean(std::span<const FitResult> fits);

/// The G*B x (3B + G) regressor matrix of the GEO-responsiveness model before
/// the sum-to-zero constraint. Column order: alpha0_b, alpha1_b, beta_b for
/// each brand, then gamma_g. Row order is (g, b) with b fastest.
Eigen::MatrixXd geo_response_regressors(const Dataset& dataset);

GeoResponseFit fit_geo_responsiveness(const Dataset& dataset);

}  // namespace geoexp
