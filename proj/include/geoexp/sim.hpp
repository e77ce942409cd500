#pragma once

#include <Eigen/Core>

#include <optional>

#include "geoexp/design.hpp"
#include "geoexp/rng.hpp"

namespace geoexp {

/// Parameters of the synthetic sales model.
struct SimConfig {
  int geos = 20;
  int brands = 30;
  double phi = 1.0;        ///< log10 size range; sizes span 10^(7 - phi) .. 10^7
  double cv_pre = 0.15;    ///< per-week cv in the background period
  double cv_post = 0.10;   ///< per-week cv in the experimental period
  int n_pre = 8;           ///< weeks
  int n_post = 4;          ///< weeks
  double delta = 0.01;     ///< incremental spend as a fraction of y_pre
  double beta_mean = 5.0;
  double beta_sd = 1.0;

  /// Throws PreconditionError naming the first invalid field.
  void check() const;
};

struct GeoProfile {
  Eigen::VectorXd sizes;  ///< expected background-period sales per GEO
};

/// Per-(GEO, brand) observations. Matrices are G x B.
struct Dataset {
  Eigen::MatrixXd y_pre;
  Eigen::MatrixXd y_post;
  Eigen::MatrixXd x_post;
  std::optional<Eigen::VectorXd> true_beta;

  int geos() const { return static_cast<int>(y_pre.rows()); }
  int brands() const { return static_cast<int>(y_pre.cols()); }

  /// Throws DimensionError when the three matrices or true_beta disagree in shape.
  void check_shape() const;
};

/// Noise streams consumed by generate_dataset; sizes and effects are passed in
/// explicitly so that studies can hold them fixed across spend levels.
struct NoiseStreams {
  Rng& pre;
  Rng& post;
};

/// Standard Gamma(shape) variate with unit scale.
///
/// Marsaglia-Tsang squeeze/rejection for shape >= 1; shape < 1 uses the
/// boosted form Gam(shape + 1) * U^(1/shape).
double sample_gamma(double shape, Rng& rng);

/// Gamma shape n_weeks / cv^2 of an n-week aggregate.
double gamma_shape(double cv, int n_weeks);

/// mean * Gam(k) / k with k = n_weeks / cv^2: expectation `mean`, cv = cv / sqrt(n_weeks).
double sample_scaled_gamma(double mean, double cv, int n_weeks, Rng& rng);

/// S_g = 10^(7 - U_g), U_g ~ U(0, phi).
GeoProfile sample_geo_sizes(const SimConfig& config, Rng& rng);

/// B independent Normal(beta_mean, beta_sd^2) returns.
Eigen::VectorXd sample_brand_effects(const SimConfig& config, Rng& rng);

/// Draws sizes, effects and noise from a single stream, in that order.
Dataset generate_dataset(const DesignMatrix& design, const SimConfig& config, Rng& rng);

/// Draws only the Gamma noise; sizes and effects are given.
///
/// y_pre(g,b) = S_g Gam(k_pre)/k_pre, x_post = delta * y_pre on treated cells and 0
/// otherwise, y_post = (n_post/n_pre) S_g Gam(k_post)/k_post + beta_b x_post.
/// Noise is consumed in row-major order from each stream independently of delta.
Dataset generate_dataset(const DesignMatrix& design, const SimConfig& config,
                         const GeoProfile& sizes, const Eigen::VectorXd& effects,
                         NoiseStreams streams);

}  // namespace geoexp
