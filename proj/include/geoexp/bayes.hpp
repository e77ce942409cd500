#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoexp/rng.hpp"
#include "geoexp/sim.hpp"

namespace geoexp {

/// Inverse-gamma with density proportional to x^(-shape-1) exp(-rate / x).
struct InverseGamma {
  double shape = 1e-3;
  double rate = 1e-3;
};

/// How the observation standard deviation of y_post scales with y_pre.
enum class NoiseScale {
  /// sd = sigma_b * y_pre; weights 1 / y_pre^2, as in the frequentist fits.
  times_pre,
  /// sd = sigma_b / y_pre; weights y_pre^2.
  over_pre,
};

struct BayesConfig {
  int iterations = 2000;
  int burn_in = 1000;
  int chains = 4;
  int thin = 1;
  InverseGamma obs_prior{1e-3, 1e-3};   ///< prior on each sigma_b^2
  InverseGamma beta_prior{0.5, 0.5};    ///< prior on sigma_beta^2
  double level = 0.95;
  NoiseScale noise_scale = NoiseScale::times_pre;

  /// Hold every sigma_b^2 at this value instead of sampling it.
  std::optional<double> fixed_sigma2_obs;
  /// Hold sigma_beta^2 at this value instead of sampling it.
  std::optional<double> fixed_sigma2_beta;

  void check() const;
  int retained_per_chain() const { return (iterations - burn_in + thin - 1) / thin; }
};

/// Retained Gibbs draws. Each chain is a (retained x parameters) matrix with
/// columns alpha0_b, alpha1_b, beta_b, sigma2_b for b = 1..B followed by the
/// grand mean beta and sigma2_beta.
struct PosteriorChains {
  int brands = 0;
  std::vector<Eigen::MatrixXd> draws;
  std::vector<std::int64_t> iterations;  ///< 1-based sampler iteration of each retained row

  static int alpha0_index(int brand) { return 4 * brand; }
  static int alpha1_index(int brand) { return 4 * brand + 1; }
  static int beta_index(int brand) { return 4 * brand + 2; }
  static int sigma2_index(int brand) { return 4 * brand + 3; }
  int grand_beta_index() const { return 4 * brands; }
  int sigma2_beta_index() const { return 4 * brands + 1; }
  int parameter_count() const { return 4 * brands + 2; }

  std::vector<std::string> parameter_names() const;
  /// All retained draws of one parameter, chains concatenated in order.
  Eigen::VectorXd pooled(int parameter) const;
  std::int64_t total_draws() const;
};

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double half_width = 0.0;
};

struct IntervalSummary {
  double level = 0.95;
  std::vector<Interval> brands;
  Interval grand;
};

/// Conjugate Gibbs sampler for the hierarchical model
///   y_post(g,b) ~ N(alpha0_b + alpha1_b y_pre + beta_b x_post, sd(g,b)^2),
///   sigma_b^2 ~ IG(obs_prior), beta_b ~ N(beta, sigma_beta^2),
///   sigma_beta^2 ~ IG(beta_prior), flat priors on beta and the alphas.
///
/// Chain seeds are drawn from `rng`; chains are independent given those seeds.
/// Throws ModelViolationError when any y_pre <= 0.
PosteriorChains gibbs_run(const Dataset& dataset, const BayesConfig& config, Rng& rng);

/// Equal-tailed interval with type-7 (linear interpolation) quantiles.
/// Throws InsufficientDataError for fewer than 100 draws.
Interval summarize_draws(std::span<const double> draws, double level);

IntervalSummary summarize_posterior(const PosteriorChains& chains, double level);

/// Gelman-Rubin potential scale reduction across chains.
double potential_scale_reduction(const PosteriorChains& chains, int parameter);

struct CoverageCell {
  double beta_mean = 0.0;
  double beta_sd = 0.0;
  double delta = 0.0;
  double coverage = 0.0;  ///< fraction of (replicate, brand) intervals containing the truth
  int replicates = 0;
};

/// Frequentist coverage of the credible intervals for each (beta_mean, beta_sd)
/// cell. Each replicate draws a fresh scrambled design, sizes, effects and data.
/// Requires replicates >= 100.
std::vector<CoverageCell> coverage_study(const SimConfig& sim, const BayesConfig& bayes,
                                         std::span<const std::pair<double, double>> cells,
                                         int replicates, std::uint64_t master_seed, int jobs = 1);

}  // namespace geoexp
