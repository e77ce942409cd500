#include "geoexp/sim.hpp"

#include <cmath>
#include <string>

#include "geoexp/error.hpp"

namespace geoexp {

void SimConfig::check() const {
  auto fail = [](const std::string& what) { throw PreconditionError("invalid sim config: " + what); };
  if (geos < 1) fail("geos must be positive");
  if (brands < 1) fail("brands must be positive");
  if (!(phi >= 0.0)) fail("phi must be >= 0");
  if (!(cv_pre > 0.0 && cv_pre < 1.0)) fail("cv_pre must lie in (0, 1)");
  if (!(cv_post > 0.0 && cv_post < 1.0)) fail("cv_post must lie in (0, 1)");
  if (n_pre < 1) fail("n_pre must be >= 1");
  if (n_post < 1) fail("n_post must be >= 1");
  if (!(delta >= 0.0)) fail("delta must be >= 0");
  if (!(beta_sd >= 0.0)) fail("beta_sd must be >= 0");
  if (!std::isfinite(beta_mean)) fail("beta_mean must be finite");
}

void Dataset::check_shape() const {
  if (y_pre.size() == 0) throw DimensionError("dataset is empty");
  if (y_post.rows() != y_pre.rows() || y_post.cols() != y_pre.cols() ||
      x_post.rows() != y_pre.rows() || x_post.cols() != y_pre.cols()) {
    throw DimensionError("y_pre, y_post and x_post must share one G x B shape");
  }
  if (true_beta && true_beta->size() != y_pre.cols()) {
    throw DimensionError("true_beta length must equal the number of brands");
  }
}

// Marsaglia, G. and Tsang, W. W. (2000), "A simple method for generating gamma
// variables", ACM TOMS 26(3). With d = k - 1/3 and c = 1/sqrt(9d), the variate
// d (1 + c x)^3 for standard normal x is accepted by a cheap squeeze and, failing
// that, by the exact log test.
double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw PreconditionError("gamma shape must be positive");
  if (shape < 1.0) {
    const double u = rng.uniform_open();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = rng.normal();
    const double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    const double v = t * t * t;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double gamma_shape(double cv, int n_weeks) {
  return static_cast<double>(n_weeks) / (cv * cv);
}

double sample_scaled_gamma(double mean, double cv, int n_weeks, Rng& rng) {
  if (!(mean > 0.0) || !(cv > 0.0) || n_weeks < 1) {
    throw PreconditionError("scaled gamma needs mean > 0, cv > 0, n_weeks >= 1");
  }
  const double kappa = gamma_shape(cv, n_weeks);
  return mean * sample_gamma(kappa, rng) / kappa;
}

GeoProfile sample_geo_sizes(const SimConfig& config, Rng& rng) {
  if (!(config.phi >= 0.0)) throw PreconditionError("phi must be >= 0");
  GeoProfile profile{Eigen::VectorXd(config.geos)};
  for (int g = 0; g < config.geos; ++g) {
    const double u = config.phi * rng.uniform();
    profile.sizes(g) = std::pow(10.0, 7.0 - u);
  }
  return profile;
}

Eigen::VectorXd sample_brand_effects(const SimConfig& config, Rng& rng) {
  if (!(config.beta_sd >= 0.0)) throw PreconditionError("beta_sd must be >= 0");
  Eigen::VectorXd beta(config.brands);
  for (int b = 0; b < config.brands; ++b) beta(b) = config.beta_mean + config.beta_sd * rng.normal();
  return beta;
}

Dataset generate_dataset(const DesignMatrix& design, const SimConfig& config, Rng& rng) {
  const GeoProfile sizes = sample_geo_sizes(config, rng);
  const Eigen::VectorXd effects = sample_brand_effects(config, rng);
  return generate_dataset(design, config, sizes, effects, NoiseStreams{rng, rng});
}

Dataset generate_dataset(const DesignMatrix& design, const SimConfig& config,
                         const GeoProfile& sizes, const Eigen::VectorXd& effects,
                         NoiseStreams streams) {
  config.check();
  if (design.geos() != config.geos || design.brands() != config.brands) {
    throw DimensionError("design is " + std::to_string(design.geos()) + "x" +
                         std::to_string(design.brands()) + " but config expects " +
                         std::to_string(config.geos) + "x" + std::to_string(config.brands));
  }
  if (sizes.sizes.size() != config.geos) throw DimensionError("one size per GEO required");
  if (effects.size() != config.brands) throw DimensionError("one effect per brand required");

  const int geos = config.geos;
  const int brands = config.brands;
  const double window_ratio = static_cast<double>(config.n_post) / config.n_pre;

  Dataset data;
  data.y_pre.resize(geos, brands);
  data.y_post.resize(geos, brands);
  data.x_post.resize(geos, brands);
  data.true_beta = effects;

  for (int g = 0; g < geos; ++g) {
    for (int b = 0; b < brands; ++b) {
      data.y_pre(g, b) = sample_scaled_gamma(sizes.sizes(g), config.cv_pre, config.n_pre, streams.pre);
    }
  }
  for (int g = 0; g < geos; ++g) {
    for (int b = 0; b < brands; ++b) {
      const double x = design.treated(g, b) ? config.delta * data.y_pre(g, b) : 0.0;
      const double base =
          window_ratio * sample_scaled_gamma(sizes.sizes(g), config.cv_post, config.n_post, streams.post);
      data.x_post(g, b) = x;
      data.y_post(g, b) = base + effects(b) * x;
    }
  }
  return data;
}

}  // namespace geoexp
