#include "geoexp/shrinkage.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "geoexp/error.hpp"

namespace geoexp {

namespace {

void check_inputs(std::span<const double> beta_hats, std::span<const double> var_hats) {
  if (beta_hats.size() != var_hats.size()) {
    throw DimensionError("beta_hats and var_hats must have equal length");
  }
  if (beta_hats.empty()) throw InsufficientDataError("shrinkage needs at least one brand");
  for (double v : var_hats) {
    if (!(v > 0.0)) throw PreconditionError("variance estimates must be positive");
  }
}

double mean_of(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double own_weight(double var, double lambda) {
  return std::isinf(lambda) ? 1.0 : lambda / (var + lambda);
}

}  // namespace

double sure_g(double lambda, std::span<const double> beta_hats, std::span<const double> var_hats) {
  check_inputs(beta_hats, var_hats);
  if (beta_hats.size() < 2) throw InsufficientDataError("SURE needs at least two brands");
  if (!(lambda >= 0.0)) throw PreconditionError("lambda must be >= 0");
  const auto brands = static_cast<double>(beta_hats.size());
  if (std::isinf(lambda)) {
    return mean_of(var_hats);
  }
  const double grand = mean_of(beta_hats);
  double total = 0.0;
  for (std::size_t b = 0; b < beta_hats.size(); ++b) {
    const double v = var_hats[b];
    const double pooled_weight = v / (v + lambda);
    const double dev = beta_hats[b] - grand;
    total += pooled_weight * pooled_weight * dev * dev;
    total += pooled_weight * (lambda - v + 2.0 * v / brands);
  }
  return total / brands;
}

Eigen::VectorXd shrink(std::span<const double> beta_hats, std::span<const double> var_hats,
                       double lambda) {
  check_inputs(beta_hats, var_hats);
  if (!(lambda >= 0.0)) throw PreconditionError("lambda must be >= 0");
  const double grand = mean_of(beta_hats);
  Eigen::VectorXd out(static_cast<Eigen::Index>(beta_hats.size()));
  for (std::size_t b = 0; b < beta_hats.size(); ++b) {
    const double w = own_weight(var_hats[b], lambda);
    out(static_cast<Eigen::Index>(b)) = w * beta_hats[b] + (1.0 - w) * grand;
  }
  return out;
}

ShrinkageResult choose_lambda(std::span<const double> beta_hats, std::span<const double> var_hats,
                              int grid_points) {
  check_inputs(beta_hats, var_hats);
  if (beta_hats.size() < 2) throw InsufficientDataError("SURE needs at least two brands");
  if (grid_points < 2) throw PreconditionError("grid needs at least two points");
  const double mean_var = mean_of(var_hats);
  const int last = grid_points - 1;

  ShrinkageResult best;
  bool have_best = false;
  for (int k = 0; k <= last; ++k) {
    const double u = static_cast<double>(k) / last;
    const double lambda = k == last ? kInfiniteLambda : mean_var * u / (1.0 - u);
    const double risk = sure_g(lambda, beta_hats, var_hats);
    // <= so that ties resolve toward larger u.
    if (!have_best || risk <= best.sure_value) {
      best.sure_value = risk;
      best.u = u;
      best.lambda = lambda;
      have_best = true;
    }
  }
  best.beta_bar_hat = mean_of(beta_hats);
  best.beta_tilde = shrink(beta_hats, var_hats, best.lambda);
  best.weights.resize(static_cast<Eigen::Index>(beta_hats.size()));
  for (std::size_t b = 0; b < beta_hats.size(); ++b) {
    best.weights(static_cast<Eigen::Index>(b)) = own_weight(var_hats[b], best.lambda);
  }
  return best;
}

double efficiency(std::span<const double> beta_hats, std::span<const double> beta_tildes,
                  std::span<const double> beta_true) {
  if (beta_hats.size() != beta_tildes.size() || beta_hats.size() != beta_true.size()) {
    throw DimensionError("efficiency inputs must have equal length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t b = 0; b < beta_hats.size(); ++b) {
    num += (beta_hats[b] - beta_true[b]) * (beta_hats[b] - beta_true[b]);
    den += (beta_tildes[b] - beta_true[b]) * (beta_tildes[b] - beta_true[b]);
  }
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace geoexp
