#include "geoexp/estimation.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "geoexp/error.hpp"

namespace geoexp {

ScaledCholesky::ScaledCholesky(const Eigen::MatrixXd& a, double tolerance) {
  const Eigen::Index n = a.rows();
  scale_.resize(n);
  lower_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(a(i, i) > 0.0)) {
      failed_pivot_ = static_cast<int>(i);
      return;
    }
    scale_(i) = 1.0 / std::sqrt(a(i, i));
  }
  const Eigen::MatrixXd s = scale_.asDiagonal() * a * scale_.asDiagonal();
  const double threshold = tolerance * s.diagonal().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = s(j, j) - lower_.row(j).head(j).squaredNorm();
    if (!(pivot > threshold)) {
      failed_pivot_ = static_cast<int>(j);
      return;
    }
    lower_(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      lower_(i, j) = (s(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / lower_(j, j);
    }
  }
  ok_ = true;
}

Eigen::VectorXd ScaledCholesky::solve(const Eigen::VectorXd& rhs) const {
  const auto l = lower_.triangularView<Eigen::Lower>();
  Eigen::VectorXd y = l.solve(scale_.cwiseProduct(rhs));
  y = l.transpose().solve(y);
  return scale_.cwiseProduct(y);
}

Eigen::MatrixXd ScaledCholesky::inverse() const {
  const Eigen::Index n = lower_.rows();
  const auto l = lower_.triangularView<Eigen::Lower>();
  Eigen::MatrixXd inv = l.solve(Eigen::MatrixXd::Identity(n, n));
  inv = l.transpose().solve(inv);
  return scale_.asDiagonal() * inv * scale_.asDiagonal();
}

double two_sided_t_pvalue(double t, int dof) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(static_cast<double>(dof));
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))), 0.0, 1.0);
}

FitResult wls_fit_single(std::span<const double> y_pre, std::span<const double> x_post,
                         std::span<const double> y_post) {
  const std::size_t n = y_pre.size();
  if (x_post.size() != n || y_post.size() != n) {
    throw DimensionError("y_pre, x_post and y_post must have equal length");
  }
  if (n < 4) {
    throw InsufficientDataError("weighted fit needs at least 4 GEOs, got " + std::to_string(n));
  }
  const auto geos = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x(geos, 3);
  Eigen::VectorXd y(geos);
  Eigen::VectorXd w(geos);
  for (Eigen::Index g = 0; g < geos; ++g) {
    const double pre = y_pre[static_cast<std::size_t>(g)];
    if (!(pre > 0.0)) throw PreconditionError("y_pre must be positive");
    x(g, 0) = 1.0;
    x(g, 1) = pre;
    x(g, 2) = x_post[static_cast<std::size_t>(g)];
    y(g) = y_post[static_cast<std::size_t>(g)];
    w(g) = 1.0 / (pre * pre);
  }
  const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  const ScaledCholesky chol(xtw * x);
  if (!chol.ok()) {
    throw DegenerateDesignError("weighted normal equations are singular (x_post collinear with "
                                "intercept and y_pre?)");
  }
  const Eigen::Vector3d coef = chol.solve(xtw * y);
  const Eigen::VectorXd resid = y - x * coef;
  const double rss = resid.cwiseProduct(resid).dot(w);

  FitResult fit;
  fit.alpha0 = coef(0);
  fit.alpha1 = coef(1);
  fit.beta_hat = coef(2);
  fit.dof = static_cast<int>(n) - 3;
  fit.sigma2_hat = rss / fit.dof;
  fit.var_beta = std::max(0.0, fit.sigma2_hat * chol.inverse()(2, 2));
  if (fit.var_beta > 0.0) {
    fit.p_value = two_sided_t_pvalue(fit.beta_hat / std::sqrt(fit.var_beta), fit.dof);
  } else {
    fit.p_value = fit.beta_hat == 0.0 ? 1.0 : 0.0;
  }
  return fit;
}

std::vector<FitResult> fit_all_brands(const Dataset& dataset) {
  dataset.check_shape();
  std::vector<FitResult> fits;
  fits.reserve(static_cast<std::size_t>(dataset.brands()));
  Eigen::VectorXd pre(dataset.geos());
  Eigen::VectorXd x(dataset.geos());
  Eigen::VectorXd post(dataset.geos());
  for (int b = 0; b < dataset.brands(); ++b) {
    pre = dataset.y_pre.col(b);
    x = dataset.x_post.col(b);
    post = dataset.y_post.col(b);
    try {
      fits.push_back(wls_fit_single(std::span<const double>(pre.data(), pre.size()),
                                    std::span<const double>(x.data(), x.size()),
                                    std::span<const double>(post.data(), post.size())));
    } catch (const DegenerateDesignError& e) {
      throw DegenerateDesignError("brand " + std::to_string(b + 1) + ": " + e.what());
    } catch (const InsufficientDataError& e) {
      throw InsufficientDataError("brand " + std::to_string(b + 1) + ": " + e.what());
    } catch (const Error& e) {
      throw PreconditionError("brand " + std::to_string(b + 1) + ": " + e.what());
    }
  }
  return fits;
}

PooledEstimate pooled_mean(std::span<const FitResult> fits) {
  if (fits.empty()) throw InsufficientDataError("pooled mean of an empty fit list");
  const auto count = static_cast<double>(fits.size());
  double sum = 0.0;
  double var_sum = 0.0;
  for (const FitResult& fit : fits) {
    sum += fit.beta_hat;
    var_sum += fit.var_beta;
  }
  return {sum / count, var_sum / (count * count)};
}

Eigen::MatrixXd geo_response_regressors(const Dataset& dataset) {
  dataset.check_shape();
  const int geos = dataset.geos();
  const int brands = dataset.brands();
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(geos) * brands, 3 * brands + geos);
  for (int g = 0; g < geos; ++g) {
    for (int b = 0; b < brands; ++b) {
      const Eigen::Index row = static_cast<Eigen::Index>(g) * brands + b;
      u(row, 3 * b) = 1.0;
      u(row, 3 * b + 1) = dataset.y_pre(g, b);
      u(row, 3 * b + 2) = dataset.x_post(g, b);
      u(row, 3 * brands + g) = dataset.x_post(g, b);
    }
  }
  return u;
}

namespace {

std::string constrained_parameter_name(Eigen::Index k, int brands) {
  if (k < 3 * brands) {
    static const char* kNames[] = {"alpha0_", "alpha1_", "beta_"};
    return kNames[k % 3] + std::to_string(k / 3 + 1);
  }
  return "gamma_" + std::to_string(k - 3 * brands + 1);
}

std::string describe_null_direction(const Eigen::MatrixXd& weighted_x, int brands) {
  // Unit-norm columns so the smallest singular direction is not an artifact of scale.
  Eigen::MatrixXd normalized = weighted_x;
  for (Eigen::Index j = 0; j < normalized.cols(); ++j) {
    const double norm = normalized.col(j).norm();
    if (norm > 0.0) normalized.col(j) /= norm;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(normalized, Eigen::ComputeThinV);
  const Eigen::VectorXd v = svd.matrixV().col(svd.matrixV().cols() - 1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return std::fabs(v(a)) > std::fabs(v(b)); });
  std::string text;
  for (std::size_t i = 0; i < std::min<std::size_t>(4, order.size()); ++i) {
    if (std::fabs(v(order[i])) < 1e-6) break;
    if (!text.empty()) text += " ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.3f*", v(order[i]));
    text += buf + constrained_parameter_name(order[i], brands);
  }
  return text;
}

}  // namespace

GeoResponseFit fit_geo_responsiveness(const Dataset& dataset) {
  dataset.check_shape();
  const int geos = dataset.geos();
  const int brands = dataset.brands();
  const Eigen::Index rows = static_cast<Eigen::Index>(geos) * brands;
  const Eigen::Index params = 3 * brands + geos - 1;
  if (rows < 3 * brands + geos) {
    throw InsufficientDataError("GEO-responsiveness fit needs G*B >= 3B + G observations");
  }
  if ((dataset.y_pre.array() <= 0.0).any()) throw PreconditionError("y_pre must be positive");
  for (int g = 0; g < geos; ++g) {
    const bool any_treated = (dataset.x_post.row(g).array() != 0.0).any();
    const bool any_control = (dataset.x_post.row(g).array() == 0.0).any();
    if (!any_treated || !any_control) {
      throw PreconditionError("GEO " + std::to_string(g + 1) +
                              " must be treated for some brands and control for others");
    }
  }

  // gamma_G = -sum of the others, so each free gamma_g column is x(g) - x(G).
  const Eigen::MatrixXd u = geo_response_regressors(dataset);
  Eigen::MatrixXd x(rows, params);
  x.leftCols(3 * brands) = u.leftCols(3 * brands);
  for (int g = 0; g + 1 < geos; ++g) {
    x.col(3 * brands + g) = u.col(3 * brands + g) - u.col(3 * brands + geos - 1);
  }
  Eigen::VectorXd y(rows);
  Eigen::VectorXd w(rows);
  for (int g = 0; g < geos; ++g) {
    for (int b = 0; b < brands; ++b) {
      const Eigen::Index row = static_cast<Eigen::Index>(g) * brands + b;
      y(row) = dataset.y_post(g, b);
      w(row) = 1.0 / (dataset.y_pre(g, b) * dataset.y_pre(g, b));
    }
  }

  const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  const ScaledCholesky chol(xtw * x);
  if (!chol.ok()) {
    const Eigen::MatrixXd weighted_x = w.cwiseSqrt().asDiagonal() * x;
    throw IdentifiabilityError("GEO-responsiveness model is rank deficient; null direction: " +
                               describe_null_direction(weighted_x, brands));
  }
  const Eigen::VectorXd coef = chol.solve(xtw * y);
  const Eigen::VectorXd resid = y - x * coef;
  const double rss = resid.cwiseProduct(resid).dot(w);

  GeoResponseFit fit;
  fit.dof = static_cast<int>(rows - params);
  fit.sigma2_hat = rss / fit.dof;
  const Eigen::MatrixXd cov = fit.sigma2_hat * chol.inverse();

  fit.beta.resize(brands);
  fit.beta_se.resize(brands);
  fit.alphas.resize(brands, 2);
  for (int b = 0; b < brands; ++b) {
    fit.alphas(b, 0) = coef(3 * b);
    fit.alphas(b, 1) = coef(3 * b + 1);
    fit.beta(b) = coef(3 * b + 2);
    fit.beta_se(b) = std::sqrt(std::max(0.0, cov(3 * b + 2, 3 * b + 2)));
  }
  fit.gamma.resize(geos);
  fit.gamma_se.resize(geos);
  const Eigen::Index first = 3 * brands;
  const Eigen::Index free = geos - 1;
  for (Eigen::Index g = 0; g < free; ++g) {
    fit.gamma(g) = coef(first + g);
    fit.gamma_se(g) = std::sqrt(std::max(0.0, cov(first + g, first + g)));
  }
  fit.gamma(geos - 1) = -coef.segment(first, free).sum();
  fit.gamma_se(geos - 1) = std::sqrt(std::max(0.0, cov.block(first, first, free, free).sum()));
  return fit;
}

}  // namespace geoexp
