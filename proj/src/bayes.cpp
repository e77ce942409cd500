#include "geoexp/bayes.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "geoexp/error.hpp"
#include "geoexp/estimation.hpp"
#include "geoexp/study.hpp"

namespace geoexp {

void BayesConfig::check() const {
  auto fail = [](const std::string& what) { throw PreconditionError("invalid bayes config: " + what); };
  if (iterations < 1) fail("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) fail("burn_in must lie in [0, iterations)");
  if (chains < 1) fail("chains must be positive");
  if (thin < 1) fail("thin must be positive");
  if (!(obs_prior.shape > 0.0 && obs_prior.rate > 0.0)) fail("obs prior must be proper");
  if (!(beta_prior.shape > 0.0 && beta_prior.rate > 0.0)) fail("beta prior must be proper");
  if (!(level > 0.0 && level < 1.0)) fail("level must lie in (0, 1)");
  if (fixed_sigma2_obs && !(*fixed_sigma2_obs > 0.0)) fail("fixed_sigma2_obs must be positive");
  if (fixed_sigma2_beta && !(*fixed_sigma2_beta > 0.0)) fail("fixed_sigma2_beta must be positive");
}

std::vector<std::string> PosteriorChains::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(parameter_count()));
  for (int b = 1; b <= brands; ++b) {
    const std::string k = std::to_string(b);
    names.push_back("alpha0_" + k);
    names.push_back("alpha1_" + k);
    names.push_back("beta_" + k);
    names.push_back("sigma2_" + k);
  }
  names.emplace_back("beta");
  names.emplace_back("sigma2_beta");
  return names;
}

Eigen::VectorXd PosteriorChains::pooled(int parameter) const {
  Eigen::VectorXd out(total_draws());
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd& chain : draws) {
    out.segment(at, chain.rows()) = chain.col(parameter);
    at += chain.rows();
  }
  return out;
}

std::int64_t PosteriorChains::total_draws() const {
  std::int64_t n = 0;
  for (const Eigen::MatrixXd& chain : draws) n += chain.rows();
  return n;
}

namespace {

// Sufficient statistics of one brand's weighted regression in scaled
// coordinates phi = theta ./ scale, where scale_i = 1 / sqrt(A_ii). The
// residual sum of squares at any theta is rss_min + (phi - phi_hat)' A (phi - phi_hat).
struct BrandStats {
  Eigen::Vector3d scale;
  Eigen::Matrix3d gram;  ///< scaled X'WX, unit diagonal
  Eigen::Vector3d xty;   ///< scaled X'Wy
  Eigen::Vector3d phi_hat;
  double rss_min = 0.0;
  int geos = 0;
};

BrandStats brand_stats(const Dataset& data, int b, NoiseScale noise_scale) {
  const int geos = data.geos();
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (int g = 0; g < geos; ++g) {
    const double pre = data.y_pre(g, b);
    const double w = noise_scale == NoiseScale::times_pre ? 1.0 / (pre * pre) : pre * pre;
    const Eigen::Vector3d row(1.0, pre, data.x_post(g, b));
    a.noalias() += w * row * row.transpose();
    c.noalias() += w * data.y_post(g, b) * row;
  }
  BrandStats s;
  s.geos = geos;
  s.scale = a.diagonal().cwiseSqrt().cwiseInverse();
  s.gram = s.scale.asDiagonal() * a * s.scale.asDiagonal();
  s.xty = s.scale.cwiseProduct(c);
  const Eigen::LLT<Eigen::Matrix3d> llt(s.gram);
  if (llt.info() != Eigen::Success || !(s.scale.array().isFinite().all())) {
    throw DegenerateDesignError("brand " + std::to_string(b + 1) +
                                ": regression design is singular (no treated/control contrast?)");
  }
  s.phi_hat = llt.solve(s.xty);
  const Eigen::Vector3d theta_hat = s.scale.cwiseProduct(s.phi_hat);
  double rss = 0.0;
  for (int g = 0; g < geos; ++g) {
    const double pre = data.y_pre(g, b);
    const double w = noise_scale == NoiseScale::times_pre ? 1.0 / (pre * pre) : pre * pre;
    const double r = data.y_post(g, b) - theta_hat(0) - theta_hat(1) * pre -
                     theta_hat(2) * data.x_post(g, b);
    rss += w * r * r;
  }
  s.rss_min = rss;
  return s;
}

double sample_inverse_gamma(double shape, double rate, Rng& rng) {
  return rate / sample_gamma(shape, rng);
}

struct ChainState {
  std::vector<Eigen::Vector3d> theta;
  std::vector<double> sigma2;
  double beta = 0.0;
  double sigma2_beta = 1.0;
};

ChainState initial_state(const std::vector<BrandStats>& stats, const BayesConfig& config,
                         Rng& rng) {
  const auto brands = static_cast<int>(stats.size());
  ChainState st;
  st.theta.resize(stats.size());
  st.sigma2.resize(stats.size());
  double mean_beta = 0.0;
  for (int b = 0; b < brands; ++b) {
    const BrandStats& s = stats[static_cast<std::size_t>(b)];
    st.theta[static_cast<std::size_t>(b)] = s.scale.cwiseProduct(s.phi_hat);
    mean_beta += st.theta[static_cast<std::size_t>(b)](2) / brands;
    const int dof = std::max(1, s.geos - 3);
    double sigma2 = s.rss_min / dof;
    if (!(sigma2 > 0.0)) sigma2 = config.obs_prior.rate / config.obs_prior.shape;
    st.sigma2[static_cast<std::size_t>(b)] =
        config.fixed_sigma2_obs ? *config.fixed_sigma2_obs : sigma2 * std::exp(0.5 * rng.normal());
  }
  double spread = 0.0;
  for (int b = 0; b < brands; ++b) {
    const double d = st.theta[static_cast<std::size_t>(b)](2) - mean_beta;
    spread += d * d;
  }
  spread = brands > 1 ? spread / (brands - 1) : 1.0;
  if (!(spread > 0.0)) spread = 1.0;
  st.sigma2_beta = config.fixed_sigma2_beta ? *config.fixed_sigma2_beta
                                            : spread * std::exp(0.5 * rng.normal());
  st.beta = mean_beta + std::sqrt(spread / brands) * rng.normal();
  return st;
}

Eigen::MatrixXd run_chain(const std::vector<BrandStats>& stats, const BayesConfig& config,
                          Rng& rng, std::vector<std::int64_t>* iterations) {
  const auto brands = static_cast<int>(stats.size());
  const int params = 4 * brands + 2;
  Eigen::MatrixXd out(config.retained_per_chain(), params);
  ChainState st = initial_state(stats, config, rng);

  Eigen::Index row = 0;
  for (int t = 1; t <= config.iterations; ++t) {
    double beta_sum = 0.0;
    for (int b = 0; b < brands; ++b) {
      const BrandStats& s = stats[static_cast<std::size_t>(b)];
      const auto ub = static_cast<std::size_t>(b);
      // Joint (alpha0, alpha1, beta_b) | rest is Gaussian with precision
      // A / sigma_b^2 + diag(0, 0, 1 / sigma_beta^2) in scaled coordinates.
      const double prior_precision = s.scale(2) * s.scale(2) / st.sigma2_beta;
      Eigen::Matrix3d precision = s.gram / st.sigma2[ub];
      precision(2, 2) += prior_precision;
      Eigen::Vector3d rhs = s.xty / st.sigma2[ub];
      rhs(2) += s.scale(2) * st.beta / st.sigma2_beta;
      const Eigen::LLT<Eigen::Matrix3d> llt(precision);
      const Eigen::Vector3d mean = llt.solve(rhs);
      const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
      const Eigen::Vector3d phi = mean + llt.matrixU().solve(z);
      st.theta[ub] = s.scale.cwiseProduct(phi);
      beta_sum += st.theta[ub](2);

      if (!config.fixed_sigma2_obs) {
        const Eigen::Vector3d d = phi - s.phi_hat;
        const double rss = s.rss_min + std::max(0.0, d.dot(s.gram * d));
        st.sigma2[ub] = sample_inverse_gamma(config.obs_prior.shape + 0.5 * s.geos,
                                             config.obs_prior.rate + 0.5 * rss, rng);
      }
    }

    // Flat prior on the grand mean.
    st.beta = beta_sum / brands + std::sqrt(st.sigma2_beta / brands) * rng.normal();

    if (!config.fixed_sigma2_beta) {
      double ss = 0.0;
      for (int b = 0; b < brands; ++b) {
        const double d = st.theta[static_cast<std::size_t>(b)](2) - st.beta;
        ss += d * d;
      }
      st.sigma2_beta = sample_inverse_gamma(config.beta_prior.shape + 0.5 * brands,
                                            config.beta_prior.rate + 0.5 * ss, rng);
    }

    if (t > config.burn_in && (t - config.burn_in - 1) % config.thin == 0) {
      for (int b = 0; b < brands; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        out(row, PosteriorChains::alpha0_index(b)) = st.theta[ub](0);
        out(row, PosteriorChains::alpha1_index(b)) = st.theta[ub](1);
        out(row, PosteriorChains::beta_index(b)) = st.theta[ub](2);
        out(row, PosteriorChains::sigma2_index(b)) = st.sigma2[ub];
      }
      out(row, 4 * brands) = st.beta;
      out(row, 4 * brands + 1) = st.sigma2_beta;
      if (iterations) iterations->push_back(t);
      ++row;
    }
  }
  return out;
}

}  // namespace

PosteriorChains gibbs_run(const Dataset& dataset, const BayesConfig& config, Rng& rng) {
  config.check();
  dataset.check_shape();
  if ((dataset.y_pre.array() <= 0.0).any()) {
    throw ModelViolationError("y_pre must be positive for the hierarchical model");
  }
  if (dataset.geos() < 4) throw InsufficientDataError("hierarchical model needs at least 4 GEOs");

  std::vector<BrandStats> stats;
  stats.reserve(static_cast<std::size_t>(dataset.brands()));
  for (int b = 0; b < dataset.brands(); ++b) stats.push_back(brand_stats(dataset, b, config.noise_scale));

  PosteriorChains chains;
  chains.brands = dataset.brands();
  chains.draws.reserve(static_cast<std::size_t>(config.chains));
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < config.chains; ++c) seeds.push_back(rng.next_u64());
  for (int c = 0; c < config.chains; ++c) {
    Rng chain_rng(seeds[static_cast<std::size_t>(c)]);
    chains.draws.push_back(run_chain(stats, config, chain_rng, c == 0 ? &chains.iterations : nullptr));
  }
  return chains;
}

Interval summarize_draws(std::span<const double> draws, double level) {
  if (draws.size() < 100) {
    throw InsufficientDataError("credible intervals need at least 100 draws, got " +
                                std::to_string(draws.size()));
  }
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("level must lie in (0, 1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  Interval out;
  double sum = 0.0;
  for (double d : sorted) sum += d;
  out.mean = sum / static_cast<double>(sorted.size());
  const double tail = 0.5 * (1.0 - level);
  out.lo = quantile(tail);
  out.hi = quantile(1.0 - tail);
  // Keep lo <= mean <= hi under rounding of constant chains.
  out.lo = std::min(out.lo, out.mean);
  out.hi = std::max(out.hi, out.mean);
  out.half_width = 0.5 * (out.hi - out.lo);
  return out;
}

IntervalSummary summarize_posterior(const PosteriorChains& chains, double level) {
  IntervalSummary summary;
  summary.level = level;
  for (int b = 0; b < chains.brands; ++b) {
    const Eigen::VectorXd d = chains.pooled(PosteriorChains::beta_index(b));
    summary.brands.push_back(summarize_draws(std::span<const double>(d.data(), d.size()), level));
  }
  const Eigen::VectorXd grand = chains.pooled(chains.grand_beta_index());
  summary.grand = summarize_draws(std::span<const double>(grand.data(), grand.size()), level);
  return summary;
}

double potential_scale_reduction(const PosteriorChains& chains, int parameter) {
  const auto m = static_cast<double>(chains.draws.size());
  if (chains.draws.size() < 2) throw InsufficientDataError("R-hat needs at least two chains");
  const Eigen::Index len = chains.draws.front().rows();
  if (len < 2) throw InsufficientDataError("R-hat needs at least two draws per chain");
  const auto n = static_cast<double>(len);
  Eigen::VectorXd means(chains.draws.size());
  double within = 0.0;
  for (std::size_t c = 0; c < chains.draws.size(); ++c) {
    const Eigen::VectorXd x = chains.draws[c].col(parameter);
    means(static_cast<Eigen::Index>(c)) = x.mean();
    within += (x.array() - x.mean()).square().sum() / (n - 1.0);
  }
  within /= m;
  const double between = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
  if (within == 0.0) return between == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double pooled_var = (n - 1.0) / n * within + between / n;
  return std::sqrt(pooled_var / within);
}

std::vector<CoverageCell> coverage_study(const SimConfig& sim, const BayesConfig& bayes,
                                         std::span<const std::pair<double, double>> cells,
                                         int replicates, std::uint64_t master_seed, int jobs) {
  if (replicates < 100) throw PreconditionError("coverage studies need at least 100 replicates");
  if (cells.empty()) throw PreconditionError("coverage study needs at least one cell");
  StudySpec spec;
  spec.kind = StudyKind::bayes_coverage;
  spec.sim = sim;
  spec.bayes = bayes;
  spec.replicates = replicates;
  spec.master_seed = master_seed;
  spec.delta_levels = {sim.delta};
  spec.cells.assign(cells.begin(), cells.end());
  spec.jobs = jobs;
  const StudySummary summary = run_study(spec);

  std::vector<CoverageCell> out;
  for (const ConditionSummary& c : summary.conditions) {
    out.push_back({c.beta_mean, c.beta_sd, c.delta, c.coverage.value_or(0.0), c.replicates});
  }
  return out;
}

}  // namespace geoexp
