// Acceptance checks: one PASS/FAIL line per criterion, detail lines indented
// beneath. Exit status is non-zero when any criterion fails.

#include <fmt/core.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "geoexp/bayes.hpp"
#include "geoexp/design.hpp"
#include "geoexp/estimation.hpp"
#include "geoexp/sim.hpp"
#include "geoexp/study.hpp"

using namespace geoexp;

namespace {

constexpr std::uint64_t kSeed = 20240601;

int failures = 0;

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void detail(const std::string& text) { fmt::print("    {}\n", text); }

bool within(double value, double target, double tol, const std::string& label) {
  const bool ok = std::abs(value - target) <= tol;
  detail(fmt::format("{:<44} {:>9.4f}  target {:.4f} +/- {:.4f}  {}", label, value, target, tol,
                     ok ? "ok" : "MISS"));
  return ok;
}

void verdict(const std::string& name, bool ok, double seconds) {
  fmt::print("{} {} ({:.1f} s)\n", ok ? "PASS" : "FAIL", name, seconds);
  if (!ok) ++failures;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------

void single_brand_table() {
  Timer t;
  StudySpec spec;
  spec.kind = StudyKind::single_brand;
  spec.sim.geos = 20;
  spec.sim.brands = 1;
  spec.sim.beta_mean = 5.0;
  spec.sim.beta_sd = 0.0;
  spec.replicates = 1000;
  spec.master_seed = kSeed;
  spec.delta_levels = {0.01, 0.005};
  spec.jobs = jobs();
  const StudySummary s = run_study(spec);
  bool ok = true;
  struct Row {
    double delta, reject, two_se, rmse, sig, tol_reject, tol_2se, tol_rmse, tol_sig;
  };
  for (const Row& r : {Row{0.01, 0.81, 3.34, 1.61, 5.51, 0.04, 0.20, 0.15, 0.35},
                       Row{0.005, 0.29, 6.68, 3.21, 8.64, 0.05, 0.40, 0.30, 0.90}}) {
    const ConditionSummary& c = s.at(r.delta);
    const std::string d = fmt::format("delta={}", r.delta);
    ok &= within(c.rejection_rate, r.reject, r.tol_reject, d + " rejection rate");
    ok &= within(c.mean_2se, r.two_se, r.tol_2se, d + " mean 2se");
    ok &= within(c.rmse, r.rmse, r.tol_rmse, d + " RMSE");
    ok &= within(c.mean_beta_given_significant.value_or(NAN), r.sig, r.tol_sig, d + " E[beta_hat | p<=0.05]");
  }
  const double secs = t.seconds();
  ok &= secs < 60.0;
  verdict("single-brand table (G=20, beta=5, 1000 replicates, < 60 s)", ok, secs);
}

void multibrand_tables() {
  Timer t;
  StudySpec spec;
  spec.kind = StudyKind::multibrand_shrinkage;
  spec.sim.geos = 20;
  spec.sim.brands = 30;
  spec.replicates = 1000;
  spec.master_seed = kSeed;
  spec.delta_levels = {0.01, 0.005};
  spec.jobs = jobs();
  const StudySummary s = run_study(spec);
  const ConditionSummary& hi = s.at(0.01);
  const ConditionSummary& lo = s.at(0.005);

  bool pooled = within(hi.mean_2se_pooled.value_or(NAN), 0.62, 0.05, "delta=0.01 mean 2se(pooled)");
  pooled &= within(lo.mean_2se_pooled.value_or(NAN), 1.23, 0.10, "delta=0.005 mean 2se(pooled)");
  verdict("pooled-estimate table (B=30, G=20, 1000 replicates)", pooled, t.seconds());

  bool eff = within(hi.mean_efficiency.value_or(NAN), 3.17, 0.6, "delta=0.01 mean efficiency");
  eff &= within(lo.mean_efficiency.value_or(NAN), 7.82, 1.6, "delta=0.005 mean efficiency");
  verdict("shrinkage efficiency (beta_b ~ N(5, 1), 1000 replicates)", eff, t.seconds());
}

void coverage_table() {
  Timer t;
  StudySpec spec;
  spec.kind = StudyKind::bayes_coverage;
  spec.sim.geos = 160;
  spec.sim.brands = 4;
  spec.replicates = 1000;
  spec.master_seed = kSeed;
  spec.delta_levels = {0.01};
  spec.cells = {{1.0, 1.0}, {0.25, 0.10}, {1.0, 0.25}, {0.25, 1.0}};
  spec.jobs = jobs();
  const StudySummary s = run_study(spec);
  const double expected[] = {0.954, 0.974, 0.975, 0.950};
  bool ok = true;
  for (int c = 0; c < 4; ++c) {
    const ConditionSummary& cs = s.at(0.01, c);
    ok &= within(cs.coverage.value_or(NAN), expected[c], 0.02,
                 fmt::format("coverage beta={} sigma_b={}", cs.beta_mean, cs.beta_sd));
  }
  verdict("credible-interval coverage (B=4, G=160, 4 cells x 1000 replicates)", ok, t.seconds());
}

void stein_vs_bayes() {
  Timer t;
  StudySpec spec;
  spec.kind = StudyKind::stein_vs_bayes;
  spec.sim.geos = 160;
  spec.sim.brands = 4;
  spec.replicates = 1000;
  spec.master_seed = kSeed;
  spec.delta_levels = {0.01};
  spec.cells = {{1.0, 1.0}, {1.0, 0.25}};
  spec.jobs = jobs();
  const StudySummary s = run_study(spec);
  bool ok = true;
  for (int c = 0; c < 2; ++c) {
    const ConditionSummary& cs = s.at(0.01, c);
    const double stein = cs.stein_rmse.value_or(NAN);
    const double bayes = cs.bayes_rmse.value_or(NAN);
    const double ratio = bayes / stein;
    const bool close = std::abs(ratio - 1.0) <= 0.15;
    // Bayes ahead at sigma_b = 1, Stein ahead at sigma_b = 0.25.
    const bool sign = c == 0 ? bayes < stein : stein < bayes;
    detail(fmt::format("sigma_b={:<5} Stein RMSE {:.4f}  Bayes RMSE {:.4f}  ratio {:.3f} ({})  "
                       "expected winner {} ({})",
                       cs.beta_sd, stein, bayes, ratio, close ? "ok" : "MISS",
                       c == 0 ? "Bayes" : "Stein", sign ? "ok" : "MISS"));
    ok &= close && sign;
  }
  verdict("Stein vs Bayes RMSE parity (B=4, G=160, 1000 replicates)", ok, t.seconds());
}

// ---------------------------------------------------------------------------

std::uint32_t encode4(const DesignMatrix& d) {
  std::uint32_t code = 0;
  for (int g = 0; g < 4; ++g) {
    for (int b = 0; b < 4; ++b) code = code * 2 + (d(g, b) > 0 ? 1u : 0u);
  }
  return code;
}

void design_chain() {
  Timer t;
  bool all = true;

  // (a) balance after every flip of a long run.
  {
    Rng rng(replicate_seed(kSeed, 0, Stream::chain));
    DesignMatrix d = checkerboard_init(20, 30);
    bool ok = true;
    for (int a = 0; a < 30000; ++a) {
      FlipResult f = flip_attempt(d, rng);
      if (f.accepted) {
        d = std::move(f.design);
        ok &= d.balanced();
      }
    }
    ok &= d.balanced();
    detail(fmt::format("(a) balance kept through 30000 attempts on 20x30: {}", ok ? "ok" : "MISS"));
    all &= ok;
  }

  // (b) uniformity over the 90 balanced 4x4 matrices.
  {
    // Every balanced 4x4 sign matrix, keyed by its 16-bit code.
    std::map<std::uint32_t, int> states;
    for (std::uint32_t code = 0; code < (1u << 16); ++code) {
      DesignMatrix::Entries e(4, 4);
      for (int k = 0; k < 16; ++k) e(k / 4, k % 4) = ((code >> (15 - k)) & 1u) ? 1 : -1;
      const DesignMatrix d(e);
      if (d.balanced()) states.emplace(encode4(d), static_cast<int>(states.size()));
    }
    const int n_states = static_cast<int>(states.size());
    Rng rng(replicate_seed(kSeed, 1, Stream::chain));
    DesignMatrix d = checkerboard_init(4, 4);
    std::vector<double> counts(static_cast<std::size_t>(n_states), 0.0);
    const int samples = 90000;
    for (int s = 0; s < samples; ++s) {
      d = scramble(d, 100, rng, 0).design;
      counts[static_cast<std::size_t>(states.at(encode4(d)))] += 1.0;
    }
    const double expected = static_cast<double>(samples) / n_states;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(n_states - 1);
    const double critical = boost::math::quantile(dist, 0.999);
    const bool ok = n_states == 90 && chi2 < critical;
    detail(fmt::format("(b) {} balanced 4x4 states, chi-square {:.2f} vs critical {:.2f} (df {}, 0.001): {}",
                       n_states, chi2, critical, n_states - 1, ok ? "ok" : "MISS"));
    all &= ok;
  }

  // (c) sum over all brand pairs of rho equals -B exactly for a balanced design.
  {
    bool ok = true;
    Rng rng(replicate_seed(kSeed, 2, Stream::chain));
    for (auto [g, b] : {std::pair{20, 30}, std::pair{6, 4}, std::pair{160, 4}, std::pair{10, 10}}) {
      const DesignMatrix d = scramble(checkerboard_init(g, b), 5000, rng, 0).design;
      const Eigen::MatrixXd rho = brand_correlation_matrix(d);
      const double full = rho.sum();
      double off = 0.0;
      for (int i = 0; i < b; ++i) for (int j = 0; j < b; ++j) if (i != j) off += rho(i, j);
      ok &= std::abs(full) <= 1e-9;
      ok &= std::abs(off + b) <= 1e-9;
    }
    detail(fmt::format("(c) full-sum correlation identity (sum = 0, off-diagonal sum = -B): {}",
                       ok ? "ok" : "MISS"));
    all &= ok;
  }

  // (d) seed designs and their growth.
  {
    bool ok = true;
    for (const DesignMatrix& d : {seed_design_6x6(), seed_design_8x8()}) {
      const ValidationReport v = validate(d);
      ok &= v.balanced && v.collision_free();
      const DesignMatrix grown = grow4(d);
      const ValidationReport gv = validate(grown);
      ok &= gv.balanced && gv.collision_free();
      ok &= grown.geos() == d.geos() + 4 && grown.brands() == d.brands() + 4;
      const ValidationReport twice = validate(grow4(grown));
      ok &= twice.balanced && twice.collision_free();
    }
    detail(fmt::format("(d) 6x6 and 8x8 seed designs and grow4 outputs are balanced and collision-free: {}",
                       ok ? "ok" : "MISS"));
    all &= ok;
  }

  // (e) rms brand correlation settles within 300 successful flips.
  {
    Rng rng(replicate_seed(kSeed, 3, Stream::chain));
    const ScrambleResult r = scramble(checkerboard_init(20, 30), 60000, rng, 10);
    double at300 = NAN;
    double at3000 = NAN;
    for (const TraceEntry& e : r.trace) {
      if (e.flips == 300) at300 = e.correlations.brand_rms;
      if (e.flips == 3000) at3000 = e.correlations.brand_rms;
    }
    const double rel = std::abs(at300 - at3000) / at3000;
    const bool ok = rel <= 0.10;
    detail(fmt::format("(e) rms brand correlation at flip 300 {:.4f}, at flip 3000 {:.4f}, relative gap "
                       "{:.3f} (<= 0.10): {}",
                       at300, at3000, rel, ok ? "ok" : "MISS"));
    // How typical this chain is: the same comparison over independent chains.
    int passing = 0;
    const int chains = 50;
    for (int k = 0; k < chains; ++k) {
      Rng other(replicate_seed(kSeed, 100 + static_cast<std::uint64_t>(k), Stream::chain));
      const ScrambleResult o = scramble(checkerboard_init(20, 30), 30000, other, 10);
      double a = NAN;
      double b = NAN;
      for (const TraceEntry& e : o.trace) {
        if (e.flips == 300) a = e.correlations.brand_rms;
        if (e.flips == 3000) b = e.correlations.brand_rms;
      }
      if (std::abs(a - b) / b <= 0.10) ++passing;
    }
    detail(fmt::format("    (information) {}/{} further independent chains also within 10%", passing, chains));
    all &= ok;
  }

  verdict("design chain properties (a)-(e)", all, t.seconds());
}

// ---------------------------------------------------------------------------

// Gauss-Jordan on the 3x3 normal equations in long double.
std::array<long double, 4> brute_force_wls(const std::vector<double>& pre, const std::vector<double>& x,
                                           const std::vector<double>& y) {
  long double a[3][4] = {};
  for (std::size_t g = 0; g < pre.size(); ++g) {
    const long double w = 1.0L / (static_cast<long double>(pre[g]) * pre[g]);
    const long double row[3] = {1.0L, pre[g], x[g]};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] += w * row[i] * row[j];
      a[i][3] += w * row[i] * y[g];
    }
  }
  long double inv[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  long double m[3][3];
  for (int i = 0; i < 3; ++i) for (int j = 0; j < 3; ++j) m[i][j] = a[i][j];
  long double rhs[3] = {a[0][3], a[1][3], a[2][3]};
  for (int c = 0; c < 3; ++c) {
    int p = c;
    for (int r = c + 1; r < 3; ++r) if (std::fabs(m[r][c]) > std::fabs(m[p][c])) p = r;
    std::swap(m[c], m[p]);
    std::swap(inv[c], inv[p]);
    std::swap(rhs[c], rhs[p]);
    const long double piv = m[c][c];
    for (int j = 0; j < 3; ++j) {
      m[c][j] /= piv;
      inv[c][j] /= piv;
    }
    rhs[c] /= piv;
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const long double f = m[r][c];
      for (int j = 0; j < 3; ++j) {
        m[r][j] -= f * m[c][j];
        inv[r][j] -= f * inv[c][j];
      }
      rhs[r] -= f * rhs[c];
    }
  }
  long double rss = 0.0L;
  for (std::size_t g = 0; g < pre.size(); ++g) {
    const long double w = 1.0L / (static_cast<long double>(pre[g]) * pre[g]);
    const long double r = y[g] - rhs[0] - rhs[1] * pre[g] - rhs[2] * x[g];
    rss += w * r * r;
  }
  const long double s2 = rss / static_cast<long double>(pre.size() - 3);
  return {rhs[0], rhs[1], rhs[2], s2 * inv[2][2]};
}

double batch_mcse(const Eigen::VectorXd& x, int batches = 50) {
  const Eigen::Index size = x.size() / batches;
  Eigen::VectorXd means(batches);
  for (int k = 0; k < batches; ++k) means(k) = x.segment(k * size, size).mean();
  const double m = means.mean();
  return std::sqrt((means.array() - m).square().sum() / (batches - 1) / batches);
}

void estimation_oracles() {
  Timer t;
  bool all = true;

  {
    Rng rng(replicate_seed(kSeed, 4, Stream::chain));
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
      const int geos = 4 + static_cast<int>(rng.index(9));
      const double scale = std::pow(10.0, static_cast<double>(rng.index(8)));
      std::vector<double> pre(static_cast<std::size_t>(geos));
      std::vector<double> x(pre.size());
      std::vector<double> y(pre.size());
      for (int g = 0; g < geos; ++g) {
        const auto ug = static_cast<std::size_t>(g);
        pre[ug] = scale * (0.5 + rng.uniform());
        x[ug] = (g % 2 == 0) ? 0.01 * pre[ug] * (0.5 + rng.uniform()) : 0.0;
        y[ug] = 0.5 * pre[ug] * (1.0 + 0.1 * rng.normal()) + 4.0 * x[ug];
      }
      const FitResult f = wls_fit_single(pre, x, y);
      const auto o = brute_force_wls(pre, x, y);
      const double e0 = std::abs(f.alpha0 - static_cast<double>(o[0])) / scale;
      const double e1 = std::abs(f.alpha1 - static_cast<double>(o[1]));
      const double e2 = std::abs(f.beta_hat - static_cast<double>(o[2])) / std::max(1.0, std::abs(static_cast<double>(o[2])));
      const double e3 = std::abs(f.var_beta - static_cast<double>(o[3])) / std::max(1e-300, static_cast<double>(o[3]));
      worst = std::max({worst, e0, e1, e2, e3});
    }
    const bool ok = worst <= 1e-10;
    detail(fmt::format("WLS vs long-double normal equations, 100 instances: worst relative error {:.2e} "
                       "(<= 1e-10): {}",
                       worst, ok ? "ok" : "MISS"));
    all &= ok;
  }

  {
    StudySpec spec;
    spec.kind = StudyKind::single_brand;
    spec.sim.geos = 20;
    spec.sim.brands = 1;
    spec.sim.beta_mean = 0.0;
    spec.sim.beta_sd = 0.0;
    spec.replicates = 2000;
    spec.master_seed = kSeed;
    spec.jobs = jobs();
    const StudySummary s = run_study(spec);
    std::vector<double> p;
    for (const ReplicateRecord& r : s.records) p.push_back(r.p_value);
    std::sort(p.begin(), p.end());
    const auto n = static_cast<double>(p.size());
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      d = std::max({d, p[i] - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - p[i]});
    }
    const double critical = 1.6276 / std::sqrt(n);
    const bool ok = d < critical;
    detail(fmt::format("null p-values, {} fits: KS D = {:.4f} vs 1% critical {:.4f}: {}", p.size(), d,
                       critical, ok ? "ok" : "MISS"));
    all &= ok;
  }

  {
    Rng rng(replicate_seed(kSeed, 5, Stream::chain));
    const DesignMatrix design = scramble(checkerboard_init(20, 4), 4000, rng, 0).design;
    SimConfig sim;
    sim.geos = 20;
    sim.brands = 4;
    const Dataset data = generate_dataset(design, sim, rng);
    const double s2_obs = 0.004;
    const double s2_beta = 1.5;

    const int n = 13;
    Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int b = 0; b < 4; ++b) {
      for (int g = 0; g < 20; ++g) {
        const double w = 1.0 / (data.y_pre(g, b) * data.y_pre(g, b) * s2_obs);
        const Eigen::Vector3d row(1.0, data.y_pre(g, b), data.x_post(g, b));
        precision.block<3, 3>(3 * b, 3 * b) += w * row * row.transpose();
        rhs.segment<3>(3 * b) += w * data.y_post(g, b) * row;
      }
      precision(3 * b + 2, 3 * b + 2) += 1.0 / s2_beta;
      precision(3 * b + 2, n - 1) -= 1.0 / s2_beta;
      precision(n - 1, 3 * b + 2) -= 1.0 / s2_beta;
      precision(n - 1, n - 1) += 1.0 / s2_beta;
    }
    const Eigen::VectorXd exact = precision.ldlt().solve(rhs);

    BayesConfig cfg;
    cfg.iterations = 21000;
    cfg.burn_in = 1000;
    cfg.chains = 1;
    cfg.fixed_sigma2_obs = s2_obs;
    cfg.fixed_sigma2_beta = s2_beta;
    Rng gibbs(replicate_seed(kSeed, 6, Stream::gibbs));
    const PosteriorChains chains = gibbs_run(data, cfg, gibbs);
    double worst = 0.0;
    int checked = 0;
    auto check = [&](int column, int k) {
      const Eigen::VectorXd draws = chains.pooled(column);
      worst = std::max(worst, std::abs(draws.mean() - exact(k)) / batch_mcse(draws));
      ++checked;
    };
    for (int b = 0; b < 4; ++b) {
      check(PosteriorChains::alpha0_index(b), 3 * b);
      check(PosteriorChains::alpha1_index(b), 3 * b + 1);
      check(PosteriorChains::beta_index(b), 3 * b + 2);
    }
    check(chains.grand_beta_index(), 12);
    const bool ok = worst <= 3.0;
    detail(fmt::format("Gibbs vs conjugate Gaussian posterior, {} parameters: worst |error| / MCSE "
                       "{:.2f} (<= 3): {}",
                       checked, worst, ok ? "ok" : "MISS"));
    all &= ok;
  }

  verdict("estimation oracles (WLS, null p-values, conjugate Gibbs)", all, t.seconds());
}

}  // namespace

int main() {
  fmt::print("acceptance run, seed {}, {} worker threads\n", kSeed, jobs());
  single_brand_table();
  multibrand_tables();
  coverage_table();
  stein_vs_bayes();
  design_chain();
  estimation_oracles();
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
