#include "geoexp/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "geoexp/design.hpp"
#include "geoexp/error.hpp"
#include "geoexp/estimation.hpp"
#include "geoexp/shrinkage.hpp"

namespace geoexp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct KindName {
  StudyKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {StudyKind::single_brand, "single_brand"},
    {StudyKind::multibrand_shrinkage, "multibrand_shrinkage"},
    {StudyKind::stein_vs_bayes, "stein_vs_bayes"},
    {StudyKind::bayes_coverage, "bayes_coverage"},
    {StudyKind::credible_width, "credible_width"},
};

// Per-replicate, per-condition results before aggregation.
struct ConditionOutcome {
  std::vector<ReplicateRecord> records;
  double efficiency = kNaN;
  double pooled_2se = kNaN;
  double stein_rmse = kNaN;
  double bayes_rmse = kNaN;
};

struct ReplicateOutcome {
  std::vector<ConditionOutcome> conditions;  // cell-major, then delta
};

ReplicateOutcome run_replicate(const StudySpec& spec, int replicate) {
  const SimConfig& base = spec.sim;
  const auto cells = spec.effective_cells();
  const auto r = static_cast<std::uint64_t>(replicate);
  const std::uint64_t seed = spec.master_seed;

  Rng design_rng(replicate_seed(seed, r, Stream::design));
  const std::int64_t attempts = spec.scramble_attempts.value_or(
      default_scramble_attempts(base.geos, base.brands == 1 ? 2 : base.brands));
  const DesignMatrix design =
      base.brands == 1
          ? single_brand_design(base.geos, attempts, design_rng)
          : scramble(checkerboard_init(base.geos, base.brands), attempts, design_rng, 0).design;

  Rng size_rng(replicate_seed(seed, spec.freeze_sizes ? 0 : r, Stream::sizes));
  const GeoProfile sizes = sample_geo_sizes(base, size_rng);

  ReplicateOutcome outcome;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    SimConfig sim = base;
    sim.beta_mean = cells[c].first;
    sim.beta_sd = cells[c].second;
    Rng effect_rng(replicate_seed(seed, r, Stream::effects));
    const Eigen::VectorXd effects = sample_brand_effects(sim, effect_rng);

    for (double delta : spec.delta_levels) {
      sim.delta = delta;
      Rng pre_rng(replicate_seed(seed, r, Stream::pre_noise));
      Rng post_rng(replicate_seed(seed, r, Stream::post_noise));
      const Dataset data = generate_dataset(design, sim, sizes, effects, {pre_rng, post_rng});
      const std::vector<FitResult> fits = fit_all_brands(data);
      const int brands = data.brands();

      ConditionOutcome co;
      std::vector<double> hats;
      std::vector<double> vars;
      std::vector<double> truth(effects.data(), effects.data() + effects.size());
      for (const FitResult& f : fits) {
        hats.push_back(f.beta_hat);
        vars.push_back(f.var_beta);
      }

      Eigen::VectorXd tilde = Eigen::VectorXd::Constant(brands, kNaN);
      if (brands >= 2) {
        const ShrinkageResult shrunk = choose_lambda(hats, vars);
        tilde = shrunk.beta_tilde;
        co.efficiency =
            efficiency(hats, std::span<const double>(tilde.data(), tilde.size()), truth);
        co.pooled_2se = 2.0 * std::sqrt(pooled_mean(fits).var_beta_bar);
        double ss = 0.0;
        for (int b = 0; b < brands; ++b) ss += std::pow(tilde(b) - effects(b), 2);
        co.stein_rmse = std::sqrt(ss / brands);
      }

      IntervalSummary intervals;
      const bool bayes = uses_bayes(spec.kind);
      if (bayes) {
        Rng gibbs_rng(replicate_seed(seed, r, Stream::gibbs));
        intervals = summarize_posterior(gibbs_run(data, spec.bayes, gibbs_rng), spec.bayes.level);
        double ss = 0.0;
        for (int b = 0; b < brands; ++b) {
          ss += std::pow(intervals.brands[static_cast<std::size_t>(b)].mean - effects(b), 2);
        }
        co.bayes_rmse = std::sqrt(ss / brands);
      }

      for (int b = 0; b < brands; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        ReplicateRecord rec;
        rec.replicate = replicate;
        rec.cell = static_cast<int>(c);
        rec.delta = delta;
        rec.brand = b + 1;
        rec.beta_true = effects(b);
        rec.beta_hat = fits[ub].beta_hat;
        rec.var_hat = fits[ub].var_beta;
        rec.p_value = fits[ub].p_value;
        rec.beta_tilde = tilde(b);
        rec.bayes_mean = bayes ? intervals.brands[ub].mean : kNaN;
        rec.ci_lo = bayes ? intervals.brands[ub].lo : kNaN;
        rec.ci_hi = bayes ? intervals.brands[ub].hi : kNaN;
        co.records.push_back(rec);
      }
      outcome.conditions.push_back(std::move(co));
    }
  }
  return outcome;
}

// Linear-interpolation quantile of unsorted values.
double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ConditionSummary aggregate(const std::vector<ReplicateOutcome>& outcomes, std::size_t index,
                           StudyKind kind) {
  ConditionSummary s;
  std::int64_t fits = 0;
  std::int64_t significant = 0;
  std::int64_t covered = 0;
  double sum_2se = 0.0;
  double sum_sq_err = 0.0;
  double sum_significant = 0.0;
  double sum_eff = 0.0;
  double sum_pooled = 0.0;
  double sum_stein = 0.0;
  double sum_bayes = 0.0;
  bool have_shrinkage = false;
  std::vector<double> half_widths;

  for (const ReplicateOutcome& outcome : outcomes) {
    const ConditionOutcome& co = outcome.conditions[index];
    for (const ReplicateRecord& rec : co.records) {
      ++fits;
      sum_2se += 2.0 * std::sqrt(rec.var_hat);
      sum_sq_err += (rec.beta_hat - rec.beta_true) * (rec.beta_hat - rec.beta_true);
      if (rec.p_value <= kSignificanceLevel) {
        ++significant;
        sum_significant += rec.beta_hat;
      }
      if (uses_bayes(kind)) {
        if (rec.ci_lo <= rec.beta_true && rec.beta_true <= rec.ci_hi) ++covered;
        half_widths.push_back(0.5 * (rec.ci_hi - rec.ci_lo));
      }
    }
    if (!std::isnan(co.efficiency)) {
      have_shrinkage = true;
      sum_eff += co.efficiency;
      sum_pooled += co.pooled_2se;
      sum_stein += co.stein_rmse;
    }
    if (!std::isnan(co.bayes_rmse)) sum_bayes += co.bayes_rmse;
  }

  const auto reps = static_cast<double>(outcomes.size());
  const ReplicateRecord& first = outcomes.front().conditions[index].records.front();
  s.delta = first.delta;
  s.replicates = static_cast<int>(outcomes.size());
  s.rejection_rate = static_cast<double>(significant) / static_cast<double>(fits);
  s.mean_2se = sum_2se / static_cast<double>(fits);
  s.rmse = std::sqrt(sum_sq_err / static_cast<double>(fits));
  if (significant > 0) s.mean_beta_given_significant = sum_significant / static_cast<double>(significant);
  if (have_shrinkage) {
    s.mean_efficiency = sum_eff / reps;
    s.mean_2se_pooled = sum_pooled / reps;
    s.stein_rmse = sum_stein / reps;
  }
  if (uses_bayes(kind)) {
    s.bayes_rmse = sum_bayes / reps;
    s.coverage = static_cast<double>(covered) / static_cast<double>(fits);
    double total = 0.0;
    for (double w : half_widths) total += w;
    s.mean_half_width = total / static_cast<double>(half_widths.size());
    s.half_width_q95 = quantile(half_widths, 0.95);
  }
  return s;
}

}  // namespace

std::string_view to_string(StudyKind kind) {
  for (const KindName& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

StudyKind parse_study_kind(std::string_view name) {
  for (const KindName& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  throw FormatError("unknown study kind '" + std::string(name) + "'");
}

bool uses_bayes(StudyKind kind) {
  return kind == StudyKind::stein_vs_bayes || kind == StudyKind::bayes_coverage ||
         kind == StudyKind::credible_width;
}

void StudySpec::check() const {
  auto fail = [](const std::string& what) { throw PreconditionError("invalid study spec: " + what); };
  if (replicates < 1) fail("replicates must be >= 1");
  if (delta_levels.empty()) fail("delta_levels must be non-empty");
  for (double d : delta_levels) {
    if (!(d >= 0.0)) fail("delta levels must be >= 0");
  }
  if (jobs < 1) fail("jobs must be >= 1");
  if (sim.geos < 4 || sim.geos % 2 != 0) fail("geos must be an even integer >= 4");
  if (sim.brands != 1 && (sim.brands < 2 || sim.brands % 2 != 0)) {
    fail("brands must be 1 or an even integer >= 2");
  }
  if (scramble_attempts && *scramble_attempts < 0) fail("scramble_attempts must be >= 0");
  sim.check();
  for (const auto& [mean, sd] : effective_cells()) {
    if (!std::isfinite(mean) || !(sd >= 0.0)) fail("cells need finite mean and sd >= 0");
  }
  if (uses_bayes(kind)) bayes.check();
}

std::vector<std::pair<double, double>> StudySpec::effective_cells() const {
  if (!cells.empty()) return cells;
  return {{sim.beta_mean, sim.beta_sd}};
}

const ConditionSummary& StudySummary::at(double delta, int cell) const {
  for (const ConditionSummary& c : conditions) {
    if (c.cell == cell && c.delta == delta) return c;
  }
  throw PreconditionError("no condition for delta " + std::to_string(delta) + " in cell " +
                          std::to_string(cell));
}

DesignMatrix single_brand_design(int geos, std::int64_t attempts, Rng& rng) {
  const ScrambleResult pair = scramble(checkerboard_init(geos, 2), attempts, rng, 0);
  return DesignMatrix(pair.design.entries().col(0));
}

StudySummary run_study(const StudySpec& spec) {
  spec.check();
  const auto replicates = static_cast<std::size_t>(spec.replicates);
  std::vector<ReplicateOutcome> outcomes(replicates);
  std::vector<std::exception_ptr> errors(replicates);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < replicates; r = next++) {
      try {
        outcomes[r] = run_replicate(spec, static_cast<int>(r));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const auto jobs = static_cast<std::size_t>(std::min(spec.jobs, spec.replicates));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t r = 0; r < replicates; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      throw Error("replicate " + std::to_string(r) + ": " + e.what());
    }
  }

  StudySummary summary;
  summary.kind = spec.kind;
  summary.replicates = spec.replicates;
  summary.master_seed = spec.master_seed;
  const auto cells = spec.effective_cells();
  std::size_t index = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t d = 0; d < spec.delta_levels.size(); ++d, ++index) {
      ConditionSummary s = aggregate(outcomes, index, spec.kind);
      s.cell = static_cast<int>(c);
      s.beta_mean = cells[c].first;
      s.beta_sd = cells[c].second;
      summary.conditions.push_back(s);
    }
  }
  for (const ReplicateOutcome& outcome : outcomes) {
    for (const ConditionOutcome& co : outcome.conditions) {
      summary.records.insert(summary.records.end(), co.records.begin(), co.records.end());
    }
  }
  return summary;
}

}  // namespace geoexp
