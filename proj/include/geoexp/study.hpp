#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geoexp/bayes.hpp"
#include "geoexp/sim.hpp"

namespace geoexp {

enum class StudyKind {
  single_brand,
  multibrand_shrinkage,
  stein_vs_bayes,
  bayes_coverage,
  credible_width,
};

std::string_view to_string(StudyKind kind);
/// Throws FormatError for an unknown name.
StudyKind parse_study_kind(std::string_view name);

/// True for the kinds that run the Gibbs sampler.
bool uses_bayes(StudyKind kind);

struct StudySpec {
  StudyKind kind = StudyKind::single_brand;
  SimConfig sim;
  BayesConfig bayes;
  int replicates = 1000;
  std::uint64_t master_seed = 1;
  std::vector<double> delta_levels{0.01};
  /// (beta_mean, beta_sd) cells. Empty means the single cell taken from `sim`.
  std::vector<std::pair<double, double>> cells;
  /// Draw GEO sizes once (replicate 0 stream) instead of per replicate.
  bool freeze_sizes = false;
  /// Flip attempts per scrambled design; default 2 G B 25.
  std::optional<std::int64_t> scramble_attempts;
  int jobs = 1;

  void check() const;
  std::vector<std::pair<double, double>> effective_cells() const;
};

/// One row per (replicate, cell, delta, brand). Quantities a study kind does
/// not compute are NaN.
struct ReplicateRecord {
  int replicate = 0;
  int cell = 0;
  double delta = 0.0;
  int brand = 0;
  double beta_true = 0.0;
  double beta_hat = 0.0;
  double var_hat = 0.0;
  double p_value = 0.0;
  double beta_tilde = 0.0;
  double bayes_mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Aggregates for one (cell, delta) condition. Per-fit statistics average over
/// all (replicate, brand) pairs; per-replicate statistics over replicates.
struct ConditionSummary {
  int cell = 0;
  double delta = 0.0;
  double beta_mean = 0.0;
  double beta_sd = 0.0;
  int replicates = 0;

  double rejection_rate = 0.0;  ///< fraction with p <= 0.05
  double mean_2se = 0.0;
  double rmse = 0.0;
  std::optional<double> mean_beta_given_significant;

  std::optional<double> mean_efficiency;
  std::optional<double> mean_2se_pooled;
  std::optional<double> stein_rmse;    ///< mean over replicates of per-replicate RMSE
  std::optional<double> bayes_rmse;
  std::optional<double> coverage;
  std::optional<double> mean_half_width;
  std::optional<double> half_width_q95;
};

struct StudySummary {
  StudyKind kind = StudyKind::single_brand;
  int replicates = 0;
  std::uint64_t master_seed = 0;
  std::vector<ConditionSummary> conditions;
  std::vector<ReplicateRecord> records;

  /// First condition matching (delta, cell index); throws PreconditionError if absent.
  const ConditionSummary& at(double delta, int cell = 0) const;
};

inline constexpr double kSignificanceLevel = 0.05;

/// Runs every replicate (in parallel when spec.jobs > 1) and folds the results in
/// replicate order, so the summary is bit-identical for any job count. Fresh
/// design, effects and data per replicate; common random numbers across delta
/// levels and cells. A failing replicate aborts the study with its index.
StudySummary run_study(const StudySpec& spec);

/// Balanced single-brand assignment of G/2 treated GEOs: one column of a
/// scrambled G x 2 design.
DesignMatrix single_brand_design(int geos, std::int64_t attempts, Rng& rng);

}  // namespace geoexp
