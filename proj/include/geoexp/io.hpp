#pragma once

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "geoexp/bayes.hpp"
#include "geoexp/design.hpp"
#include "geoexp/estimation.hpp"
#include "geoexp/shrinkage.hpp"
#include "geoexp/study.hpp"

namespace geoexp::io {

// Design matrices: CSV with header brand_1..brand_B and +1/-1 cells, or JSON
// {g_count, b_count, entries} with entries row-major.
void write_design_csv(std::ostream& out, const DesignMatrix& design);
DesignMatrix read_design_csv(std::istream& in);
nlohmann::json design_to_json(const DesignMatrix& design);
DesignMatrix design_from_json(const nlohmann::json& doc);

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

// Dataset: geo,brand,y_pre,x_post,y_post,true_beta with 1-based indices.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);
Dataset read_dataset_csv(std::istream& in);

// Fits: brand,alpha0,alpha1,beta_hat,var_beta,p_value.
void write_fits_csv(std::ostream& out, const std::vector<FitResult>& fits);
std::vector<FitResult> read_fits_csv(std::istream& in);

nlohmann::json geo_response_to_json(const GeoResponseFit& fit);
/// lambda is null when infinite.
nlohmann::json shrinkage_to_json(const ShrinkageResult& result);

// Chains in long form: chain,iter,param,value.
void write_chains_csv(std::ostream& out, const PosteriorChains& chains);
nlohmann::json interval_summary_to_json(const IntervalSummary& summary);

nlohmann::json study_summary_to_json(const StudySummary& summary);
void write_records_csv(std::ostream& out, const std::vector<ReplicateRecord>& records);

/// Flat `key = value` file; `#` starts a comment. Keys keep their line numbers
/// for error messages.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& origin = "<input>");
  static KeyValueFile load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws FormatError naming the first key not in `known`.
  void reject_unknown(const std::vector<std::string>& known) const;

  std::string origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

/// Keys understood by apply_sim_config.
const std::vector<std::string>& sim_config_keys();
void apply_sim_config(const KeyValueFile& file, SimConfig& config);

const std::vector<std::string>& bayes_config_keys();
void apply_bayes_config(const KeyValueFile& file, BayesConfig& config);

/// Study spec: kind, replicates, seed, delta_levels (comma separated), cells
/// (`mean:sd` pairs, comma separated), freeze_sizes, scramble_attempts, jobs,
/// plus every simulation and sampler key.
StudySpec study_spec_from(const KeyValueFile& file);

double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

}  // namespace geoexp::io
