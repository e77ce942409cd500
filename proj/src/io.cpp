#include "geoexp/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "geoexp/error.hpp"

namespace geoexp::io {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Shortest representation that round-trips; empty for NaN.
std::string num(double v) {
  if (std::isnan(v)) return "";
  return fmt::format("{}", v);
}

json num_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

template <typename T>
json opt(const std::optional<T>& v) {
  if (!v) return nullptr;
  return num_or_null(*v);
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) return true;
  }
  return false;
}

// Maps header names to column positions and checks required columns exist.
std::map<std::string, std::size_t> header_index(const std::string& line,
                                                const std::vector<std::string>& required,
                                                const char* what) {
  std::map<std::string, std::size_t> index;
  const auto names = split(line, ',');
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  for (const std::string& r : required) {
    if (!index.count(r)) throw FormatError(std::string(what) + " CSV is missing column '" + r + "'");
  }
  return index;
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw FormatError("invalid number '" + t + "' for " + what);
  }
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw FormatError("invalid integer '" + t + "' for " + what);
  }
}

void write_design_csv(std::ostream& out, const DesignMatrix& design) {
  for (int b = 0; b < design.brands(); ++b) out << (b ? "," : "") << "brand_" << b + 1;
  out << '\n';
  for (int g = 0; g < design.geos(); ++g) {
    for (int b = 0; b < design.brands(); ++b) out << (b ? "," : "") << (design(g, b) > 0 ? "+1" : "-1");
    out << '\n';
  }
}

DesignMatrix read_design_csv(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line)) throw FormatError("design CSV is empty");
  const auto header = split(line, ',');
  for (std::size_t b = 0; b < header.size(); ++b) {
    if (header[b] != "brand_" + std::to_string(b + 1)) {
      throw FormatError("design CSV header must be brand_1..brand_B, found '" + header[b] + "'");
    }
  }
  std::vector<std::vector<int>> rows;
  while (next_data_line(in, line)) {
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw FormatError("design CSV row " + std::to_string(rows.size() + 1) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    }
    std::vector<int> row;
    for (const std::string& c : cells) {
      if (c == "+1" || c == "1") row.push_back(1);
      else if (c == "-1") row.push_back(-1);
      else throw FormatError("design cell must be +1 or -1, found '" + c + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("design CSV has no rows");
  return DesignMatrix::from_rows(rows);
}

json design_to_json(const DesignMatrix& design) {
  json entries = json::array();
  for (int g = 0; g < design.geos(); ++g) {
    for (int b = 0; b < design.brands(); ++b) entries.push_back(design(g, b));
  }
  return {{"g_count", design.geos()}, {"b_count", design.brands()}, {"entries", entries}};
}

DesignMatrix design_from_json(const json& doc) {
  try {
    const int g = doc.at("g_count").get<int>();
    const int b = doc.at("b_count").get<int>();
    const json& entries = doc.at("entries");
    std::vector<int> flat;
    for (const json& e : entries) {
      if (e.is_array()) {
        for (const json& v : e) flat.push_back(v.get<int>());
      } else {
        flat.push_back(e.get<int>());
      }
    }
    if (g < 1 || b < 1 || flat.size() != static_cast<std::size_t>(g) * static_cast<std::size_t>(b)) {
      throw FormatError("design JSON entries do not match g_count x b_count");
    }
    DesignMatrix::Entries z(g, b);
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < b; ++j) z(i, j) = flat[static_cast<std::size_t>(i) * b + j];
    }
    return DesignMatrix(std::move(z));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed design JSON: ") + e.what());
  }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
  out << "attempts,flips,brand_min,brand_max,brand_rms,geo_min,geo_max,geo_rms\n";
  for (const TraceEntry& t : trace) {
    const CorrelationSummary& c = t.correlations;
    out << t.attempts << ',' << t.flips << ',' << num(c.brand_min) << ',' << num(c.brand_max) << ','
        << num(c.brand_rms) << ',' << num(c.geo_min) << ',' << num(c.geo_max) << ','
        << num(c.geo_rms) << '\n';
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  data.check_shape();
  out << "geo,brand,y_pre,x_post,y_post,true_beta\n";
  for (int g = 0; g < data.geos(); ++g) {
    for (int b = 0; b < data.brands(); ++b) {
      out << g + 1 << ',' << b + 1 << ',' << num(data.y_pre(g, b)) << ',' << num(data.x_post(g, b))
          << ',' << num(data.y_post(g, b)) << ','
          << (data.true_beta ? num((*data.true_beta)(b)) : std::string()) << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line)) throw FormatError("dataset CSV is empty");
  const auto col = header_index(line, {"geo", "brand", "y_pre", "x_post", "y_post"}, "dataset");
  const bool has_truth = col.count("true_beta") > 0;

  struct Row {
    long long g, b;
    double pre, x, post, truth;
  };
  std::vector<Row> rows;
  long long geos = 0;
  long long brands = 0;
  int line_no = 1;
  while (next_data_line(in, line)) {
    ++line_no;
    const auto f = split(line, ',');
    auto field = [&](const char* name) -> const std::string& {
      const std::size_t i = col.at(name);
      if (i >= f.size()) throw FormatError("dataset CSV line " + std::to_string(line_no) + " is short");
      return f[i];
    };
    Row r{};
    r.g = parse_int(field("geo"), "geo");
    r.b = parse_int(field("brand"), "brand");
    r.pre = parse_double(field("y_pre"), "y_pre");
    r.x = parse_double(field("x_post"), "x_post");
    r.post = parse_double(field("y_post"), "y_post");
    r.truth = has_truth ? parse_double(field("true_beta"), "true_beta")
                        : std::numeric_limits<double>::quiet_NaN();
    if (r.g < 1 || r.b < 1) throw FormatError("geo and brand indices are 1-based");
    geos = std::max(geos, r.g);
    brands = std::max(brands, r.b);
    rows.push_back(r);
  }
  if (rows.size() != static_cast<std::size_t>(geos * brands)) {
    throw FormatError("dataset CSV must have exactly one row per (geo, brand) pair");
  }
  Dataset data;
  data.y_pre = Eigen::MatrixXd::Constant(geos, brands, std::numeric_limits<double>::quiet_NaN());
  data.y_post = data.y_pre;
  data.x_post = data.y_pre;
  Eigen::VectorXd truth = Eigen::VectorXd::Constant(brands, std::numeric_limits<double>::quiet_NaN());
  for (const Row& r : rows) {
    if (!std::isnan(data.y_pre(r.g - 1, r.b - 1))) throw FormatError("duplicate (geo, brand) row");
    data.y_pre(r.g - 1, r.b - 1) = r.pre;
    data.x_post(r.g - 1, r.b - 1) = r.x;
    data.y_post(r.g - 1, r.b - 1) = r.post;
    truth(r.b - 1) = r.truth;
  }
  if (has_truth && truth.array().isFinite().all()) data.true_beta = truth;
  return data;
}

void write_fits_csv(std::ostream& out, const std::vector<FitResult>& fits) {
  out << "brand,alpha0,alpha1,beta_hat,var_beta,p_value\n";
  for (std::size_t b = 0; b < fits.size(); ++b) {
    const FitResult& f = fits[b];
    out << b + 1 << ',' << num(f.alpha0) << ',' << num(f.alpha1) << ',' << num(f.beta_hat) << ','
        << num(f.var_beta) << ',' << num(f.p_value) << '\n';
  }
}

std::vector<FitResult> read_fits_csv(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line)) throw FormatError("fit CSV is empty");
  const auto col =
      header_index(line, {"brand", "alpha0", "alpha1", "beta_hat", "var_beta", "p_value"}, "fit");
  std::map<long long, FitResult> by_brand;
  while (next_data_line(in, line)) {
    const auto f = split(line, ',');
    if (f.size() < col.size()) throw FormatError("fit CSV row is short: " + line);
    const long long brand = parse_int(f[col.at("brand")], "brand");
    FitResult r;
    r.alpha0 = parse_double(f[col.at("alpha0")], "alpha0");
    r.alpha1 = parse_double(f[col.at("alpha1")], "alpha1");
    r.beta_hat = parse_double(f[col.at("beta_hat")], "beta_hat");
    r.var_beta = parse_double(f[col.at("var_beta")], "var_beta");
    r.p_value = parse_double(f[col.at("p_value")], "p_value");
    if (!by_brand.emplace(brand, r).second) throw FormatError("duplicate brand in fit CSV");
  }
  std::vector<FitResult> fits;
  long long expected = 1;
  for (const auto& [brand, fit] : by_brand) {
    if (brand != expected++) throw FormatError("fit CSV brands must be 1..B without gaps");
    fits.push_back(fit);
  }
  return fits;
}

json geo_response_to_json(const GeoResponseFit& fit) {
  json alphas = json::array();
  for (Eigen::Index b = 0; b < fit.alphas.rows(); ++b) {
    alphas.push_back({{"alpha0", fit.alphas(b, 0)}, {"alpha1", fit.alphas(b, 1)}});
  }
  auto vec = [](const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num_or_null(v(i)));
    return a;
  };
  return {{"beta", vec(fit.beta)},         {"beta_se", vec(fit.beta_se)},
          {"gamma", vec(fit.gamma)},       {"gamma_se", vec(fit.gamma_se)},
          {"alphas", alphas},              {"sigma2_hat", fit.sigma2_hat},
          {"dof", fit.dof}};
}

json shrinkage_to_json(const ShrinkageResult& r) {
  json tilde = json::array();
  json weights = json::array();
  for (Eigen::Index b = 0; b < r.beta_tilde.size(); ++b) {
    tilde.push_back(r.beta_tilde(b));
    weights.push_back(r.weights(b));
  }
  return {{"lambda", num_or_null(r.lambda)}, {"u", r.u},
          {"beta_bar_hat", r.beta_bar_hat},   {"beta_tilde", tilde},
          {"weights", weights},               {"sure_value", r.sure_value}};
}

void write_chains_csv(std::ostream& out, const PosteriorChains& chains) {
  const auto names = chains.parameter_names();
  out << "chain,iter,param,value\n";
  for (std::size_t c = 0; c < chains.draws.size(); ++c) {
    const Eigen::MatrixXd& d = chains.draws[c];
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      const std::int64_t iter = static_cast<std::size_t>(i) < chains.iterations.size()
                                    ? chains.iterations[static_cast<std::size_t>(i)]
                                    : i + 1;
      for (Eigen::Index p = 0; p < d.cols(); ++p) {
        out << c + 1 << ',' << iter << ',' << names[static_cast<std::size_t>(p)] << ','
            << num(d(i, p)) << '\n';
      }
    }
  }
}

json interval_summary_to_json(const IntervalSummary& s) {
  auto interval = [](const Interval& i) {
    return json{{"mean", i.mean}, {"lo", i.lo}, {"hi", i.hi}, {"half_width", i.half_width}};
  };
  json brands = json::array();
  for (std::size_t b = 0; b < s.brands.size(); ++b) {
    json j = interval(s.brands[b]);
    j["brand"] = b + 1;
    brands.push_back(j);
  }
  return {{"level", s.level}, {"brands", brands}, {"grand", interval(s.grand)}};
}

json study_summary_to_json(const StudySummary& s) {
  json conditions = json::array();
  for (const ConditionSummary& c : s.conditions) {
    conditions.push_back({
        {"cell", c.cell},
        {"delta", c.delta},
        {"beta_mean", c.beta_mean},
        {"beta_sd", c.beta_sd},
        {"replicates", c.replicates},
        {"rejection_rate", c.rejection_rate},
        {"mean_2se", c.mean_2se},
        {"rmse", c.rmse},
        {"mean_beta_given_significant", opt(c.mean_beta_given_significant)},
        {"mean_efficiency", opt(c.mean_efficiency)},
        {"mean_2se_pooled", opt(c.mean_2se_pooled)},
        {"stein_rmse", opt(c.stein_rmse)},
        {"bayes_rmse", opt(c.bayes_rmse)},
        {"coverage", opt(c.coverage)},
        {"mean_half_width", opt(c.mean_half_width)},
        {"half_width_q95", opt(c.half_width_q95)},
    });
  }
  return {{"kind", std::string(to_string(s.kind))},
          {"replicates", s.replicates},
          {"master_seed", s.master_seed},
          {"conditions", conditions}};
}

void write_records_csv(std::ostream& out, const std::vector<ReplicateRecord>& records) {
  const bool multi_cell = std::any_of(records.begin(), records.end(),
                                      [](const ReplicateRecord& r) { return r.cell != 0; });
  out << "replicate,delta,brand,beta_true,beta_hat,var_hat,p_value,beta_tilde,bayes_mean,ci_lo,ci_hi"
      << (multi_cell ? ",cell" : "") << '\n';
  for (const ReplicateRecord& r : records) {
    out << r.replicate << ',' << num(r.delta) << ',' << r.brand << ',' << num(r.beta_true) << ','
        << num(r.beta_hat) << ',' << num(r.var_hat) << ',' << num(r.p_value) << ','
        << num(r.beta_tilde) << ',' << num(r.bayes_mean) << ',' << num(r.ci_lo) << ','
        << num(r.ci_hi);
    if (multi_cell) out << ',' << r.cell;
    out << '\n';
  }
}

KeyValueFile KeyValueFile::parse(std::istream& in, const std::string& origin) {
  KeyValueFile file;
  file.origin_ = origin;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw FormatError(origin + ":" + std::to_string(line_no) + ": empty key");
    file.values_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file '" + path + "'");
  return parse(in, path);
}

void KeyValueFile::set(const std::string& key, const std::string& value) { values_[key] = value; }

void KeyValueFile::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw FormatError(origin_ + ": unknown key '" + key + "'");
    }
  }
}

const std::vector<std::string>& sim_config_keys() {
  static const std::vector<std::string> keys = {"geos",  "brands", "phi",   "cv_pre",    "cv_post",
                                                "n_pre", "n_post", "delta", "beta_mean", "beta_sd"};
  return keys;
}

void apply_sim_config(const KeyValueFile& file, SimConfig& c) {
  for (const auto& [key, value] : file.values()) {
    if (key == "geos") c.geos = static_cast<int>(parse_int(value, key));
    else if (key == "brands") c.brands = static_cast<int>(parse_int(value, key));
    else if (key == "phi") c.phi = parse_double(value, key);
    else if (key == "cv_pre") c.cv_pre = parse_double(value, key);
    else if (key == "cv_post") c.cv_post = parse_double(value, key);
    else if (key == "n_pre") c.n_pre = static_cast<int>(parse_int(value, key));
    else if (key == "n_post") c.n_post = static_cast<int>(parse_int(value, key));
    else if (key == "delta") c.delta = parse_double(value, key);
    else if (key == "beta_mean") c.beta_mean = parse_double(value, key);
    else if (key == "beta_sd") c.beta_sd = parse_double(value, key);
  }
}

const std::vector<std::string>& bayes_config_keys() {
  static const std::vector<std::string> keys = {
      "iterations",     "burn_in",        "chains", "thin",       "level",     "obs_prior_shape",
      "obs_prior_rate", "beta_prior_shape", "beta_prior_rate", "noise_scale"};
  return keys;
}

void apply_bayes_config(const KeyValueFile& file, BayesConfig& c) {
  for (const auto& [key, value] : file.values()) {
    if (key == "iterations") c.iterations = static_cast<int>(parse_int(value, key));
    else if (key == "burn_in") c.burn_in = static_cast<int>(parse_int(value, key));
    else if (key == "chains") c.chains = static_cast<int>(parse_int(value, key));
    else if (key == "thin") c.thin = static_cast<int>(parse_int(value, key));
    else if (key == "level") c.level = parse_double(value, key);
    else if (key == "obs_prior_shape") c.obs_prior.shape = parse_double(value, key);
    else if (key == "obs_prior_rate") c.obs_prior.rate = parse_double(value, key);
    else if (key == "beta_prior_shape") c.beta_prior.shape = parse_double(value, key);
    else if (key == "beta_prior_rate") c.beta_prior.rate = parse_double(value, key);
    else if (key == "noise_scale") {
      if (value == "times_pre") c.noise_scale = NoiseScale::times_pre;
      else if (value == "over_pre") c.noise_scale = NoiseScale::over_pre;
      else throw FormatError("noise_scale must be times_pre or over_pre, got '" + value + "'");
    }
  }
}

StudySpec study_spec_from(const KeyValueFile& file) {
  std::vector<std::string> known = {"kind",        "replicates",        "seed", "delta_levels",
                                    "cells",       "freeze_sizes",      "scramble_attempts",
                                    "jobs"};
  known.insert(known.end(), sim_config_keys().begin(), sim_config_keys().end());
  known.insert(known.end(), bayes_config_keys().begin(), bayes_config_keys().end());
  file.reject_unknown(known);

  StudySpec spec;
  apply_sim_config(file, spec.sim);
  apply_bayes_config(file, spec.bayes);
  const auto& v = file.values();
  if (!v.count("kind")) throw FormatError(file.origin() + ": missing required key 'kind'");
  spec.kind = parse_study_kind(v.at("kind"));
  if (v.count("replicates")) spec.replicates = static_cast<int>(parse_int(v.at("replicates"), "replicates"));
  if (v.count("seed")) spec.master_seed = static_cast<std::uint64_t>(parse_int(v.at("seed"), "seed"));
  if (v.count("jobs")) spec.jobs = static_cast<int>(parse_int(v.at("jobs"), "jobs"));
  if (v.count("scramble_attempts")) {
    spec.scramble_attempts = parse_int(v.at("scramble_attempts"), "scramble_attempts");
  }
  if (v.count("freeze_sizes")) {
    const std::string& f = v.at("freeze_sizes");
    if (f == "true" || f == "1") spec.freeze_sizes = true;
    else if (f == "false" || f == "0") spec.freeze_sizes = false;
    else throw FormatError("freeze_sizes must be true or false");
  }
  if (v.count("delta_levels")) {
    spec.delta_levels.clear();
    for (const std::string& d : split(v.at("delta_levels"), ',')) {
      spec.delta_levels.push_back(parse_double(d, "delta_levels"));
    }
  } else {
    spec.delta_levels = {spec.sim.delta};
  }
  if (v.count("cells")) {
    for (const std::string& cell : split(v.at("cells"), ',')) {
      const std::size_t colon = cell.find(':');
      if (colon == std::string::npos) throw FormatError("cells entries must be mean:sd, got '" + cell + "'");
      spec.cells.emplace_back(parse_double(cell.substr(0, colon), "cells"),
                              parse_double(cell.substr(colon + 1), "cells"));
    }
  }
  return spec;
}

}  // namespace geoexp::io
