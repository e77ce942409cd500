#include "geoexp/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geoexp/bayes.hpp"
#include "geoexp/design.hpp"
#include "geoexp/error.hpp"
#include "geoexp/estimation.hpp"
#include "geoexp/io.hpp"
#include "geoexp/rng.hpp"
#include "geoexp/shrinkage.hpp"
#include "geoexp/sim.hpp"
#include "geoexp/study.hpp"

namespace geoexp {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string g6(double v) { return fmt::format("{:.6g}", v); }

std::string opt_g6(const std::optional<double>& v) { return v ? g6(*v) : "-"; }

std::ifstream open_in(const std::string& path, const char* flag) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("{}: cannot open '{}'", flag, path));
  return in;
}

std::ofstream open_out(const std::string& path, const char* flag) {
  std::ofstream out(path);
  if (!out) throw FormatError(fmt::format("{}: cannot write '{}'", flag, path));
  return out;
}

DesignMatrix load_design(const std::string& path) {
  std::ifstream in = open_in(path, "--design");
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(fmt::format("--design: '{}' is not valid JSON: {}", path, e.what()));
    }
    return io::design_from_json(doc);
  }
  return io::read_design_csv(in);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in = open_in(path, "--data");
  return io::read_dataset_csv(in);
}

void write_json(const nlohmann::json& doc, const std::string& path, const char* flag) {
  std::ofstream out = open_out(path, flag);
  out << doc.dump(2) << '\n';
}

// Registers `--<key>` overrides for config keys; values land in `store` and
// are applied on top of the config file.
void add_overrides(CLI::App* cmd, const std::vector<std::string>& keys,
                   std::map<std::string, std::string>& store) {
  for (const std::string& key : keys) {
    std::string flag = key;
    for (char& c : flag) {
      if (c == '_') c = '-';
    }
    cmd->add_option("--" + flag, store[key], "override config key " + key);
  }
}

io::KeyValueFile merged_config(const std::string& path, const std::map<std::string, std::string>& overrides,
                               CLI::App* cmd) {
  io::KeyValueFile file;
  if (!path.empty()) file = io::KeyValueFile::load(path);
  for (const auto& [key, value] : overrides) {
    std::string flag = key;
    for (char& c : flag) {
      if (c == '_') c = '-';
    }
    if (cmd->count("--" + flag) > 0) file.set(key, value);
  }
  return file;
}

void check_even(int value, const char* flag) {
  if (value < 2 || value % 2 != 0) {
    throw UsageError(fmt::format(
        "{} must be an even integer >= 2 (a balanced design treats exactly half), got {}", flag,
        value));
  }
}

struct DesignArgs {
  int geos = 0;
  int brands = 0;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> steps;
  std::string output;
  std::string trace;
};

int cmd_design(const DesignArgs& a, std::ostream& out) {
  check_even(a.geos, "--geos");
  check_even(a.brands, "--brands");
  const std::int64_t steps = a.steps.value_or(default_scramble_attempts(a.geos, a.brands));
  if (steps < 0) throw UsageError("--steps must be non-negative");
  Rng rng(replicate_seed(a.seed, 0, Stream::design));
  const ScrambleResult r = scramble(checkerboard_init(a.geos, a.brands), steps, rng);

  std::string trace_path = a.trace;
  if (trace_path.empty() && !a.output.empty()) trace_path = a.output + ".trace.csv";
  if (a.output.empty()) {
    io::write_design_csv(out, r.design);
  } else if (a.output.size() >= 5 && a.output.compare(a.output.size() - 5, 5, ".json") == 0) {
    write_json(io::design_to_json(r.design), a.output, "-o");
  } else {
    std::ofstream f = open_out(a.output, "-o");
    io::write_design_csv(f, r.design);
  }
  if (!trace_path.empty()) {
    std::ofstream f = open_out(trace_path, "--trace");
    io::write_trace_csv(f, r.trace);
  }
  if (!a.output.empty()) {
    const CorrelationSummary c = correlations(r.design);
    const ValidationReport v = validate(r.design);
    fmt::print(out, "design {}x{}: {} flips in {} attempts\n", a.geos, a.brands, r.flips, steps);
    fmt::print(out, "brand correlation min {} max {} rms {}\n", g6(c.brand_min), g6(c.brand_max),
               g6(c.brand_rms));
    fmt::print(out, "collisions: {} row pairs, {} column pairs\n", v.row_collisions.size(),
               v.column_collisions.size());
  }
  return 0;
}

struct SimulateArgs {
  std::string design;
  std::string config;
  std::uint64_t seed = 1;
  std::string output;
  std::map<std::string, std::string> overrides;
};

int cmd_simulate(SimulateArgs& a, CLI::App* cmd, std::ostream& out) {
  const DesignMatrix design = load_design(a.design);
  const io::KeyValueFile file = merged_config(a.config, a.overrides, cmd);
  file.reject_unknown(io::sim_config_keys());
  SimConfig config;
  config.geos = design.geos();
  config.brands = design.brands();
  io::apply_sim_config(file, config);
  if (config.geos != design.geos() || config.brands != design.brands()) {
    throw PreconditionError(fmt::format("config asks for {}x{} but --design '{}' is {}x{}",
                                        config.geos, config.brands, a.design, design.geos(),
                                        design.brands()));
  }
  config.check();

  Rng size_rng(replicate_seed(a.seed, 0, Stream::sizes));
  Rng effect_rng(replicate_seed(a.seed, 0, Stream::effects));
  Rng pre_rng(replicate_seed(a.seed, 0, Stream::pre_noise));
  Rng post_rng(replicate_seed(a.seed, 0, Stream::post_noise));
  const GeoProfile sizes = sample_geo_sizes(config, size_rng);
  const Eigen::VectorXd effects = sample_brand_effects(config, effect_rng);
  const Dataset data = generate_dataset(design, config, sizes, effects, {pre_rng, post_rng});

  if (a.output.empty()) {
    io::write_dataset_csv(out, data);
  } else {
    std::ofstream f = open_out(a.output, "-o");
    io::write_dataset_csv(f, data);
    fmt::print(out, "dataset {} GEOs x {} brands written to {}\n", data.geos(), data.brands(),
               a.output);
  }
  return 0;
}

struct AnalyzeArgs {
  std::string data;
  std::string output;
  std::string geo_response;
};

int cmd_analyze(const AnalyzeArgs& a, CLI::App* cmd, std::ostream& out) {
  const Dataset data = load_dataset(a.data);
  const std::vector<FitResult> fits = fit_all_brands(data);
  if (!a.output.empty()) {
    std::ofstream f = open_out(a.output, "-o");
    io::write_fits_csv(f, fits);
  }
  fmt::print(out, "{:>6} {:>12} {:>12} {:>12}\n", "brand", "beta_hat", "se", "p_value");
  for (std::size_t b = 0; b < fits.size(); ++b) {
    fmt::print(out, "{:>6} {:>12} {:>12} {:>12}\n", b + 1, g6(fits[b].beta_hat),
               g6(std::sqrt(fits[b].var_beta)), g6(fits[b].p_value));
  }
  if (fits.size() > 1) {
    const PooledEstimate p = pooled_mean(fits);
    fmt::print(out, "pooled beta {} (2se {})\n", g6(p.beta_bar_hat), g6(2.0 * std::sqrt(p.var_beta_bar)));
  }
  if (cmd->count("--geo-response") > 0) {
    const GeoResponseFit fit = fit_geo_responsiveness(data);
    if (a.geo_response.empty()) {
      fmt::print(out, "geo-response model: sigma2 {} dof {}\n", g6(fit.sigma2_hat), fit.dof);
      for (Eigen::Index b = 0; b < fit.beta.size(); ++b) {
        fmt::print(out, "  beta_{} {} (se {})\n", b + 1, g6(fit.beta(b)), g6(fit.beta_se(b)));
      }
    } else {
      write_json(io::geo_response_to_json(fit), a.geo_response, "--geo-response");
    }
  }
  return 0;
}

struct ShrinkArgs {
  std::string fits;
  std::string output;
  int grid = 1001;
};

int cmd_shrink(const ShrinkArgs& a, std::ostream& out) {
  std::ifstream in = open_in(a.fits, "--fits");
  const std::vector<FitResult> fits = io::read_fits_csv(in);
  std::vector<double> hats;
  std::vector<double> vars;
  for (const FitResult& f : fits) {
    hats.push_back(f.beta_hat);
    vars.push_back(f.var_beta);
  }
  const ShrinkageResult r = choose_lambda(hats, vars, a.grid);
  if (!a.output.empty()) write_json(io::shrinkage_to_json(r), a.output, "-o");
  fmt::print(out, "lambda {} (u {}), pooled {}, SURE {}\n",
             std::isinf(r.lambda) ? std::string("inf") : g6(r.lambda), g6(r.u),
             g6(r.beta_bar_hat), g6(r.sure_value));
  for (Eigen::Index b = 0; b < r.beta_tilde.size(); ++b) {
    fmt::print(out, "  brand {} {} -> {}\n", b + 1, g6(hats[static_cast<std::size_t>(b)]),
               g6(r.beta_tilde(b)));
  }
  return 0;
}

struct BayesArgs {
  std::string data;
  std::string config;
  std::uint64_t seed = 1;
  std::string output;
  std::string chains;
  std::map<std::string, std::string> overrides;
};

int cmd_bayes(BayesArgs& a, CLI::App* cmd, std::ostream& out) {
  const Dataset data = load_dataset(a.data);
  const io::KeyValueFile file = merged_config(a.config, a.overrides, cmd);
  file.reject_unknown(io::bayes_config_keys());
  BayesConfig config;
  io::apply_bayes_config(file, config);
  config.check();

  Rng rng(replicate_seed(a.seed, 0, Stream::gibbs));
  const PosteriorChains chains = gibbs_run(data, config, rng);
  const IntervalSummary summary = summarize_posterior(chains, config.level);
  nlohmann::json doc = io::interval_summary_to_json(summary);
  if (config.chains > 1) {
    nlohmann::json rhat = nlohmann::json::array();
    for (int b = 0; b < chains.brands; ++b) {
      rhat.push_back(potential_scale_reduction(chains, PosteriorChains::beta_index(b)));
    }
    doc["rhat_beta"] = rhat;
    doc["rhat_grand"] = potential_scale_reduction(chains, chains.grand_beta_index());
  }
  if (!a.output.empty()) write_json(doc, a.output, "-o");
  if (!a.chains.empty()) {
    std::ofstream f = open_out(a.chains, "--chains-out");
    io::write_chains_csv(f, chains);
  }
  fmt::print(out, "{:>6} {:>12} {:>12} {:>12}\n", "brand", "mean", "lo", "hi");
  for (std::size_t b = 0; b < summary.brands.size(); ++b) {
    const Interval& i = summary.brands[b];
    fmt::print(out, "{:>6} {:>12} {:>12} {:>12}\n", b + 1, g6(i.mean), g6(i.lo), g6(i.hi));
  }
  fmt::print(out, "{:>6} {:>12} {:>12} {:>12}\n", "grand", g6(summary.grand.mean),
             g6(summary.grand.lo), g6(summary.grand.hi));
  return 0;
}

struct StudyArgs {
  std::string spec;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::string output;
  std::string records;
};

int cmd_study(const StudyArgs& a, std::ostream& out) {
  StudySpec spec = io::study_spec_from(io::KeyValueFile::load(a.spec));
  if (a.jobs) spec.jobs = *a.jobs;
  if (a.seed) spec.master_seed = *a.seed;
  if (a.replicates) spec.replicates = *a.replicates;
  const StudySummary summary = run_study(spec);

  if (!a.output.empty()) write_json(io::study_summary_to_json(summary), a.output, "-o");
  if (!a.records.empty()) {
    std::ofstream f = open_out(a.records, "--records");
    io::write_records_csv(f, summary.records);
  }
  fmt::print(out, "{} study, {} replicates, seed {}\n", to_string(summary.kind),
             summary.replicates, summary.master_seed);
  fmt::print(out, "{:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>12} {:>10} {:>10}\n", "delta",
             "beta", "sd", "reject", "mean_2se", "rmse", "E[b|p<=.05]", "eff", "coverage");
  for (const ConditionSummary& c : summary.conditions) {
    fmt::print(out, "{:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>12} {:>10} {:>10}\n", g6(c.delta),
               g6(c.beta_mean), g6(c.beta_sd), g6(c.rejection_rate), g6(c.mean_2se), g6(c.rmse),
               opt_g6(c.mean_beta_given_significant), opt_g6(c.mean_efficiency),
               opt_g6(c.coverage));
  }
  return 0;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("GEOEXP_SEED")) {
    try {
      return static_cast<std::uint64_t>(io::parse_int(env, "GEOEXP_SEED"));
    } catch (const FormatError&) {
      throw UsageError(fmt::format("GEOEXP_SEED must be an integer, got '{}'", env));
    }
  }
  return 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multibrand geo-experiment design and analysis", "geoexp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "geoexp 0.1.0");

  std::uint64_t seed = 1;
  try {
    seed = default_seed();
  } catch (const UsageError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  }

  DesignArgs design;
  design.seed = seed;
  CLI::App* design_cmd = app.add_subcommand("design", "scramble a balanced checkerboard design");
  design_cmd->add_option("--geos", design.geos, "number of GEOs (even)")->required();
  design_cmd->add_option("--brands", design.brands, "number of brands (even)")->required();
  design_cmd->add_option("--seed", design.seed, "random seed (default $GEOEXP_SEED or 1)");
  design_cmd->add_option("--steps", design.steps, "flip attempts (default 50 G B)");
  design_cmd->add_option("-o,--output", design.output, "design file (.csv or .json); stdout if omitted");
  design_cmd->add_option("--trace", design.trace, "correlation trace CSV (default <output>.trace.csv)");

  SimulateArgs simulate;
  simulate.seed = seed;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "simulate a dataset for a design");
  sim_cmd->add_option("--design", simulate.design, "design file")->required();
  sim_cmd->add_option("--config", simulate.config, "key = value simulation config");
  sim_cmd->add_option("--seed", simulate.seed, "random seed (default $GEOEXP_SEED or 1)");
  sim_cmd->add_option("-o,--output", simulate.output, "dataset CSV; stdout if omitted");
  add_overrides(sim_cmd, io::sim_config_keys(), simulate.overrides);

  AnalyzeArgs analyze;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "fit every brand by weighted least squares");
  analyze_cmd->add_option("--data", analyze.data, "dataset CSV")->required();
  analyze_cmd->add_option("-o,--output", analyze.output, "fit CSV");
  analyze_cmd->add_option("--geo-response", analyze.geo_response,
                          "also fit the GEO-responsiveness model; JSON path optional")
      ->expected(0, 1);

  ShrinkArgs shrink;
  CLI::App* shrink_cmd = app.add_subcommand("shrink", "SURE shrinkage of a fit CSV");
  shrink_cmd->add_option("--fits", shrink.fits, "fit CSV from analyze")->required();
  shrink_cmd->add_option("-o,--output", shrink.output, "shrinkage JSON");
  shrink_cmd->add_option("--grid", shrink.grid, "grid points for u in [0, 1]")
      ->check(CLI::Range(2, 1000000));

  BayesArgs bayes;
  bayes.seed = seed;
  CLI::App* bayes_cmd = app.add_subcommand("bayes", "hierarchical Gibbs sampler");
  bayes_cmd->add_option("--data", bayes.data, "dataset CSV")->required();
  bayes_cmd->add_option("--config", bayes.config, "key = value sampler config");
  bayes_cmd->add_option("--seed", bayes.seed, "random seed (default $GEOEXP_SEED or 1)");
  bayes_cmd->add_option("-o,--output", bayes.output, "interval summary JSON");
  bayes_cmd->add_option("--chains-out", bayes.chains, "draws CSV (chain,iter,param,value)");
  add_overrides(bayes_cmd, io::bayes_config_keys(), bayes.overrides);

  StudyArgs study;
  CLI::App* study_cmd = app.add_subcommand("study", "run a replicated simulation study");
  study_cmd->add_option("--spec", study.spec, "study spec file")->required();
  study_cmd->add_option("--jobs", study.jobs, "worker threads")->check(CLI::PositiveNumber);
  study_cmd->add_option("--seed", study.seed, "master seed (overrides the spec)");
  study_cmd->add_option("--replicates", study.replicates, "replicates (overrides the spec)");
  study_cmd->add_option("-o,--output", study.output, "summary JSON");
  study_cmd->add_option("--records", study.records, "per-replicate records CSV");
  if (std::getenv("GEOEXP_SEED")) study.seed = seed;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*design_cmd) return cmd_design(design, out);
    if (*sim_cmd) return cmd_simulate(simulate, sim_cmd, out);
    if (*analyze_cmd) return cmd_analyze(analyze, analyze_cmd, out);
    if (*shrink_cmd) return cmd_shrink(shrink, out);
    if (*bayes_cmd) return cmd_bayes(bayes, bayes_cmd, out);
    if (*study_cmd) return cmd_study(study, out);
  } catch (const UsageError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace geoexp
