#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>

#include "geoexp/bayes.hpp"
#include "geoexp/design.hpp"
#include "geoexp/error.hpp"
#include "geoexp/estimation.hpp"
#include "geoexp/io.hpp"
#include "geoexp/shrinkage.hpp"
#include "geoexp/sim.hpp"
#include "geoexp/study.hpp"

namespace py = pybind11;
using namespace geoexp;

namespace {

using IntMatrix = DesignMatrix::Entries;

DesignMatrix to_design(const IntMatrix& entries) { return DesignMatrix(entries); }

py::dict correlation_dict(const CorrelationSummary& c) {
  py::dict d;
  d["brand_min"] = c.brand_min;
  d["brand_max"] = c.brand_max;
  d["brand_rms"] = c.brand_rms;
  d["geo_min"] = c.geo_min;
  d["geo_max"] = c.geo_max;
  d["geo_rms"] = c.geo_rms;
  return d;
}

SimConfig sim_config(const py::dict& kwargs) {
  SimConfig c;
  io::KeyValueFile file;
  for (auto item : kwargs) {
    file.set(py::str(item.first), py::str(item.second));
  }
  file.reject_unknown(io::sim_config_keys());
  io::apply_sim_config(file, c);
  return c;
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  out["y_pre"] = d.y_pre;
  out["y_post"] = d.y_post;
  out["x_post"] = d.x_post;
  if (d.true_beta) out["true_beta"] = *d.true_beta;
  else out["true_beta"] = py::none();
  return out;
}

Dataset dataset_from(const Eigen::MatrixXd& y_pre, const Eigen::MatrixXd& x_post,
                     const Eigen::MatrixXd& y_post) {
  Dataset d;
  d.y_pre = y_pre;
  d.x_post = x_post;
  d.y_post = y_post;
  d.check_shape();
  return d;
}

py::dict fit_dict(const FitResult& f) {
  py::dict d;
  d["alpha0"] = f.alpha0;
  d["alpha1"] = f.alpha1;
  d["beta_hat"] = f.beta_hat;
  d["var_beta"] = f.var_beta;
  d["p_value"] = f.p_value;
  d["dof"] = f.dof;
  d["sigma2_hat"] = f.sigma2_hat;
  return d;
}

// Results with many fields go through the JSON writers so Python sees the same
// documents the command-line tool produces.
py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Balanced multibrand geo-experiment designs, simulation and estimation.";

  auto base = py::register_exception<Error>(m, "GeoexpError", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<DegenerateDesignError>(m, "DegenerateDesignError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<IdentifiabilityError>(m, "IdentifiabilityError", base.ptr());
  py::register_exception<ModelViolationError>(m, "ModelViolationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  // Designs are exchanged as G x B integer arrays of +1 / -1.
  m.def("checkerboard", [](int geos, int brands) { return checkerboard_init(geos, brands).entries(); },
        py::arg("geos"), py::arg("brands"));

  m.def(
      "scramble",
      [](const IntMatrix& design, std::int64_t attempts, std::uint64_t seed, int trace_every) {
        Rng rng(replicate_seed(seed, 0, Stream::design));
        const DesignMatrix start = to_design(design);
        std::optional<ScrambleResult> run;
        {
          py::gil_scoped_release release;
          run = scramble(start, attempts, rng, trace_every);
        }
        const ScrambleResult& r = *run;
        py::list trace;
        for (const TraceEntry& e : r.trace) {
          py::dict d = correlation_dict(e.correlations);
          d["attempts"] = e.attempts;
          d["flips"] = e.flips;
          trace.append(d);
        }
        return py::make_tuple(r.design.entries(), r.flips, trace);
      },
      py::arg("design"), py::arg("attempts"), py::arg("seed") = 1, py::arg("trace_every") = 10,
      "Run the swap chain; returns (design, flips, trace).");

  m.def("default_scramble_attempts", &default_scramble_attempts, py::arg("geos"), py::arg("brands"));

  m.def("correlations", [](const IntMatrix& d) { return correlation_dict(correlations(to_design(d))); });
  m.def("brand_correlation_matrix", [](const IntMatrix& d) { return brand_correlation_matrix(to_design(d)); });

  m.def("validate", [](const IntMatrix& d) {
    const ValidationReport v = validate(to_design(d));
    py::dict out;
    out["balanced"] = v.balanced;
    out["row_collisions"] = v.row_collisions;
    out["column_collisions"] = v.column_collisions;
    out["collision_free"] = v.collision_free();
    return out;
  });

  m.def("grow4", [](const IntMatrix& d, int row_a, int row_b, int col_a, int col_b, int z) {
    return grow4(to_design(d), row_a, row_b, col_a, col_b, z).entries();
  }, py::arg("design"), py::arg("row_a") = 0, py::arg("row_b") = 1, py::arg("col_a") = 0,
     py::arg("col_b") = 1, py::arg("z") = 1);

  m.def("seed_design_6x6", [] { return seed_design_6x6().entries(); });
  m.def("seed_design_8x8", [] { return seed_design_8x8().entries(); });

  m.def(
      "simulate",
      [](const IntMatrix& design, std::uint64_t seed, const py::kwargs& kwargs) {
        const DesignMatrix d = to_design(design);
        SimConfig c = sim_config(kwargs);
        c.geos = d.geos();
        c.brands = d.brands();
        c.check();
        Rng sizes(replicate_seed(seed, 0, Stream::sizes));
        Rng effects(replicate_seed(seed, 0, Stream::effects));
        Rng pre(replicate_seed(seed, 0, Stream::pre_noise));
        Rng post(replicate_seed(seed, 0, Stream::post_noise));
        const GeoProfile profile = sample_geo_sizes(c, sizes);
        const Eigen::VectorXd beta = sample_brand_effects(c, effects);
        return dataset_dict(generate_dataset(d, c, profile, beta, {pre, post}));
      },
      py::arg("design"), py::arg("seed") = 1,
      "Simulate one dataset. Keyword arguments override simulation settings (delta, beta_mean, ...).");

  m.def("wls_fit", [](const std::vector<double>& y_pre, const std::vector<double>& x_post,
                      const std::vector<double>& y_post) { return fit_dict(wls_fit_single(y_pre, x_post, y_post)); },
        py::arg("y_pre"), py::arg("x_post"), py::arg("y_post"));

  m.def(
      "fit_all_brands",
      [](const Eigen::MatrixXd& y_pre, const Eigen::MatrixXd& x_post, const Eigen::MatrixXd& y_post) {
        py::list out;
        for (const FitResult& f : fit_all_brands(dataset_from(y_pre, x_post, y_post))) out.append(fit_dict(f));
        return out;
      },
      py::arg("y_pre"), py::arg("x_post"), py::arg("y_post"));

  m.def("shrink", [](const std::vector<double>& beta_hat, const std::vector<double>& var_hat) {
    return to_python(io::shrinkage_to_json(choose_lambda(beta_hat, var_hat)));
  }, py::arg("beta_hat"), py::arg("var_hat"), "SURE-tuned shrinkage toward the pooled mean.");

  m.def("sure", &sure_g, py::arg("lam"), py::arg("beta_hat"), py::arg("var_hat"));

  m.def(
      "bayes",
      [](const Eigen::MatrixXd& y_pre, const Eigen::MatrixXd& x_post, const Eigen::MatrixXd& y_post,
         std::uint64_t seed, int iterations, int burn_in, int chains, double level) {
        BayesConfig cfg;
        cfg.iterations = iterations;
        cfg.burn_in = burn_in;
        cfg.chains = chains;
        cfg.level = level;
        const Dataset data = dataset_from(y_pre, x_post, y_post);
        Rng rng(replicate_seed(seed, 0, Stream::gibbs));
        IntervalSummary s;
        {
          py::gil_scoped_release release;
          s = summarize_posterior(gibbs_run(data, cfg, rng), level);
        }
        return to_python(io::interval_summary_to_json(s));
      },
      py::arg("y_pre"), py::arg("x_post"), py::arg("y_post"), py::arg("seed") = 1,
      py::arg("iterations") = 2000, py::arg("burn_in") = 1000, py::arg("chains") = 4, py::arg("level") = 0.95);

  m.def(
      "run_study",
      [](const std::string& spec_text) {
        std::istringstream in(spec_text);
        const StudySpec spec = io::study_spec_from(io::KeyValueFile::parse(in, "<spec>"));
        StudySummary summary;
        {
          py::gil_scoped_release release;
          summary = run_study(spec);
        }
        std::ostringstream records;
        io::write_records_csv(records, summary.records);
        return py::make_tuple(to_python(io::study_summary_to_json(summary)), records.str());
      },
      py::arg("spec"), "Run a study from `key = value` text; returns (summary, records_csv).");
}
