#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "geoexp/error.hpp"
#include "geoexp/io.hpp"

using namespace geoexp;

namespace {

Dataset tiny_dataset() {
  Rng rng(8);
  SimConfig c;
  c.geos = 6;
  c.brands = 4;
  return generate_dataset(checkerboard_init(6, 4), c, rng);
}

}  // namespace

TEST_CASE("design CSV and JSON round-trip") {
  Rng rng(1);
  const DesignMatrix d = scramble(checkerboard_init(8, 6), 2000, rng, 0).design;
  std::stringstream csv;
  io::write_design_csv(csv, d);
  CHECK(csv.str().rfind("brand_1,brand_2", 0) == 0);
  CHECK(io::read_design_csv(csv) == d);
  CHECK(io::design_from_json(io::design_to_json(d)) == d);

  const auto doc = io::design_to_json(d);
  CHECK(doc["g_count"] == 8);
  CHECK(doc["b_count"] == 6);
}

TEST_CASE("design CSV rejects bad cells and ragged rows") {
  std::istringstream zero("brand_1,brand_2\n1,0\n");
  CHECK_THROWS_AS(io::read_design_csv(zero), FormatError);
  std::istringstream ragged("brand_1,brand_2\n1,-1\n-1\n");
  CHECK_THROWS_AS(io::read_design_csv(ragged), FormatError);
  std::istringstream header("a,b\n1,-1\n");
  CHECK_THROWS_AS(io::read_design_csv(header), FormatError);
  std::istringstream plain("brand_1,brand_2\n1,-1\n-1,+1\n");
  CHECK(io::read_design_csv(plain).balanced());
}

TEST_CASE("dataset CSV round-trips exactly") {
  const Dataset d = tiny_dataset();
  std::stringstream s;
  io::write_dataset_csv(s, d);
  const Dataset back = io::read_dataset_csv(s);
  CHECK(back.y_pre == d.y_pre);
  CHECK(back.y_post == d.y_post);
  CHECK(back.x_post == d.x_post);
  REQUIRE(back.true_beta);
  CHECK(*back.true_beta == *d.true_beta);
}

TEST_CASE("dataset CSV needs exactly one row per cell") {
  std::istringstream missing("geo,brand,y_pre,x_post,y_post\n1,1,1,0,1\n2,1,1,0,1\n1,2,1,0,1\n");
  CHECK_THROWS_AS(io::read_dataset_csv(missing), FormatError);
  std::istringstream dup("geo,brand,y_pre,x_post,y_post\n1,1,1,0,1\n1,1,1,0,1\n");
  CHECK_THROWS_AS(io::read_dataset_csv(dup), FormatError);
  std::istringstream zero_based("geo,brand,y_pre,x_post,y_post\n0,1,1,0,1\n");
  CHECK_THROWS_AS(io::read_dataset_csv(zero_based), FormatError);
  std::istringstream no_column("geo,brand,y_pre,y_post\n1,1,1,1\n");
  CHECK_THROWS_AS(io::read_dataset_csv(no_column), FormatError);
}

TEST_CASE("fits CSV round-trip and brand order") {
  std::vector<FitResult> fits(3);
  for (int b = 0; b < 3; ++b) {
    fits[static_cast<std::size_t>(b)].beta_hat = 1.0 / (b + 3);
    fits[static_cast<std::size_t>(b)].var_beta = 0.1 * (b + 1);
    fits[static_cast<std::size_t>(b)].p_value = 0.01;
  }
  std::stringstream s;
  io::write_fits_csv(s, fits);
  const auto back = io::read_fits_csv(s);
  REQUIRE(back.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(back[b].beta_hat == fits[b].beta_hat);
    CHECK(back[b].var_beta == fits[b].var_beta);
  }
  std::istringstream gap("brand,alpha0,alpha1,beta_hat,var_beta,p_value\n1,0,1,2,1,0.5\n3,0,1,2,1,0.5\n");
  CHECK_THROWS_AS(io::read_fits_csv(gap), FormatError);
}

TEST_CASE("infinite lambda serializes as null") {
  ShrinkageResult r;
  r.lambda = kInfiniteLambda;
  r.u = 1.0;
  r.beta_tilde = Eigen::VectorXd::Ones(2);
  r.weights = Eigen::VectorXd::Ones(2);
  const auto doc = io::shrinkage_to_json(r);
  CHECK(doc["lambda"].is_null());
  CHECK(doc["u"] == 1.0);
  CHECK(doc["beta_tilde"].size() == 2);
}

TEST_CASE("records CSV has the documented columns") {
  ReplicateRecord r;
  r.brand = 1;
  r.beta_tilde = std::nan("");
  std::stringstream s;
  io::write_records_csv(s, {r});
  std::string header;
  std::getline(s, header);
  CHECK(header == "replicate,delta,brand,beta_true,beta_hat,var_hat,p_value,beta_tilde,bayes_mean,ci_lo,ci_hi");
  std::string row;
  std::getline(s, row);
  CHECK(row.find(",,") != std::string::npos);

  r.cell = 2;
  std::stringstream with_cell;
  io::write_records_csv(with_cell, {r});
  std::getline(with_cell, header);
  CHECK(header.substr(header.size() - 5) == ",cell");
}

TEST_CASE("key-value parsing") {
  std::istringstream in("# comment\ngeos = 40\n  delta=0.02   # trailing\n\nbeta_sd = 0.5\n");
  const auto file = io::KeyValueFile::parse(in, "sim.cfg");
  CHECK(file.values().at("geos") == "40");
  CHECK(file.values().at("delta") == "0.02");
  SimConfig c;
  io::apply_sim_config(file, c);
  CHECK(c.geos == 40);
  CHECK(c.delta == 0.02);
  CHECK(c.beta_sd == 0.5);
  CHECK_NOTHROW(file.reject_unknown(io::sim_config_keys()));

  std::istringstream bad("geos = 4\nnonsense\n");
  try {
    io::KeyValueFile::parse(bad, "x.cfg");
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }

  std::istringstream unknown("gesos = 4\n");
  const auto typo = io::KeyValueFile::parse(unknown, "t.cfg");
  CHECK_THROWS_WITH_AS(typo.reject_unknown(io::sim_config_keys()), doctest::Contains("gesos"), FormatError);

  std::istringstream number("delta = 0.0x\n");
  SimConfig c2;
  CHECK_THROWS_AS(io::apply_sim_config(io::KeyValueFile::parse(number), c2), FormatError);
}

TEST_CASE("study spec from key-value text") {
  std::istringstream in(
      "kind = bayes_coverage\nreplicates = 12\nseed = 99\ngeos = 40\nbrands = 4\n"
      "delta_levels = 0.01, 0.005\ncells = 1:1, 0.25:0.1\niterations = 500\nburn_in = 100\n"
      "noise_scale = over_pre\nfreeze_sizes = true\n");
  const StudySpec s = io::study_spec_from(io::KeyValueFile::parse(in));
  CHECK(s.kind == StudyKind::bayes_coverage);
  CHECK(s.replicates == 12);
  CHECK(s.master_seed == 99);
  CHECK(s.sim.geos == 40);
  CHECK(s.delta_levels == std::vector<double>{0.01, 0.005});
  REQUIRE(s.cells.size() == 2);
  CHECK(s.cells[1] == std::pair{0.25, 0.1});
  CHECK(s.bayes.iterations == 500);
  CHECK(s.bayes.noise_scale == NoiseScale::over_pre);
  CHECK(s.freeze_sizes);

  std::istringstream no_kind("replicates = 3\n");
  CHECK_THROWS_AS(io::study_spec_from(io::KeyValueFile::parse(no_kind)), FormatError);
  std::istringstream typo("kind = single_brand\nreplicate = 3\n");
  CHECK_THROWS_AS(io::study_spec_from(io::KeyValueFile::parse(typo)), FormatError);
  std::istringstream defaults("kind = single_brand\ndelta = 0.02\n");
  CHECK(io::study_spec_from(io::KeyValueFile::parse(defaults)).delta_levels == std::vector<double>{0.02});
}

TEST_CASE("number parsing") {
  CHECK(io::parse_double("1e-3", "x") == 1e-3);
  CHECK(std::isnan(io::parse_double("", "x")));
  CHECK_THROWS_AS(io::parse_double("abc", "x"), FormatError);
  CHECK(io::parse_int("42", "n") == 42);
  CHECK_THROWS_AS(io::parse_int("4.5", "n"), FormatError);
}
