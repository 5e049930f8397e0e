#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nearfield/errors.hpp"
#include "nearfield/experiments.hpp"

using namespace nearfield;

namespace {

ExperimentConfig small_config(int k) {
  ExperimentConfig c;
  c.scenario.geom = {4, 2, 0.05, 0.05, 0.1};
  c.scenario.num_sources = k;
  c.scenario.num_snapshots = 20;
  c.scenario.range_min = 2 * c.scenario.geom.aperture();
  c.scenario.range_max = 0.9;
  c.test_size = 4;
  c.grid = {9, 9, 5};
  c.repeats = 3;
  c.seed = 17;
  return c;
}

LocatorModel random_model(int k) {
  Rng rng(1);
  LocatorModel m(desk_architecture(8, k));
  m.initialize(rng);
  return m;
}

}  // namespace

TEST_CASE("rmse sweep layout and determinism") {
  const ExperimentConfig c = small_config(1);
  LocatorModel m = random_model(1);
  const RmseReport a = run_rmse_experiment(c, m);
  CHECK(a.rows.size() == 2 * 2 * 4);
  for (const RmseRow& r : a.rows) {
    CHECK(r.rmse >= 0);
    CHECK(r.trials == 4);
  }
  CHECK(a.find(Method::Cnn, 8.0, 75).snapshots == 75);
  const std::string csv = to_csv(a);
  CHECK(csv.rfind("method,kappa,snapshots,rmse_m,trials\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
  CHECK(csv == to_csv(run_rmse_experiment(c, m)));
}

TEST_CASE("runtime benchmark rows") {
  ExperimentConfig c = small_config(1);
  c.snapshot_counts = {10, 40};
  LocatorModel m = random_model(1);
  const RuntimeReport r = run_runtime_benchmark(c, m);
  CHECK(r.rows.size() == 6);
  for (const RuntimeRow& row : r.rows) {
    CHECK(row.mean_seconds > 0);
    CHECK(row.std_seconds >= 0);
    CHECK(row.samples == 4);
  }
  CHECK(r.find("music", 40).snapshots == 40);
  CHECK(to_csv(r).rfind("method,snapshots,mean_s,std_s,samples\n", 0) == 0);
}

TEST_CASE("scatter report") {
  ExperimentConfig c = small_config(3);
  c.grid = {15, 15, 7};
  LocatorModel m = random_model(3);
  const auto rows = scatter_report(c, m);
  CHECK(rows.size() == 36);
  const std::string csv = to_csv(rows);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "realization,source,truth_x,truth_y,truth_z,music_x,music_y,music_z,cnn_x,cnn_y,cnn_z");
  int n = 0;
  while (std::getline(lines, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
    ++n;
  }
  CHECK(n == 36);
  CHECK(csv == to_csv(scatter_report(c, m)));
}

TEST_CASE("experiment configuration errors") {
  ExperimentConfig c = small_config(1);
  c.snapshot_counts.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(1);
  c.snapshot_counts = {0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(1);
  CHECK_THROWS_AS(load_experiment_model(c), ConfigError);
  c.model_path = "/nonexistent/model.nfm";
  CHECK_THROWS_AS(load_experiment_model(c), ConfigError);
  LocatorModel wrong = random_model(2);
  CHECK_THROWS_AS(run_rmse_experiment(small_config(1), wrong), ConfigError);

  nlohmann::json doc = {{"n_y", 4},        {"n_z", 2},        {"d_y", 0.05},      {"d_z", 0.05},
                        {"wavelength", 0.1}, {"kappa", 4},      {"snr_db", 0},      {"num_sources", 1},
                        {"num_snapshots", 20}, {"seed", 3},     {"range_min", 0.4}, {"range_max", 0.9},
                        {"snapshot_counts", {10, 20}}, {"grid_azimuth", 11}};
  const ExperimentConfig parsed = parse_experiment(doc);
  CHECK(parsed.snapshot_counts == std::vector<int>{10, 20});
  CHECK(parsed.grid.azimuth == 11);
  CHECK(parsed.seed == 3);
  doc["kappas"] = "four";
  CHECK_THROWS_AS(parse_experiment(doc), ConfigError);
}

TEST_CASE("scenario parsing") {
  nlohmann::json doc = {{"n_y", 4},  {"n_z", 4},           {"d_y", 0.05},        {"d_z", 0.05},     {"wavelength", 0.1},
                        {"kappa", "inf"}, {"snr_db", 0}, {"num_sources", 1}, {"num_snapshots", 20}, {"seed", 3},
                        {"range_max", 0.9}};
  const ScenarioConfig s = parse_scenario(doc);
  CHECK(std::isinf(s.prior.kappa));
  CHECK(s.prior.range_min == doctest::Approx(2 * s.prior.geom.aperture()));
  CHECK(to_json(s.prior)["kappa"] == "inf");
  doc.erase("seed");
  CHECK_THROWS_AS(parse_scenario(doc), ConfigError);
  doc["seed"] = 1;
  doc.erase("range_max");
  CHECK_THROWS_AS(parse_scenario(doc), ConfigError);  // default range prior is empty for 4x4
}
