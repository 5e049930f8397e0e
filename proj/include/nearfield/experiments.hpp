#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nearfield/model.hpp"
#include "nearfield/music.hpp"
#include "nearfield/scenario.hpp"

namespace nearfield {

struct GridSpec {
  int azimuth = 60;
  int elevation = 60;
  int range = 60;
};

struct ExperimentConfig {
  ScenarioPrior scenario;
  std::vector<int> snapshot_counts{25, 50, 75, 100};
  std::vector<double> kappas{4.0, 8.0};
  std::size_t test_size = 50;
  std::filesystem::path model_path;
  GridSpec grid;
  std::filesystem::path output_dir = ".";
  std::uint64_t seed = 0;
  /// Timing repeats per sample; the median is kept.
  int repeats = 10;
  int threads = 1;
  std::size_t num_realizations = 12;
  double scatter_kappa = 4.0;
  int scatter_snapshots = 25;

  /// Throws ConfigError.
  void validate() const;
};

/// Reads a flat JSON document: scenario keys as in parse_scenario plus optional
/// snapshot_counts, kappas, test_size, model, grid_azimuth/elevation/range,
/// repeats, threads, realizations, scatter_kappa, scatter_snapshots.
ExperimentConfig parse_experiment(const nlohmann::json& doc);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Loads config.model_path and checks it fits the scenario. Missing or
/// mismatched models are configuration errors.
LocatorModel load_experiment_model(const ExperimentConfig& config);

struct RmseRow {
  Method method = Method::Music;
  double kappa = 0.0;
  int snapshots = 0;
  double rmse = 0.0;
  std::size_t trials = 0;
};

struct RmseReport {
  std::vector<RmseRow> rows;
  const RmseRow& find(Method method, double kappa, int snapshots) const;
};

/// Trial l uses one source draw for every (kappa, T); the channel, symbol
/// and noise streams are shared across kappa and each T takes the first T
/// snapshots of one stream. MUSIC and the CNN see the same covariance.
RmseReport run_rmse_experiment(const ExperimentConfig& config, LocatorModel& model);

struct RuntimeRow {
  std::string method;  // music, cnn or eigen (shared preprocessing)
  int snapshots = 0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  std::size_t samples = 0;
};

struct RuntimeReport {
  std::vector<RuntimeRow> rows;
  const RuntimeRow& find(const std::string& method, int snapshots) const;
};

/// Per T and sample, the median of config.repeats timed runs; rows give the
/// mean and standard deviation of those medians. Simulation is not timed.
RuntimeReport run_runtime_benchmark(const ExperimentConfig& config, LocatorModel& model);

struct ScatterRow {
  std::size_t realization = 0;
  std::size_t source = 0;
  Vec3 truth;
  Vec3 music;
  Vec3 cnn;
};

/// Estimates matched to truths per realization, at scatter_kappa and scatter_snapshots.
std::vector<ScatterRow> scatter_report(const ExperimentConfig& config, LocatorModel& model);

std::string to_csv(const RmseReport& report);
std::string to_csv(const RuntimeReport& report);
std::string to_csv(const std::vector<ScatterRow>& rows);

}  // namespace nearfield
