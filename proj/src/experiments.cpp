#include "nearfield/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "nearfield/dataset.hpp"
#include "nearfield/errors.hpp"
#include "nearfield/evaluation.hpp"
#include "nearfield/model_io.hpp"

namespace nearfield {

namespace {

template <typename T>
void optional_key(const nlohmann::json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment key '") + key + "' has the wrong type: " + e.what());
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

SearchGrid experiment_grid(const ExperimentConfig& c) {
  return grid_for_prior(c.scenario, c.grid.azimuth, c.grid.elevation, c.grid.range);
}

SubspaceSplit decompose_prefix(const SnapshotBatch& batch, int snapshots, int k) {
  SubspaceSplit split = eigendecompose(sample_covariance(CMatrix(batch.snapshots.leftCols(snapshots))));
  split.signal_dim = k;
  return split;
}

// One stream per trial: sources from split(0), snapshots from split(1). The
// snapshot stream is restarted for every kappa.
struct TrialStreams {
  std::vector<SourcePosition> sources;
  Rng snapshots;
};

TrialStreams trial_streams(const ExperimentConfig& c, std::uint64_t salt, std::size_t trial) {
  const Rng root = Rng(Rng::derive_seed(c.seed, salt)).split(trial);
  Rng src = root.split(0);
  return {draw_sources(c.scenario, src), root.split(1)};
}

void check_model(const ExperimentConfig& c, LocatorModel& model) {
  const Architecture& a = model.architecture();
  if (a.input_size != static_cast<std::size_t>(c.scenario.geom.size()) ||
      a.num_sources != static_cast<std::size_t>(c.scenario.num_sources)) {
    throw ConfigError("model expects N=" + std::to_string(a.input_size) + ", K=" + std::to_string(a.num_sources) +
                      " but the scenario has N=" + std::to_string(c.scenario.geom.size()) +
                      ", K=" + std::to_string(c.scenario.num_sources));
  }
}

constexpr std::uint64_t kRmseSalt = 1;
constexpr std::uint64_t kRuntimeSalt = 2;
constexpr std::uint64_t kScatterSalt = 3;

}  // namespace

void ExperimentConfig::validate() const {
  try {
    scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  if (snapshot_counts.empty()) throw ConfigError("snapshot_counts must not be empty");
  for (int t : snapshot_counts) {
    if (t < 1) throw ConfigError("snapshot counts must be at least 1");
  }
  if (kappas.empty()) throw ConfigError("kappas must not be empty");
  for (double k : kappas) {
    if (!(k >= 0.0)) throw ConfigError("kappa must be non-negative");
  }
  if (test_size < 1) throw ConfigError("test_size must be at least 1");
  if (grid.azimuth < 1 || grid.elevation < 1 || grid.range < 1) throw ConfigError("grid sizes must be positive");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (num_realizations < 1) throw ConfigError("realizations must be at least 1");
  if (scatter_snapshots < 1) throw ConfigError("scatter snapshots must be at least 1");
}

ExperimentConfig parse_experiment(const nlohmann::json& doc) {
  ExperimentConfig c;
  const ScenarioConfig s = parse_scenario(doc);
  c.scenario = s.prior;
  c.seed = s.seed;
  optional_key(doc, "snapshot_counts", c.snapshot_counts);
  optional_key(doc, "kappas", c.kappas);
  optional_key(doc, "test_size", c.test_size);
  std::string model;
  optional_key(doc, "model", model);
  if (!model.empty()) c.model_path = model;
  optional_key(doc, "grid_azimuth", c.grid.azimuth);
  optional_key(doc, "grid_elevation", c.grid.elevation);
  optional_key(doc, "grid_range", c.grid.range);
  optional_key(doc, "repeats", c.repeats);
  optional_key(doc, "threads", c.threads);
  optional_key(doc, "realizations", c.num_realizations);
  optional_key(doc, "scatter_kappa", c.scatter_kappa);
  optional_key(doc, "scatter_snapshots", c.scatter_snapshots);
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment(doc);
}

LocatorModel load_experiment_model(const ExperimentConfig& config) {
  if (config.model_path.empty()) throw ConfigError("no model given");
  if (!std::filesystem::exists(config.model_path)) {
    throw ConfigError("model file " + config.model_path.string() + " does not exist");
  }
  LocatorModel model = read_model(config.model_path);
  check_model(config, model);
  return model;
}

const RmseRow& RmseReport::find(Method method, double kappa, int snapshots) const {
  for (const RmseRow& r : rows) {
    if (r.method == method && r.kappa == kappa && r.snapshots == snapshots) return r;
  }
  throw std::out_of_range("no RMSE row for the requested cell");
}

const RuntimeRow& RuntimeReport::find(const std::string& method, int snapshots) const {
  for (const RuntimeRow& r : rows) {
    if (r.method == method && r.snapshots == snapshots) return r;
  }
  throw std::out_of_range("no runtime row for " + method);
}

RmseReport run_rmse_experiment(const ExperimentConfig& c, LocatorModel& model) {
  c.validate();
  check_model(c, model);
  const SearchGrid grid = experiment_grid(c);
  const SteeringCache cache(c.scenario.geom, grid);
  const MusicOptions options{&cache, c.threads};
  const int t_max = *std::max_element(c.snapshot_counts.begin(), c.snapshot_counts.end());
  const int k = c.scenario.num_sources;

  // trials[kappa][T][method]
  std::vector<std::vector<std::array<std::vector<Trial>, 2>>> trials(
      c.kappas.size(), std::vector<std::array<std::vector<Trial>, 2>>(c.snapshot_counts.size()));
  for (std::size_t l = 0; l < c.test_size; ++l) {
    const TrialStreams streams = trial_streams(c, kRmseSalt, l);
    const std::vector<Vec3> truths = cartesian_of(streams.sources);
    for (std::size_t ki = 0; ki < c.kappas.size(); ++ki) {
      const ChannelModel channel = ChannelModel::isotropic(c.scenario.geom, c.kappas[ki]);
      Rng rng = streams.snapshots;
      const SnapshotBatch batch =
          simulate_snapshots(c.scenario.geom, streams.sources, channel, t_max, c.scenario.snr_db, rng);
      for (std::size_t ti = 0; ti < c.snapshot_counts.size(); ++ti) {
        const SubspaceSplit split = decompose_prefix(batch, c.snapshot_counts[ti], k);
        const MusicResult music = estimate_locations_music(split, k, grid, c.scenario.geom, options);
        const LocationEstimate cnn = predict(model, split);
        trials[ki][ti][0].push_back({truths, cartesian_of(music.estimate.positions)});
        trials[ki][ti][1].push_back({truths, cartesian_of(cnn.positions)});
      }
    }
  }

  RmseReport report;
  for (Method m : {Method::Music, Method::Cnn}) {
    const std::size_t mi = m == Method::Music ? 0 : 1;
    for (std::size_t ki = 0; ki < c.kappas.size(); ++ki) {
      for (std::size_t ti = 0; ti < c.snapshot_counts.size(); ++ti) {
        report.rows.push_back({m, c.kappas[ki], c.snapshot_counts[ti], rmse(trials[ki][ti][mi]), c.test_size});
      }
    }
  }
  return report;
}

RuntimeReport run_runtime_benchmark(const ExperimentConfig& c, LocatorModel& model) {
  c.validate();
  check_model(c, model);
  const SearchGrid grid = experiment_grid(c);
  const MusicOptions options{nullptr, 1};
  const int k = c.scenario.num_sources;
  const int t_max = *std::max_element(c.snapshot_counts.begin(), c.snapshot_counts.end());
  const ChannelModel channel = ChannelModel::isotropic(c.scenario.geom, c.scenario.kappa);

  std::vector<SnapshotBatch> batches;
  for (std::size_t l = 0; l < c.test_size; ++l) {
    TrialStreams streams = trial_streams(c, kRuntimeSalt, l);
    batches.push_back(
        simulate_snapshots(c.scenario.geom, streams.sources, channel, t_max, c.scenario.snr_db, streams.snapshots));
  }

  RuntimeReport report;
  for (int t : c.snapshot_counts) {
    std::vector<double> music_times, cnn_times, eigen_times;
    for (const SnapshotBatch& batch : batches) {
      std::vector<double> music_runs, cnn_runs, eigen_runs;
      SubspaceSplit split;
      for (int rep = 0; rep < c.repeats; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        split = decompose_prefix(batch, t, k);
        eigen_runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      for (int rep = 0; rep < c.repeats; ++rep) {
        music_runs.push_back(estimate_locations_music(split, k, grid, c.scenario.geom, options).estimate.elapsed_seconds);
        cnn_runs.push_back(predict(model, split).elapsed_seconds);
      }
      music_times.push_back(median(music_runs));
      cnn_times.push_back(median(cnn_runs));
      eigen_times.push_back(median(eigen_runs));
    }
    for (auto [name, times] : {std::pair<const char*, const std::vector<double>*>{"music", &music_times},
                               {"cnn", &cnn_times},
                               {"eigen", &eigen_times}}) {
      const auto [mean, sd] = mean_std(*times);
      report.rows.push_back({name, t, mean, sd, times->size()});
    }
  }
  return report;
}

std::vector<ScatterRow> scatter_report(const ExperimentConfig& c, LocatorModel& model) {
  c.validate();
  check_model(c, model);
  const SearchGrid grid = experiment_grid(c);
  const SteeringCache cache(c.scenario.geom, grid);
  const MusicOptions options{&cache, c.threads};
  const int k = c.scenario.num_sources;
  const ChannelModel channel = ChannelModel::isotropic(c.scenario.geom, c.scatter_kappa);

  std::vector<ScatterRow> rows;
  for (std::size_t l = 0; l < c.num_realizations; ++l) {
    TrialStreams streams = trial_streams(c, kScatterSalt, l);
    const SnapshotBatch batch = simulate_snapshots(c.scenario.geom, streams.sources, channel, c.scatter_snapshots,
                                                   c.scenario.snr_db, streams.snapshots);
    const SubspaceSplit split = decompose_prefix(batch, c.scatter_snapshots, k);
    const std::vector<Vec3> truths = cartesian_of(streams.sources);
    const std::vector<Vec3> music =
        cartesian_of(estimate_locations_music(split, k, grid, c.scenario.geom, options).estimate.positions);
    const std::vector<Vec3> cnn = cartesian_of(predict(model, split).positions);
    const Assignment music_match = match_sources(music, truths);
    const Assignment cnn_match = match_sources(cnn, truths);
    for (std::size_t s = 0; s < truths.size(); ++s) {
      rows.push_back({l, s, truths[s], music[music_match.perm[s]], cnn[cnn_match.perm[s]]});
    }
  }
  return rows;
}

namespace {

std::string xyz(const Vec3& v) {
  return detail::format_double(v.x()) + ',' + detail::format_double(v.y()) + ',' + detail::format_double(v.z());
}

}  // namespace

std::string to_csv(const RmseReport& report) {
  std::string out = "method,kappa,snapshots,rmse_m,trials\n";
  for (const RmseRow& r : report.rows) {
    out += to_string(r.method) + ',' + detail::format_double(r.kappa) + ',' + std::to_string(r.snapshots) + ',' +
           detail::format_double(r.rmse) + ',' + std::to_string(r.trials) + '\n';
  }
  return out;
}

std::string to_csv(const RuntimeReport& report) {
  std::string out = "method,snapshots,mean_s,std_s,samples\n";
  for (const RuntimeRow& r : report.rows) {
    out += r.method + ',' + std::to_string(r.snapshots) + ',' + detail::format_double(r.mean_seconds) + ',' +
           detail::format_double(r.std_seconds) + ',' + std::to_string(r.samples) + '\n';
  }
  return out;
}

std::string to_csv(const std::vector<ScatterRow>& rows) {
  std::string out =
      "realization,source,truth_x,truth_y,truth_z,music_x,music_y,music_z,cnn_x,cnn_y,cnn_z\n";
  for (const ScatterRow& r : rows) {
    out += std::to_string(r.realization) + ',' + std::to_string(r.source) + ',' + xyz(r.truth) + ',' + xyz(r.music) +
           ',' + xyz(r.cnn) + '\n';
  }
  return out;
}

}  // namespace nearfield
