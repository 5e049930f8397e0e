#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "nearfield/dataset.hpp"
#include "nearfield/errors.hpp"
#include "nearfield/evaluation.hpp"
#include "nearfield/experiments.hpp"
#include "nearfield/model_io.hpp"
#include "nearfield/music.hpp"
#include "nearfield/training.hpp"

namespace fs = std::filesystem;
using namespace nearfield;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitDiverged = 4;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

fs::path in_out_dir(const Globals& g, const std::string& name) {
  const fs::path p(name);
  if (p.is_absolute() || p.has_parent_path()) return p;
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

ScenarioConfig require_scenario(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config <scenario file> is required");
  ScenarioConfig s = load_scenario(g.config);
  if (g.seed) s.seed = *g.seed;
  return s;
}

ExperimentConfig require_experiment(const Globals& g, const std::string& model) {
  if (g.config.empty()) throw ConfigError("--config <experiment file> is required");
  ExperimentConfig c = load_experiment(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!model.empty()) c.model_path = model;
  c.output_dir = g.out_dir;
  return c;
}

std::string xyz(const Vec3& v) {
  std::ostringstream s;
  s.precision(17);
  s << v.x() << ',' << v.y() << ',' << v.z();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field source localization: simulation, MUSIC, CNN locator and benchmarks"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "Scenario or experiment JSON file");
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs given as bare file names");

  // generate
  auto* gen = app.add_subcommand("generate", "Simulate a labeled dataset");
  gen->fallthrough();
  std::size_t gen_count = 0;
  std::string gen_out = "dataset.nfd";
  gen->add_option("--count", gen_count, "Number of samples")->required();
  gen->add_option("--out", gen_out, "Dataset file");

  // train
  auto* tr = app.add_subcommand("train", "Train the CNN locator");
  tr->fallthrough();
  std::string tr_dataset, tr_preset = "desk", tr_out = "model.nfm", tr_activation = "linear", tr_log;
  TrainingConfig tcfg;
  tr->add_option("--dataset", tr_dataset, "Training dataset file")->required();
  tr->add_option("--preset", tr_preset, "Architecture preset")->check(CLI::IsMember({"paper", "desk"}));
  tr->add_option("--epochs", tcfg.epochs, "Epochs");
  tr->add_option("--lr", tcfg.learning_rate, "Learning rate");
  tr->add_option("--batch", tcfg.batch_size, "Mini-batch size");
  tr->add_option("--weight-decay", tcfg.weight_decay, "Decoupled weight decay");
  tr->add_option("--activation", tr_activation, "Output activation")->check(CLI::IsMember({"linear", "softmax"}));
  tr->add_option("--out", tr_out, "Model file");
  tr->add_option("--log", tr_log, "Also write the run log here");

  // music
  auto* mu = app.add_subcommand("music", "Simulate one scene and localize it with 3D MUSIC");
  mu->fallthrough();
  int grid_az = 60, grid_el = 60, grid_r = 60, mu_threads = 1;
  std::optional<double> range_min, range_max;
  std::string spectrum_out;
  mu->add_option("--grid-az", grid_az, "Azimuth nodes");
  mu->add_option("--grid-el", grid_el, "Elevation nodes");
  mu->add_option("--grid-range", grid_r, "Range nodes");
  mu->add_option("--range-min", range_min, "Range prior lower bound (m)");
  mu->add_option("--range-max", range_max, "Range prior upper bound (m)");
  mu->add_option("--threads", mu_threads, "Spectrum worker threads");
  mu->add_option("--spectrum-out", spectrum_out, "Write the pseudospectrum here");

  // predict
  auto* pr = app.add_subcommand("predict", "Run a trained model on a dataset");
  pr->fallthrough();
  std::string pr_model, pr_dataset, pr_out = "predictions.csv";
  pr->add_option("--model", pr_model, "Model file")->required();
  pr->add_option("--dataset", pr_dataset, "Dataset file")->required();
  pr->add_option("--out", pr_out, "CSV output");

  // experiments
  std::string sweep_model, bench_model, scatter_model;
  std::optional<std::size_t> realizations;
  auto* sw = app.add_subcommand("rmse-sweep", "RMSE against snapshot count for both methods");
  sw->fallthrough();
  sw->add_option("--model", sweep_model, "Model file (overrides the config)");
  auto* rb = app.add_subcommand("runtime-bench", "Per-sample runtime of both methods");
  rb->fallthrough();
  rb->add_option("--model", bench_model, "Model file (overrides the config)");
  auto* sc = app.add_subcommand("scatter", "True and estimated positions over random realizations");
  sc->fallthrough();
  sc->add_option("--model", scatter_model, "Model file (overrides the config)");
  sc->add_option("--realizations", realizations, "Number of realizations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*gen) {
      const ScenarioConfig s = require_scenario(g);
      const Dataset d = generate_dataset(s.prior, gen_count, s.seed);
      const fs::path out = in_out_dir(g, gen_out);
      write_dataset(d, out);
      std::cout << "wrote " << d.size() << " records to " << out.string() << '\n';
    } else if (*tr) {
      const Dataset d = read_dataset(fs::path(tr_dataset));
      if (g.seed) tcfg.seed = *g.seed;
      Architecture arch = tr_preset == "paper" ? paper_architecture(d.input_size(), d.prior.num_sources)
                                               : desk_architecture(d.input_size(), d.prior.num_sources);
      arch.output_activation = parse_output_activation(tr_activation);
      std::ofstream log_file;
      if (!tr_log.empty()) log_file.open(in_out_dir(g, tr_log));
      auto emit = [&](const std::string& line) {
        std::cout << line << '\n' << std::flush;
        if (log_file) log_file << line << '\n' << std::flush;
      };
      emit(format_config_log(arch, tcfg));
      Rng rng(tcfg.seed);
      TrainResult result = train(d, arch, tcfg, rng, [&](const EpochRecord& r) { emit(format_epoch_log(r)); });
      const fs::path out = in_out_dir(g, tr_out);
      write_model(result.model, out);
      std::cout << "wrote model to " << out.string() << '\n';
    } else if (*mu) {
      ScenarioConfig s = require_scenario(g);
      if (range_min) s.prior.range_min = *range_min;
      if (range_max) s.prior.range_max = *range_max;
      try {
        s.prior.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid scenario: ") + e.what());
      }
      Rng rng(s.seed);
      const ChannelModel channel = ChannelModel::isotropic(s.prior.geom, s.prior.kappa);
      const Scene scene = simulate_scene(s.prior, channel, rng);
      const SearchGrid grid = grid_for_prior(s.prior, grid_az, grid_el, grid_r);
      const SignalNoiseBases bases = split_subspaces(scene.split, s.prior.num_sources);
      const MusicOptions options{nullptr, mu_threads};
      const MusicSpectrum spectrum = compute_spectrum(bases.noise, grid, s.prior.geom, options);
      const MusicResult r = estimate_locations_music(scene.split, s.prior.num_sources, grid, s.prior.geom, options);
      if (!spectrum_out.empty()) write_spectrum(spectrum, in_out_dir(g, spectrum_out));
      const Assignment match = match_sources(r.estimate.positions, scene.sources);
      std::cout << "source,truth_x,truth_y,truth_z,music_x,music_y,music_z\n";
      for (std::size_t i = 0; i < scene.sources.size(); ++i) {
        std::cout << i << ',' << xyz(scene.sources[i].cartesian) << ','
                  << xyz(r.estimate.positions[match.perm[i]].cartesian) << '\n';
      }
      std::cerr << "music seconds=" << r.estimate.elapsed_seconds << (r.peaks.degenerate ? " degenerate" : "")
                << '\n';
    } else if (*pr) {
      LocatorModel model = read_model(fs::path(pr_model));
      const Dataset d = read_dataset(fs::path(pr_dataset));
      if (d.input_size() != model.architecture().input_size ||
          static_cast<std::size_t>(d.prior.num_sources) != model.architecture().num_sources) {
        throw ConfigError("model and dataset shapes differ");
      }
      std::string csv = "record,source,truth_x,truth_y,truth_z,cnn_x,cnn_y,cnn_z\n";
      std::vector<Trial> trials;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const std::size_t idx[] = {i};
        const Tensor out = model_forward(model, input_batch(d, idx), Mode::Infer);
        const std::vector<SourcePosition> est = outputs_to_sources(model.scaler(), out.values());
        Trial t;
        for (std::size_t k = 0; k < est.size(); ++k) {
          const std::vector<double>& lab = d.records[i].labels;
          const Vec3 truth(lab[3 * k], lab[3 * k + 1], lab[3 * k + 2]);
          t.truths.push_back(truth);
          t.estimates.push_back(est[k].cartesian);
          csv += std::to_string(i) + ',' + std::to_string(k) + ',' + xyz(truth) + ',' + xyz(est[k].cartesian) + '\n';
        }
        trials.push_back(std::move(t));
      }
      write_text(in_out_dir(g, pr_out), csv);
      std::cout << "rmse_m=" << rmse(trials) << '\n';
    } else if (*sw) {
      const ExperimentConfig c = require_experiment(g, sweep_model);
      LocatorModel model = load_experiment_model(c);
      const std::string csv = to_csv(run_rmse_experiment(c, model));
      write_text(in_out_dir(g, "rmse.csv"), csv);
      std::cout << csv;
    } else if (*rb) {
      const ExperimentConfig c = require_experiment(g, bench_model);
      LocatorModel model = load_experiment_model(c);
      const std::string csv = to_csv(run_runtime_benchmark(c, model));
      write_text(in_out_dir(g, "runtime.csv"), csv);
      std::cout << csv;
    } else if (*sc) {
      ExperimentConfig c = require_experiment(g, scatter_model);
      if (realizations) c.num_realizations = *realizations;
      LocatorModel model = load_experiment_model(c);
      const std::string csv = to_csv(scatter_report(c, model));
      write_text(in_out_dir(g, "scatter.csv"), csv);
      std::cout << csv;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
