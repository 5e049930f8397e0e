#include "nearfield/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "nearfield/errors.hpp"

namespace nearfield {

namespace {

constexpr const char* kMagic = "NFDATASET";
constexpr int kVersion = 1;

}  // namespace

void sort_canonical(std::vector<SourcePosition>& sources) {
  std::sort(sources.begin(), sources.end(), [](const SourcePosition& a, const SourcePosition& b) {
    if (a.azimuth != b.azimuth) return a.azimuth < b.azimuth;
    if (a.elevation != b.elevation) return a.elevation < b.elevation;
    return a.range < b.range;
  });
}

std::vector<SourcePosition> draw_sources(const ScenarioPrior& prior, Rng& rng) {
  std::vector<SourcePosition> sources;
  for (int k = 0; k < prior.num_sources; ++k) {
    const double az = rng.uniform(prior.azimuth_min, prior.azimuth_max);
    const double el = rng.uniform(prior.elevation_min, prior.elevation_max);
    const double r = rng.uniform(prior.range_min, prior.range_max);
    sources.push_back(SourcePosition::from_spherical(az, el, r));
  }
  sort_canonical(sources);
  return sources;
}

Scene simulate_scene(const ScenarioPrior& prior, const ChannelModel& channel, Rng& rng) {
  Scene scene;
  scene.sources = draw_sources(prior, rng);
  scene.batch = simulate_snapshots(prior.geom, scene.sources, channel, prior.num_snapshots, prior.snr_db, rng);
  scene.covariance = sample_covariance(scene.batch);
  scene.split = eigendecompose(scene.covariance);
  scene.split.signal_dim = prior.num_sources;
  return scene;
}

DatasetRecord make_record(const Scene& scene, std::uint64_t seed) {
  DatasetRecord record;
  const Tensor t = cnn_input_tensor(scene.split);
  record.input.assign(t.values().begin(), t.values().end());
  for (const SourcePosition& s : scene.sources) {
    record.labels.insert(record.labels.end(), {s.cartesian.x(), s.cartesian.y(), s.cartesian.z()});
  }
  record.seed = seed;
  return record;
}

Dataset generate_dataset(const ScenarioPrior& prior, std::size_t count, std::uint64_t master_seed) {
  prior.validate();
  if (count < 1) throw std::invalid_argument("dataset count must be at least 1");
  const ChannelModel channel = ChannelModel::isotropic(prior.geom, prior.kappa);
  Dataset dataset{prior, master_seed, {}};
  dataset.records.reserve(count);
  const Rng master(master_seed);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = master.split(i);
    const Scene scene = simulate_scene(prior, channel, rng);
    dataset.records.push_back(make_record(scene, rng.seed()));
  }
  return dataset;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  const std::size_t n = dataset.input_size();
  nlohmann::json header = {{"n", n},
                           {"k", dataset.prior.num_sources},
                           {"t", dataset.prior.num_snapshots},
                           {"count", dataset.records.size()},
                           {"master_seed", dataset.master_seed},
                           {"prior", to_json(dataset.prior)}};
  out << kMagic << ' ' << kVersion << '\n' << header.dump() << '\n';
  const std::size_t tensor_len = 2 * n * n;
  const std::size_t label_len = 3 * static_cast<std::size_t>(dataset.prior.num_sources);
  for (const DatasetRecord& r : dataset.records) {
    if (r.input.size() != tensor_len || r.labels.size() != label_len) {
      throw std::invalid_argument("dataset record does not match the header shape");
    }
    for (float v : r.input) detail::write_le(out, v);
    for (double v : r.labels) detail::write_le(out, v);
    detail::write_le(out, r.seed);
  }
  if (!out) throw std::runtime_error("failed writing dataset");
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_dataset(dataset, out);
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line)) throw FormatError("empty dataset file", 0);
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic) || magic != kMagic) throw FormatError("bad dataset magic '" + line.substr(0, 16) + "'", 0);
    if (!(ls >> version) || version != kVersion) {
      throw FormatError("unsupported dataset version in '" + line + "'", 0);
    }
  }
  offset += line.size() + 1;

  if (!std::getline(in, line)) throw FormatError("missing dataset header", offset);
  Dataset dataset;
  std::size_t n = 0, count = 0;
  try {
    const nlohmann::json header = nlohmann::json::parse(line);
    n = header.at("n").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    dataset.master_seed = header.at("master_seed").get<std::uint64_t>();
    nlohmann::json prior = header.at("prior");
    prior["seed"] = dataset.master_seed;
    dataset.prior = parse_scenario(prior).prior;
    if (header.at("k").get<int>() != dataset.prior.num_sources ||
        header.at("t").get<int>() != dataset.prior.num_snapshots ||
        n != static_cast<std::size_t>(dataset.prior.geom.size())) {
      throw FormatError("dataset header disagrees with its prior", offset);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what(), offset);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid prior in dataset header: ") + e.what(), offset);
  }
  offset += line.size() + 1;

  const std::size_t tensor_len = 2 * n * n;
  const std::size_t label_len = 3 * static_cast<std::size_t>(dataset.prior.num_sources);
  dataset.records.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    DatasetRecord& r = dataset.records[i];
    r.input.resize(tensor_len);
    r.labels.resize(label_len);
    for (float& v : r.input) {
      if (!detail::read_le(in, v)) throw FormatError("truncated dataset payload", offset + in.gcount(), i);
      offset += sizeof(float);
    }
    for (double& v : r.labels) {
      if (!detail::read_le(in, v)) throw FormatError("truncated dataset payload", offset + in.gcount(), i);
      offset += sizeof(double);
    }
    if (!detail::read_le(in, r.seed)) throw FormatError("truncated dataset payload", offset + in.gcount(), i);
    offset += sizeof(std::uint64_t);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after " + std::to_string(count) + " records", offset);
  }
  return dataset;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_dataset(in);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(dataset.size())));

  std::pair<Dataset, Dataset> out{Dataset{dataset.prior, dataset.master_seed, {}},
                                  Dataset{dataset.prior, dataset.master_seed, {}}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).records.push_back(dataset.records[order[i]]);
  }
  return out;
}

Tensor input_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t n = dataset.input_size();
  const std::size_t len = 2 * n * n;
  Tensor batch({indices.size(), 2, n, n});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const DatasetRecord& r = dataset.records.at(indices[b]);
    std::copy(r.input.begin(), r.input.end(), batch.data() + b * len);
  }
  return batch;
}

}  // namespace nearfield
