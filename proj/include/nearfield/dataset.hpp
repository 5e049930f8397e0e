#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "nearfield/array_model.hpp"
#include "nearfield/scenario.hpp"
#include "nearfield/subspace.hpp"
#include "nearfield/tensor.hpp"

namespace nearfield {

/// One labeled sample: the 2 x N x N eigenvector tensor (stored at single
/// precision) and 3K Cartesian labels in meters, canonical source order.
struct DatasetRecord {
  std::vector<float> input;
  std::vector<double> labels;
  std::uint64_t seed = 0;

  bool operator==(const DatasetRecord&) const = default;
};

struct Dataset {
  ScenarioPrior prior;
  std::uint64_t master_seed = 0;
  std::vector<DatasetRecord> records;

  std::size_t size() const { return records.size(); }
  std::size_t input_size() const { return static_cast<std::size_t>(prior.geom.size()); }
};

/// Sorts by ascending azimuth, then elevation, then range.
void sort_canonical(std::vector<SourcePosition>& sources);

/// K positions drawn independently and uniformly from the prior, sorted canonically.
std::vector<SourcePosition> draw_sources(const ScenarioPrior& prior, Rng& rng);

/// Everything derived from one simulated scene.
struct Scene {
  std::vector<SourcePosition> sources;
  SnapshotBatch batch;
  SampleCovariance covariance;
  SubspaceSplit split;
};

/// Draws sources, simulates the snapshots and decomposes the covariance.
Scene simulate_scene(const ScenarioPrior& prior, const ChannelModel& channel, Rng& rng);

DatasetRecord make_record(const Scene& scene, std::uint64_t seed);

/// Sample i uses the stream Rng(master_seed).split(i).
Dataset generate_dataset(const ScenarioPrior& prior, std::size_t count, std::uint64_t master_seed);

/// Magic line, a JSON header line (N, K, T, count, seed, prior), then per
/// record little-endian float32 tensor, float64 labels and uint64 seed.
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// Throws FormatError with the byte offset (and record index) of the failure.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

/// Seeded shuffle, then the first round(fraction * count) records train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// (B, 2, N, N) tensor of the selected records' inputs.
Tensor input_batch(const Dataset& dataset, std::span<const std::size_t> indices);

}  // namespace nearfield
