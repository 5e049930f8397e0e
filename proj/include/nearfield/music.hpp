#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "nearfield/array_model.hpp"
#include "nearfield/scenario.hpp"
#include "nearfield/subspace.hpp"

namespace nearfield {

/// Strictly increasing (azimuth, elevation, range) axes of the 3D search.
struct SearchGrid {
  std::vector<double> azimuth;
  std::vector<double> elevation;
  std::vector<double> range;

  /// Inclusive linspace axes. A count of 1 places the single node at lo.
  static SearchGrid uniform(std::array<double, 2> azimuth_bounds, int n_azimuth,
                            std::array<double, 2> elevation_bounds, int n_elevation,
                            std::array<double, 2> range_bounds, int n_range);
  /// Axes starting at the prior's lower bounds with fixed steps, the layout
  /// of a 0.6 degree / 1 cm search with 200 nodes per axis.
  static SearchGrid stepped(const ScenarioPrior& prior, double angle_step, double range_step, int count);

  void validate() const;
  std::size_t cells() const { return azimuth.size() * elevation.size() * range.size(); }
  std::size_t flat_index(std::size_t az, std::size_t el, std::size_t r) const {
    return (az * elevation.size() + el) * range.size() + r;
  }
  SourcePosition position(std::size_t az, std::size_t el, std::size_t r) const {
    return SourcePosition::from_spherical(azimuth[az], elevation[el], range[r]);
  }
};

/// Grid over the prior box with the given node counts per axis.
SearchGrid grid_for_prior(const ScenarioPrior& prior, int n_azimuth, int n_elevation, int n_range);

struct MusicSpectrum {
  SearchGrid grid;
  /// Azimuth-major, then elevation, then range.
  std::vector<double> values;

  double at(std::size_t az, std::size_t el, std::size_t r) const { return values[grid.flat_index(az, el, r)]; }
};

/// Precomputed steering vectors for every node of a grid (N x cells).
class SteeringCache {
 public:
  SteeringCache(const ArrayGeometry& geom, const SearchGrid& grid);
  const std::complex<double>* column(std::size_t flat) const { return vectors_.data() + flat * n_; }
  std::size_t antennas() const { return n_; }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> vectors_;
};

struct MusicOptions {
  /// Reuse steering vectors across calls; must be built for the same grid.
  const SteeringCache* cache = nullptr;
  /// Worker threads for spectrum evaluation. Output is identical for any count.
  int threads = 1;
};

/// 1 / ||U_n^H a||^2 with the denominator floored at 1e-12 N.
double pseudospectrum_value(const CMatrix& noise_subspace, const CVector& steering);

MusicSpectrum compute_spectrum(const CMatrix& noise_subspace, const SearchGrid& grid, const ArrayGeometry& geom,
                               const MusicOptions& options = {});

struct GridCell {
  std::size_t azimuth = 0;
  std::size_t elevation = 0;
  std::size_t range = 0;
  bool operator==(const GridCell&) const = default;
};

struct PeakSelection {
  /// Accepted cells in descending spectrum order.
  std::vector<GridCell> cells;
  /// Set when fewer than k separable local maxima were found.
  bool degenerate = false;
};

/// Greedy selection: take the largest unsuppressed value, then suppress the
/// +/-2 node box around it on every axis; repeat k times.
PeakSelection find_peaks(const MusicSpectrum& spectrum, int k);

enum class Method { Music, Cnn };
std::string to_string(Method method);

struct LocationEstimate {
  std::vector<SourcePosition> positions;
  Method method = Method::Music;
  double elapsed_seconds = 0.0;
};

struct MusicResult {
  LocationEstimate estimate;
  PeakSelection peaks;
};

/// Spectrum + peaks on an existing decomposition. elapsed_seconds covers the
/// spectrum and peak search only.
MusicResult estimate_locations_music(const SubspaceSplit& split, int k, const SearchGrid& grid,
                                     const ArrayGeometry& geom, const MusicOptions& options = {});
MusicResult estimate_locations_music(const SampleCovariance& cov, int k, const SearchGrid& grid,
                                     const ArrayGeometry& geom, const MusicOptions& options = {});

/// Text header (axis lengths and values) followed by little-endian float64
/// spectrum values in azimuth-major order.
void write_spectrum(const MusicSpectrum& spectrum, const std::filesystem::path& path);
MusicSpectrum read_spectrum(const std::filesystem::path& path);

}  // namespace nearfield
