#include "nearfield/music.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "binary_io.hpp"
#include "nearfield/errors.hpp"

namespace nearfield {

namespace {

constexpr int kExclusion = 2;
constexpr const char* kSpectrumMagic = "NFSPECTRUM";
constexpr int kSpectrumVersion = 1;

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("grid axis needs at least one node");
  std::vector<double> axis(static_cast<std::size_t>(count));
  if (count == 1) {
    axis[0] = lo;
    return axis;
  }
  const double step = (hi - lo) / (count - 1);
  for (int i = 0; i < count; ++i) axis[i] = lo + step * i;
  axis.back() = hi;
  return axis;
}

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw std::invalid_argument(std::string(name) + " axis is empty");
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) throw std::invalid_argument(std::string(name) + " axis is not strictly increasing");
  }
}

// ||U_n^H a||^2 floored; shared by the single-point and grid paths so both
// produce identical bits.
double projection_energy_inverse(const Eigen::Ref<const CMatrix>& noise_adjoint, const std::complex<double>* a,
                                 Eigen::Ref<CVector> scratch) {
  const Eigen::Index n = noise_adjoint.cols();
  Eigen::Map<const CVector> steering(a, n);
  scratch.noalias() = noise_adjoint * steering;
  const double floor = 1e-12 * static_cast<double>(n);
  return 1.0 / std::max(scratch.squaredNorm(), floor);
}

bool is_local_maximum(const MusicSpectrum& s, const GridCell& c) {
  const double v = s.at(c.azimuth, c.elevation, c.range);
  const auto& g = s.grid;
  for (int da = -1; da <= 1; ++da) {
    for (int de = -1; de <= 1; ++de) {
      for (int dr = -1; dr <= 1; ++dr) {
        if (!da && !de && !dr) continue;
        const long a = static_cast<long>(c.azimuth) + da;
        const long e = static_cast<long>(c.elevation) + de;
        const long r = static_cast<long>(c.range) + dr;
        if (a < 0 || e < 0 || r < 0 || a >= static_cast<long>(g.azimuth.size()) ||
            e >= static_cast<long>(g.elevation.size()) || r >= static_cast<long>(g.range.size())) {
          continue;
        }
        if (s.at(a, e, r) > v) return false;
      }
    }
  }
  return true;
}

}  // namespace

SearchGrid SearchGrid::uniform(std::array<double, 2> az, int n_az, std::array<double, 2> el, int n_el,
                               std::array<double, 2> r, int n_r) {
  SearchGrid g{linspace(az[0], az[1], n_az), linspace(el[0], el[1], n_el), linspace(r[0], r[1], n_r)};
  g.validate();
  return g;
}

SearchGrid SearchGrid::stepped(const ScenarioPrior& prior, double angle_step, double range_step, int count) {
  if (count < 1 || !(angle_step > 0.0) || !(range_step > 0.0)) throw std::invalid_argument("invalid stepped grid");
  SearchGrid g;
  for (int i = 0; i < count; ++i) {
    g.azimuth.push_back(prior.azimuth_min + angle_step * i);
    g.elevation.push_back(prior.elevation_min + angle_step * i);
    g.range.push_back(prior.range_min + range_step * i);
  }
  g.validate();
  return g;
}

void SearchGrid::validate() const {
  check_axis(azimuth, "azimuth");
  check_axis(elevation, "elevation");
  check_axis(range, "range");
  if (!(range.front() > 0.0)) throw std::invalid_argument("range axis must be positive");
}

SearchGrid grid_for_prior(const ScenarioPrior& prior, int n_azimuth, int n_elevation, int n_range) {
  return SearchGrid::uniform({prior.azimuth_min, prior.azimuth_max}, n_azimuth,
                             {prior.elevation_min, prior.elevation_max}, n_elevation,
                             {prior.range_min, prior.range_max}, n_range);
}

SteeringCache::SteeringCache(const ArrayGeometry& geom, const SearchGrid& grid)
    : n_(static_cast<std::size_t>(geom.size())), vectors_(n_ * grid.cells()) {
  grid.validate();
  for (std::size_t a = 0; a < grid.azimuth.size(); ++a) {
    for (std::size_t e = 0; e < grid.elevation.size(); ++e) {
      for (std::size_t r = 0; r < grid.range.size(); ++r) {
        steering_vector_into(geom, grid.position(a, e, r), vectors_.data() + grid.flat_index(a, e, r) * n_);
      }
    }
  }
}

double pseudospectrum_value(const CMatrix& noise_subspace, const CVector& steering) {
  if (noise_subspace.rows() != steering.size()) throw std::invalid_argument("steering length mismatch");
  const CMatrix adjoint = noise_subspace.adjoint();
  CVector scratch(noise_subspace.cols());
  return projection_energy_inverse(adjoint, steering.data(), scratch);
}

MusicSpectrum compute_spectrum(const CMatrix& noise_subspace, const SearchGrid& grid, const ArrayGeometry& geom,
                               const MusicOptions& options) {
  grid.validate();
  const auto n = static_cast<std::size_t>(geom.size());
  if (static_cast<std::size_t>(noise_subspace.rows()) != n) {
    throw std::invalid_argument("noise subspace rows do not match the array size");
  }
  if (options.cache && options.cache->antennas() != n) throw std::invalid_argument("steering cache size mismatch");

  MusicSpectrum spectrum{grid, std::vector<double>(grid.cells())};
  const CMatrix adjoint = noise_subspace.adjoint();

  auto evaluate_slices = [&](std::size_t az_begin, std::size_t az_end) {
    CVector scratch(noise_subspace.cols());
    std::vector<std::complex<double>> buffer(n);
    for (std::size_t a = az_begin; a < az_end; ++a) {
      for (std::size_t e = 0; e < grid.elevation.size(); ++e) {
        for (std::size_t r = 0; r < grid.range.size(); ++r) {
          const std::size_t flat = grid.flat_index(a, e, r);
          const std::complex<double>* steering = nullptr;
          if (options.cache) {
            steering = options.cache->column(flat);
          } else {
            steering_vector_into(geom, grid.position(a, e, r), buffer.data());
            steering = buffer.data();
          }
          spectrum.values[flat] = projection_energy_inverse(adjoint, steering, scratch);
        }
      }
    }
  };

  const std::size_t n_az = grid.azimuth.size();
  const auto threads = static_cast<std::size_t>(std::clamp(options.threads, 1, static_cast<int>(n_az)));
  if (threads == 1) {
    evaluate_slices(0, n_az);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back(evaluate_slices, n_az * t / threads, n_az * (t + 1) / threads);
    }
  }
  return spectrum;
}

PeakSelection find_peaks(const MusicSpectrum& spectrum, int k) {
  const auto& g = spectrum.grid;
  if (k < 1) throw std::invalid_argument("peak count must be positive");
  if (g.cells() < static_cast<std::size_t>(k)) throw std::invalid_argument("grid has fewer cells than requested peaks");

  std::vector<char> suppressed(g.cells(), 0);
  std::vector<char> accepted(g.cells(), 0);
  PeakSelection result;
  auto cell_of = [&](std::size_t flat) {
    const std::size_t r = flat % g.range.size();
    const std::size_t e = (flat / g.range.size()) % g.elevation.size();
    const std::size_t a = flat / (g.range.size() * g.elevation.size());
    return GridCell{a, e, r};
  };
  auto best_cell = [&](bool honour_suppression) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < g.cells(); ++i) {
      if (accepted[i] || (honour_suppression && suppressed[i])) continue;
      if (!best || spectrum.values[i] > spectrum.values[*best]) best = i;
    }
    return best;
  };

  for (int pick = 0; pick < k; ++pick) {
    std::optional<std::size_t> flat = best_cell(true);
    if (!flat) {
      result.degenerate = true;
      flat = best_cell(false);
    }
    accepted[*flat] = 1;
    const GridCell c = cell_of(*flat);
    result.cells.push_back(c);
    if (!is_local_maximum(spectrum, c)) result.degenerate = true;

    const auto lo = [](std::size_t v) { return v >= kExclusion ? v - kExclusion : 0; };
    const auto hi = [](std::size_t v, std::size_t size) { return std::min(v + kExclusion, size - 1); };
    for (std::size_t a = lo(c.azimuth); a <= hi(c.azimuth, g.azimuth.size()); ++a) {
      for (std::size_t e = lo(c.elevation); e <= hi(c.elevation, g.elevation.size()); ++e) {
        for (std::size_t r = lo(c.range); r <= hi(c.range, g.range.size()); ++r) suppressed[g.flat_index(a, e, r)] = 1;
      }
    }
  }
  return result;
}

std::string to_string(Method method) { return method == Method::Music ? "music" : "cnn"; }

MusicResult estimate_locations_music(const SubspaceSplit& split, int k, const SearchGrid& grid,
                                     const ArrayGeometry& geom, const MusicOptions& options) {
  const SignalNoiseBases bases = split_subspaces(split, k);
  const auto start = std::chrono::steady_clock::now();
  const MusicSpectrum spectrum = compute_spectrum(bases.noise, grid, geom, options);
  PeakSelection peaks = find_peaks(spectrum, k);
  const auto stop = std::chrono::steady_clock::now();

  MusicResult result;
  result.peaks = std::move(peaks);
  result.estimate.method = Method::Music;
  result.estimate.elapsed_seconds = std::chrono::duration<double>(stop - start).count();
  for (const GridCell& c : result.peaks.cells) {
    result.estimate.positions.push_back(grid.position(c.azimuth, c.elevation, c.range));
  }
  return result;
}

MusicResult estimate_locations_music(const SampleCovariance& cov, int k, const SearchGrid& grid,
                                     const ArrayGeometry& geom, const MusicOptions& options) {
  return estimate_locations_music(eigendecompose(cov), k, grid, geom, options);
}

void write_spectrum(const MusicSpectrum& spectrum, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << kSpectrumMagic << ' ' << kSpectrumVersion << '\n';
  auto axis = [&](const char* name, const std::vector<double>& values) {
    out << name << ' ' << values.size();
    for (double v : values) out << ' ' << detail::format_double(v);
    out << '\n';
  };
  axis("azimuth", spectrum.grid.azimuth);
  axis("elevation", spectrum.grid.elevation);
  axis("range", spectrum.grid.range);
  out << "end\n";
  for (double v : spectrum.values) detail::write_le(out, v);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

MusicSpectrum read_spectrum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != std::string(kSpectrumMagic) + " " + std::to_string(kSpectrumVersion)) {
    throw FormatError("not a spectrum file", 0);
  }
  MusicSpectrum s;
  auto read_axis = [&](const char* name, std::vector<double>& axis) {
    const auto offset = static_cast<std::uint64_t>(in.tellg());
    if (!std::getline(in, line)) throw FormatError(std::string("missing ") + name + " axis", offset);
    std::istringstream ls(line);
    std::string key;
    std::size_t count = 0;
    if (!(ls >> key >> count) || key != name) throw FormatError(std::string("bad ") + name + " axis", offset);
    std::string token;
    while (ls >> token) axis.push_back(detail::parse_double(token));
    if (axis.size() != count) throw FormatError(std::string(name) + " axis length mismatch", offset);
  };
  read_axis("azimuth", s.grid.azimuth);
  read_axis("elevation", s.grid.elevation);
  read_axis("range", s.grid.range);
  if (!std::getline(in, line) || line != "end") throw FormatError("missing header terminator", in.tellg());
  s.values.resize(s.grid.cells());
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const auto offset = static_cast<std::uint64_t>(in.tellg());
    if (!detail::read_le(in, s.values[i])) throw FormatError("truncated spectrum payload", offset);
  }
  return s;
}

}  // namespace nearfield
