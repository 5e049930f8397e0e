#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "nearfield/array_model.hpp"

namespace nearfield {

/// Uniform priors from which source locations are drawn, plus the channel and
/// snapshot settings shared by every sample of a scenario.
struct ScenarioPrior {
  ArrayGeometry geom;
  double kappa = 4.0;
  double snr_db = 0.0;
  int num_sources = 1;
  int num_snapshots = 25;
  double azimuth_min = -1.0471975511965976;
  double azimuth_max = 1.0471975511965976;
  double elevation_min = -1.0471975511965976;
  double elevation_max = 1.0471975511965976;
  double range_min = 0.0;
  double range_max = 0.0;

  /// Range prior [2D, d_FA/4] for the given geometry. The interval is empty for
  /// small apertures (D < 4 lambda); validate() rejects it in that case.
  void set_default_range();
  /// Throws std::invalid_argument on empty intervals or a range below 2D.
  void validate() const;
  bool contains(const SourcePosition& source, double tolerance = 1e-9) const;
};

/// Axis-aligned Cartesian box that encloses every location in the prior.
struct CartesianBounds {
  Vec3 lo;
  Vec3 hi;
  double diagonal() const { return (hi - lo).norm(); }
};

CartesianBounds cartesian_bounds(const ScenarioPrior& prior);

struct ScenarioConfig {
  ScenarioPrior prior;
  std::uint64_t seed = 0;
};

/// Parses a JSON scenario document. Required keys: n_y, n_z, d_y, d_z,
/// wavelength, kappa, snr_db, num_sources, num_snapshots, seed. Optional:
/// azimuth_min/max, elevation_min/max (radians), range_min/max (meters).
/// Throws ConfigError on missing or ill-typed keys.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioPrior& prior);

}  // namespace nearfield
