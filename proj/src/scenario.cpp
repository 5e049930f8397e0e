#include "nearfield/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "nearfield/errors.hpp"

namespace nearfield {

namespace {

// Range of cos/sin over [lo, hi]: endpoints plus any interior stationary point.
std::array<double, 2> trig_range(double lo, double hi, bool use_sin) {
  auto f = [use_sin](double v) { return use_sin ? std::sin(v) : std::cos(v); };
  double mn = std::min(f(lo), f(hi));
  double mx = std::max(f(lo), f(hi));
  const double offset = use_sin ? std::numbers::pi / 2 : 0.0;
  const double first = std::ceil((lo - offset) / std::numbers::pi);
  for (double k = first; offset + k * std::numbers::pi <= hi; k += 1.0) {
    const double v = f(offset + k * std::numbers::pi);
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  return {mn, mx};
}

double corner_extreme(const std::array<std::array<double, 2>, 3>& factors, bool take_max) {
  double best = take_max ? -INFINITY : INFINITY;
  for (double a : factors[0]) {
    for (double b : factors[1]) {
      for (double c : factors[2]) {
        const double v = a * b * c;
        best = take_max ? std::max(best, v) : std::min(best, v);
      }
    }
  }
  return best;
}

template <typename T>
T required(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("scenario is missing key '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario key '") + key + "' has the wrong type: " + e.what());
  }
}

template <typename T>
void optional(const nlohmann::json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario key '") + key + "' has the wrong type: " + e.what());
  }
}

// Accepts a number or the strings "inf" / "infinity".
double number_or_infinity(const nlohmann::json& doc, const char* key) {
  if (doc.contains(key) && doc.at(key).is_string()) {
    const std::string text = doc.at(key).get<std::string>();
    if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError(std::string("scenario key '") + key + "' must be a number or \"inf\"");
  }
  return required<double>(doc, key);
}

nlohmann::json number_json(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

}  // namespace

void ScenarioPrior::set_default_range() {
  const double d = geom.aperture();
  range_min = 2.0 * d;
  range_max = geom.fraunhofer_distance() / 4.0;
}

void ScenarioPrior::validate() const {
  geom.validate();
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
  if (num_sources < 1) throw std::invalid_argument("num_sources must be at least 1");
  if (num_sources >= geom.size()) throw std::invalid_argument("num_sources must be below the antenna count");
  if (num_snapshots < 1) throw std::invalid_argument("num_snapshots must be at least 1");
  if (!(azimuth_min < azimuth_max)) throw std::invalid_argument("empty azimuth prior");
  if (!(elevation_min < elevation_max)) throw std::invalid_argument("empty elevation prior");
  if (!(elevation_min > -std::numbers::pi / 2 && elevation_max < std::numbers::pi / 2)) {
    throw std::invalid_argument("elevation prior must lie inside (-pi/2, pi/2)");
  }
  if (!(range_min < range_max)) {
    throw std::invalid_argument("empty range prior: range_min " + std::to_string(range_min) +
                                " >= range_max " + std::to_string(range_max));
  }
  if (range_min < 2.0 * geom.aperture() * (1.0 - 1e-12)) {
    throw std::invalid_argument("range_min must be at least twice the array aperture");
  }
}

bool ScenarioPrior::contains(const SourcePosition& s, double tol) const {
  return s.azimuth >= azimuth_min - tol && s.azimuth <= azimuth_max + tol && s.elevation >= elevation_min - tol &&
         s.elevation <= elevation_max + tol && s.range >= range_min * (1 - tol) && s.range <= range_max * (1 + tol);
}

CartesianBounds cartesian_bounds(const ScenarioPrior& p) {
  const auto cos_az = trig_range(p.azimuth_min, p.azimuth_max, false);
  const auto sin_az = trig_range(p.azimuth_min, p.azimuth_max, true);
  const auto cos_el = trig_range(p.elevation_min, p.elevation_max, false);
  const auto sin_el = trig_range(p.elevation_min, p.elevation_max, true);
  const std::array<double, 2> r{p.range_min, p.range_max};
  const std::array<double, 2> one{1.0, 1.0};

  const std::array<std::array<double, 2>, 3> fx{r, cos_az, cos_el};
  const std::array<std::array<double, 2>, 3> fy{r, sin_az, cos_el};
  const std::array<std::array<double, 2>, 3> fz{r, one, sin_el};
  CartesianBounds b;
  b.lo = {corner_extreme(fx, false), corner_extreme(fy, false), corner_extreme(fz, false)};
  b.hi = {corner_extreme(fx, true), corner_extreme(fy, true), corner_extreme(fz, true)};
  return b;
}

ScenarioConfig parse_scenario(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
  ScenarioConfig cfg;
  ScenarioPrior& p = cfg.prior;
  p.geom.n_y = required<int>(doc, "n_y");
  p.geom.n_z = required<int>(doc, "n_z");
  p.geom.d_y = required<double>(doc, "d_y");
  p.geom.d_z = required<double>(doc, "d_z");
  p.geom.wavelength = required<double>(doc, "wavelength");
  p.kappa = number_or_infinity(doc, "kappa");
  p.snr_db = number_or_infinity(doc, "snr_db");
  p.num_sources = required<int>(doc, "num_sources");
  p.num_snapshots = required<int>(doc, "num_snapshots");
  cfg.seed = required<std::uint64_t>(doc, "seed");
  try {
    p.geom.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid array geometry: ") + e.what());
  }
  p.set_default_range();
  optional(doc, "azimuth_min", p.azimuth_min);
  optional(doc, "azimuth_max", p.azimuth_max);
  optional(doc, "elevation_min", p.elevation_min);
  optional(doc, "elevation_max", p.elevation_max);
  optional(doc, "range_min", p.range_min);
  optional(doc, "range_max", p.range_max);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

nlohmann::json to_json(const ScenarioPrior& p) {
  return {{"n_y", p.geom.n_y},
          {"n_z", p.geom.n_z},
          {"d_y", p.geom.d_y},
          {"d_z", p.geom.d_z},
          {"wavelength", p.geom.wavelength},
          {"kappa", number_json(p.kappa)},
          {"snr_db", number_json(p.snr_db)},
          {"num_sources", p.num_sources},
          {"num_snapshots", p.num_snapshots},
          {"azimuth_min", p.azimuth_min},
          {"azimuth_max", p.azimuth_max},
          {"elevation_min", p.elevation_min},
          {"elevation_max", p.elevation_max},
          {"range_min", p.range_min},
          {"range_max", p.range_max}};
}

}  // namespace nearfield
