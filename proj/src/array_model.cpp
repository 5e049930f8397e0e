#include "nearfield/array_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>


namespace nearfield {

void ArrayGeometry::validate() const {
  if (n_y < 1 || n_z < 1) throw std::invalid_argument("array needs at least one element per axis");
  if (!(d_y > 0.0) || !(d_z > 0.0)) throw std::invalid_argument("element spacing must be positive");
  if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
}

double ArrayGeometry::aperture() const {
  return std::hypot((n_y - 1) * d_y, (n_z - 1) * d_z);
}

double ArrayGeometry::fraunhofer_distance() const {
  const double d = aperture();
  return 2.0 * d * d / wavelength;
}

Vec3 source_to_cartesian(double azimuth, double elevation, double range) {
  const double ce = std::cos(elevation);
  return {range * std::cos(azimuth) * ce, range * std::sin(azimuth) * ce, range * std::sin(elevation)};
}

Vec3 cartesian_to_spherical(const Vec3& xyz) {
  const double range = xyz.norm();
  const double azimuth = std::atan2(xyz.y(), xyz.x());
  const double elevation = std::atan2(xyz.z(), std::hypot(xyz.x(), xyz.y()));
  return {azimuth, elevation, range};
}

SourcePosition SourcePosition::from_spherical(double azimuth, double elevation, double range) {
  if (!(range > 0.0)) throw std::invalid_argument("source range must be positive");
  return {azimuth, elevation, range, source_to_cartesian(azimuth, elevation, range)};
}

SourcePosition SourcePosition::from_cartesian(const Vec3& xyz) {
  const Vec3 s = cartesian_to_spherical(xyz);
  if (!(s.z() > 0.0)) throw std::invalid_argument("source cannot sit at the reference antenna");
  return {s.x(), s.y(), s.z(), xyz};
}

Vec3 antenna_position(const ArrayGeometry& geom, int index) {
  if (index < 0 || index >= geom.size()) {
    throw std::invalid_argument("antenna index " + std::to_string(index) + " outside [0, " +
                                std::to_string(geom.size()) + ")");
  }
  const int m_y = index % geom.n_y;
  const int m_z = index / geom.n_y;
  return {0.0, m_y * geom.d_y, m_z * geom.d_z};
}

double element_distance(const SourcePosition& source, const ArrayGeometry& geom, int index) {
  return (source.cartesian - antenna_position(geom, index)).norm();
}

void steering_vector_into(const ArrayGeometry& geom, const SourcePosition& source,
                          std::complex<double>* out) {
  const double k = 2.0 * std::numbers::pi / geom.wavelength;
  const double x = source.cartesian.x();
  const double x2 = x * x;
  for (int m_z = 0; m_z < geom.n_z; ++m_z) {
    const double dz = source.cartesian.z() - m_z * geom.d_z;
    const double base = x2 + dz * dz;
    for (int m_y = 0; m_y < geom.n_y; ++m_y) {
      const double dy = source.cartesian.y() - m_y * geom.d_y;
      const double r_n = std::sqrt(base + dy * dy);
      const double phase = k * (source.range - r_n);
      out[m_z * geom.n_y + m_y] = {std::cos(phase), std::sin(phase)};
    }
  }
  // Reference element is exactly 1 regardless of rounding in the range.
  out[0] = {1.0, 0.0};
}

CVector steering_vector(const ArrayGeometry& geom, const SourcePosition& source) {
  CVector a(geom.size());
  steering_vector_into(geom, source, a.data());
  return a;
}

CMatrix nlos_correlation_matrix(const ArrayGeometry& geom) {
  const int n = geom.size();
  CMatrix r(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec3 p_i = antenna_position(geom, i);
    for (int j = 0; j < n; ++j) {
      const double u = 2.0 * (p_i - antenna_position(geom, j)).norm() / geom.wavelength;
      const double value = (u == 0.0) ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      r(i, j) = {value, 0.0};
    }
  }
  return r;
}

ChannelModel::ChannelModel(double rician_factor, CMatrix nlos_correlation)
    : kappa_(rician_factor), correlation_(std::move(nlos_correlation)) {
  if (!(kappa_ >= 0.0)) throw std::invalid_argument("rician factor must be non-negative");
  if (correlation_.rows() != correlation_.cols() || correlation_.rows() == 0) {
    throw std::invalid_argument("NLoS correlation must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, correlation_.cwiseAbs().maxCoeff());
  if ((correlation_ - correlation_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("NLoS correlation must be Hermitian");
  }
  for (Eigen::Index i = 0; i < correlation_.rows(); ++i) {
    if (std::abs(correlation_(i, i) - 1.0) > 1e-12) {
      throw std::invalid_argument("NLoS correlation must have unit diagonal");
    }
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(correlation_);
  const Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() < -1e-10 * correlation_.rows()) {
    throw std::invalid_argument("NLoS correlation is not positive semidefinite");
  }
  const Eigen::VectorXd root = values.cwiseMax(0.0).cwiseSqrt();
  correlation_sqrt_ = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

ChannelModel ChannelModel::isotropic(const ArrayGeometry& geom, double rician_factor) {
  geom.validate();
  return ChannelModel(rician_factor, nlos_correlation_matrix(geom));
}

double ChannelModel::los_weight() const {
  if (std::isinf(kappa_)) return 1.0;
  return std::sqrt(kappa_ / (kappa_ + 1.0));
}

double ChannelModel::nlos_weight() const {
  if (std::isinf(kappa_)) return 0.0;
  return std::sqrt(1.0 / (kappa_ + 1.0));
}

CVector draw_rician_channel(const ArrayGeometry& geom, const SourcePosition& source,
                            const ChannelModel& model, Rng& rng) {
  const int n = geom.size();
  if (model.nlos_correlation().rows() != n) {
    throw std::invalid_argument("channel model size does not match the array");
  }
  CVector w(n);
  for (int i = 0; i < n; ++i) w(i) = rng.complex_normal();
  CVector h = model.los_weight() * steering_vector(geom, source);
  const double nlos = model.nlos_weight();
  if (nlos != 0.0) h.noalias() += nlos * (model.nlos_correlation_sqrt() * w);
  return h;
}

double noise_variance_from_snr_db(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
  return std::pow(10.0, -snr_db / 10.0);
}

SnapshotBatch simulate_snapshots(const ArrayGeometry& geom, const std::vector<SourcePosition>& sources,
                                 const ChannelModel& model, int num_snapshots, double snr_db, Rng& rng) {
  if (sources.empty()) throw std::invalid_argument("at least one source is required");
  if (num_snapshots < 1) throw std::invalid_argument("at least one snapshot is required");
  geom.validate();

  const int n = geom.size();
  const auto k = static_cast<int>(sources.size());
  const std::uint64_t batch_seed = rng.next_u64();
  Rng channel_rng = Rng(batch_seed).split(0);
  Rng signal_rng = Rng(batch_seed).split(1);

  CMatrix channels(n, k);
  for (int i = 0; i < k; ++i) channels.col(i) = draw_rician_channel(geom, sources[i], model, channel_rng);

  const double noise_std = std::sqrt(noise_variance_from_snr_db(snr_db));
  SnapshotBatch batch;
  batch.snapshots.resize(n, num_snapshots);
  batch.snr_per_antenna_db = snr_db;
  batch.ground_truth = sources;
  batch.seed = batch_seed;

  CVector symbols(k);
  for (int t = 0; t < num_snapshots; ++t) {
    for (int i = 0; i < k; ++i) symbols(i) = signal_rng.complex_normal();
    auto column = batch.snapshots.col(t);
    column.noalias() = channels * symbols;
    for (int a = 0; a < n; ++a) {
      const std::complex<double> noise = signal_rng.complex_normal();
      column(a) += noise_std * noise;
    }
  }
  return batch;
}

}  // namespace nearfield
