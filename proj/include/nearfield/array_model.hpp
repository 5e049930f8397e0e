#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nearfield/rng.hpp"

namespace nearfield {

using Vec3 = Eigen::Vector3d;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// Uniform planar array in the y-z plane. Antenna 0 is the reference element
/// at the origin; flat index n maps to (m_y, m_z) = (n mod n_y, n div n_y).
struct ArrayGeometry {
  int n_y = 1;
  int n_z = 1;
  double d_y = 0.05;
  double d_z = 0.05;
  double wavelength = 0.1;

  /// Throws std::invalid_argument when counts or lengths are not positive.
  void validate() const;
  int size() const { return n_y * n_z; }
  /// Largest physical extent (diagonal of the element grid).
  double aperture() const;
  /// Fraunhofer array distance 2 D^2 / lambda.
  double fraunhofer_distance() const;
};

/// A source location carried in both spherical and Cartesian form.
struct SourcePosition {
  double azimuth = 0.0;
  double elevation = 0.0;
  double range = 1.0;
  Vec3 cartesian = Vec3(1.0, 0.0, 0.0);

  static SourcePosition from_spherical(double azimuth, double elevation, double range);
  static SourcePosition from_cartesian(const Vec3& xyz);
};

Vec3 source_to_cartesian(double azimuth, double elevation, double range);

/// Inverse of source_to_cartesian: returns (azimuth, elevation, range).
Vec3 cartesian_to_spherical(const Vec3& xyz);

Vec3 antenna_position(const ArrayGeometry& geom, int index);

/// Distance between a source and one antenna element.
double element_distance(const SourcePosition& source, const ArrayGeometry& geom, int index);

/// Near-field array response: element n is exp(j 2pi/lambda (range - r_n)).
CVector steering_vector(const ArrayGeometry& geom, const SourcePosition& source);

/// Same as steering_vector but writes into a caller-owned buffer of length N.
void steering_vector_into(const ArrayGeometry& geom, const SourcePosition& source,
                          std::complex<double>* out);

/// Isotropic-scattering spatial correlation, sinc(2 |p_n - p_m| / lambda).
CMatrix nlos_correlation_matrix(const ArrayGeometry& geom);

/// Rician channel statistics: LoS/NLoS power ratio kappa (linear) and the
/// NLoS spatial correlation. kappa may be +infinity for a pure LoS channel.
class ChannelModel {
 public:
  ChannelModel(double rician_factor, CMatrix nlos_correlation);

  /// Rician channel with the isotropic sinc correlation of the array.
  static ChannelModel isotropic(const ArrayGeometry& geom, double rician_factor);

  double rician_factor() const { return kappa_; }
  const CMatrix& nlos_correlation() const { return correlation_; }
  /// PSD square root of the correlation, eigenvalues clipped at zero.
  const CMatrix& nlos_correlation_sqrt() const { return correlation_sqrt_; }

  double los_weight() const;
  double nlos_weight() const;

 private:
  double kappa_;
  CMatrix correlation_;
  CMatrix correlation_sqrt_;
};

/// h = sqrt(kappa/(kappa+1)) a + sqrt(1/(kappa+1)) R^{1/2} w, with w i.i.d.
/// standard complex Gaussian drawn from rng.
CVector draw_rician_channel(const ArrayGeometry& geom, const SourcePosition& source,
                            const ChannelModel& model, Rng& rng);

struct SnapshotBatch {
  /// N x T, one snapshot per column.
  CMatrix snapshots;
  double snr_per_antenna_db = 0.0;
  std::vector<SourcePosition> ground_truth;
  std::uint64_t seed = 0;

  int num_antennas() const { return static_cast<int>(snapshots.rows()); }
  int num_snapshots() const { return static_cast<int>(snapshots.cols()); }
};

/// Noise variance per antenna for a per-antenna SNR in dB; +inf gives 0.
double noise_variance_from_snr_db(double snr_db);

/// x(t) = sum_k h_k s_k(t) + n(t). Channels are drawn once per batch from a
/// dedicated stream, then symbols and noise are drawn snapshot by snapshot, so a
/// shorter batch from the same generator state is a prefix of a longer one.
SnapshotBatch simulate_snapshots(const ArrayGeometry& geom, const std::vector<SourcePosition>& sources,
                                 const ChannelModel& model, int num_snapshots, double snr_db, Rng& rng);

}  // namespace nearfield
