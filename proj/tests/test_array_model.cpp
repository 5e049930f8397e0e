#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nearfield/array_model.hpp"

using namespace nearfield;
using std::numbers::pi;

namespace {

ArrayGeometry paper_geom() { return {16, 8, 0.05, 0.05, 0.1}; }

double sinc(double u) { return u == 0.0 ? 1.0 : std::sin(pi * u) / (pi * u); }

}  // namespace

TEST_CASE("antenna positions follow zero-based row-major indexing") {
  const ArrayGeometry g = paper_geom();
  CHECK(antenna_position(g, 0).isApprox(Vec3(0, 0, 0)));
  CHECK((antenna_position(g, 1) - Vec3(0, 0.05, 0)).norm() < 1e-15);
  CHECK((antenna_position(g, 16) - Vec3(0, 0, 0.05)).norm() < 1e-15);
  int n = 0;
  for (int mz = 0; mz < g.n_z; ++mz) {
    for (int my = 0; my < g.n_y; ++my, ++n) {
      CHECK((antenna_position(g, n) - Vec3(0, my * g.d_y, mz * g.d_z)).norm() < 1e-15);
    }
  }
  CHECK_THROWS_AS(antenna_position(g, g.size()), std::invalid_argument);
  CHECK_THROWS_AS(antenna_position(g, -1), std::invalid_argument);
}

TEST_CASE("aperture and Fraunhofer distance") {
  const ArrayGeometry g = paper_geom();
  const double d = std::hypot(15 * 0.05, 7 * 0.05);
  CHECK(g.aperture() == doctest::Approx(d).epsilon(1e-14));
  CHECK(g.aperture() == doctest::Approx(0.82765).epsilon(1e-5));
  CHECK(g.fraunhofer_distance() == doctest::Approx(2 * d * d / 0.1).epsilon(1e-14));
  CHECK(g.fraunhofer_distance() == doctest::Approx(13.700).epsilon(1e-4));
  ArrayGeometry bad = g;
  bad.wavelength = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("spherical to Cartesian examples and round trip") {
  CHECK((source_to_cartesian(0, 0, 5) - Vec3(5, 0, 0)).norm() < 1e-15);
  CHECK((source_to_cartesian(pi / 2, 0, 2) - Vec3(0, 2, 0)).norm() < 1e-15);
  const Vec3 c = source_to_cartesian(pi / 4, pi / 6, 3);
  CHECK(c.x() == doctest::Approx(1.8371).epsilon(1e-4));
  CHECK(c.y() == doctest::Approx(1.8371).epsilon(1e-4));
  CHECK(c.z() == doctest::Approx(1.5).epsilon(1e-12));

  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double az = rng.uniform(-pi / 2 + 1e-6, pi / 2 - 1e-6);
    const double el = rng.uniform(-pi / 2 + 1e-6, pi / 2 - 1e-6);
    const double r = rng.uniform(0.01, 100);
    const Vec3 s = cartesian_to_spherical(source_to_cartesian(az, el, r));
    CHECK(std::abs(s.x() - az) <= 1e-12 * std::max(1.0, std::abs(az)));
    CHECK(std::abs(s.y() - el) <= 1e-12 * std::max(1.0, std::abs(el)));
    CHECK(std::abs(s.z() - r) <= 1e-12 * r);
  }
}

TEST_CASE("element distance") {
  const ArrayGeometry g = paper_geom();
  const SourcePosition s = SourcePosition::from_cartesian({5, 0, 0});
  CHECK(element_distance(s, g, 0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(element_distance(s, g, 1) == doctest::Approx(std::sqrt(25 + 0.0025)).epsilon(1e-15));
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const SourcePosition p =
        SourcePosition::from_spherical(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 4));
    for (int n = 0; n < g.size(); n += 7) {
      CHECK(std::abs(element_distance(p, g, n) - p.range) <= antenna_position(g, n).norm() + 1e-12);
    }
  }
}

TEST_CASE("steering vector is unit modulus with reference element one") {
  const ArrayGeometry g = paper_geom();
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const SourcePosition s = SourcePosition::from_spherical(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.7, 3.5));
    const CVector a = steering_vector(g, s);
    CHECK(a[0] == std::complex<double>(1.0, 0.0));
    for (int n = 0; n < a.size(); ++n) CHECK(std::abs(std::abs(a[n]) - 1.0) < 1e-12);
    for (int n = 0; n < a.size(); ++n) {
      const double phase = 2 * pi / g.wavelength * (s.range - element_distance(s, g, n));
      CHECK(std::abs(a[n] - std::polar(1.0, phase)) < 1e-9);
    }
  }
}

TEST_CASE("far-field limit matches the planar wavefront") {
  const ArrayGeometry g = paper_geom();
  const double az = 0.3, el = -0.2;
  const SourcePosition s = SourcePosition::from_spherical(az, el, 1e6 * g.aperture());
  const CVector a = steering_vector(g, s);
  const Vec3 u = source_to_cartesian(az, el, 1.0);
  for (int n = 0; n < g.size(); ++n) {
    const double planar = 2 * pi / g.wavelength * u.dot(antenna_position(g, n));
    CHECK(std::abs(std::arg(a[n] * std::polar(1.0, -planar))) < 1e-3);
  }
}

TEST_CASE("isotropic correlation matches pairwise sinc") {
  const ArrayGeometry g{2, 2, 0.05, 0.05, 0.1};
  const CMatrix r = nlos_correlation_matrix(g);
  REQUIRE(r.rows() == 4);
  for (int n = 0; n < 4; ++n) {
    for (int m = 0; m < 4; ++m) {
      const double dist = (antenna_position(g, n) - antenna_position(g, m)).norm();
      CHECK(std::abs(r(n, m) - sinc(2 * dist / 0.1)) < 1e-15);
    }
  }
  CHECK(std::abs(r(0, 1)) < 1e-15);  // half-wavelength null
  const CMatrix big = nlos_correlation_matrix(paper_geom());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(big);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  for (int n = 0; n < big.rows(); ++n) CHECK(big(n, n) == std::complex<double>(1.0, 0.0));
}

TEST_CASE("channel model validation") {
  CMatrix bad = CMatrix::Identity(3, 3);
  bad(0, 0) = 2.0;
  CHECK_THROWS_AS(ChannelModel(1.0, bad), std::invalid_argument);
  CHECK_THROWS_AS(ChannelModel(-1.0, CMatrix::Identity(3, 3)), std::invalid_argument);
  const ChannelModel m(4.0, CMatrix::Identity(3, 3));
  CHECK(m.los_weight() == doctest::Approx(std::sqrt(0.8)).epsilon(1e-15));
  CHECK(m.nlos_weight() == doctest::Approx(std::sqrt(0.2)).epsilon(1e-15));
  const ChannelModel inf(std::numeric_limits<double>::infinity(), CMatrix::Identity(3, 3));
  CHECK(inf.los_weight() == 1.0);
  CHECK(inf.nlos_weight() == 0.0);
}

TEST_CASE("Rician channel limits and power") {
  const ArrayGeometry g{4, 4, 0.05, 0.05, 0.1};
  const SourcePosition s = SourcePosition::from_spherical(0.2, 0.1, 0.6);
  const CVector a = steering_vector(g, s);

  Rng r1(9);
  const CVector los = draw_rician_channel(g, s, ChannelModel::isotropic(g, 1e12), r1);
  CHECK((los - a).cwiseAbs().maxCoeff() < 1e-5);
  Rng r2(9);
  const CVector pure = draw_rician_channel(g, s, ChannelModel::isotropic(g, std::numeric_limits<double>::infinity()), r2);
  CHECK(pure == a);

  Rng r3(10), r4(10);
  const ChannelModel k4 = ChannelModel::isotropic(g, 4.0);
  CHECK(draw_rician_channel(g, s, k4, r3) == draw_rician_channel(g, s, k4, r4));

  for (double kappa : {0.0, 4.0}) {
    const ChannelModel model = ChannelModel::isotropic(g, kappa);
    Rng rng(11);
    Eigen::VectorXd power = Eigen::VectorXd::Zero(g.size());
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) power += draw_rician_channel(g, s, model, rng).cwiseAbs2();
    power /= draws;
    for (int n = 0; n < g.size(); ++n) {
      CHECK(power[n] >= 0.98);
      CHECK(power[n] <= 1.02);
    }
  }
}

TEST_CASE("snapshot simulation") {
  const ArrayGeometry g{4, 4, 0.05, 0.05, 0.1};
  const SourcePosition s = SourcePosition::from_spherical(-0.3, 0.25, 0.7);
  const ChannelModel los = ChannelModel::isotropic(g, std::numeric_limits<double>::infinity());
  CHECK(noise_variance_from_snr_db(0.0) == 1.0);
  CHECK(noise_variance_from_snr_db(std::numeric_limits<double>::infinity()) == 0.0);

  SUBCASE("noiseless single snapshot is a scaled steering vector") {
    Rng rng(1);
    const SnapshotBatch b = simulate_snapshots(g, {s}, los, 1, std::numeric_limits<double>::infinity(), rng);
    const CVector x = b.snapshots.col(0);
    const CVector a = steering_vector(g, s);
    CHECK((x / x[0] - a).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("sample covariance approaches a a^H + sigma^2 I") {
    Rng rng(2);
    const int t = 100000;
    const SnapshotBatch b = simulate_snapshots(g, {s}, los, t, 0.0, rng);
    const CMatrix r = b.snapshots * b.snapshots.adjoint() / double(t);
    const CVector a = steering_vector(g, s);
    const CMatrix expected = a * a.adjoint() + CMatrix::Identity(16, 16);
    CHECK((r - expected).norm() <= 0.05 * expected.trace().real());
  }
  SUBCASE("shorter batches are prefixes of longer ones") {
    const ChannelModel k4 = ChannelModel::isotropic(g, 4.0);
    Rng a(7), b(7);
    const SnapshotBatch short_b = simulate_snapshots(g, {s}, k4, 25, 0.0, a);
    const SnapshotBatch long_b = simulate_snapshots(g, {s}, k4, 100, 0.0, b);
    CHECK(short_b.snapshots == long_b.snapshots.leftCols(25));
  }
  SUBCASE("argument errors") {
    Rng rng(3);
    CHECK_THROWS_AS(simulate_snapshots(g, {}, los, 5, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(simulate_snapshots(g, {s}, los, 0, 0.0, rng), std::invalid_argument);
  }
}

TEST_CASE("rng split streams are independent of parent draws") {
  Rng a(42), b(42);
  b.next_u64();
  b.normal();
  CHECK(a.split(3).next_u64() == b.split(3).next_u64());
  CHECK(a.split(3).next_u64() != a.split(4).next_u64());
  CHECK(Rng::derive_seed(1, 0) != Rng::derive_seed(0, 1));
}
