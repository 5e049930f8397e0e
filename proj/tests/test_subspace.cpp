#include <cmath>
#include <limits>

#include "doctest.h"
#include "nearfield/subspace.hpp"

using namespace nearfield;

namespace {

CMatrix random_hermitian_psd(int n, int rank, Rng& rng) {
  CMatrix a(n, rank);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < rank; ++j) a(i, j) = rng.complex_normal();
  }
  CMatrix r = a * a.adjoint();
  return (r + r.adjoint()) / 2.0;
}

SampleCovariance cov_of(const CMatrix& m) { return {m, 1}; }

}  // namespace

TEST_CASE("sample covariance examples") {
  CMatrix x = CMatrix::Zero(4, 1);
  x(0, 0) = 1.0;
  const SampleCovariance r = sample_covariance(x);
  CMatrix e = CMatrix::Zero(4, 4);
  e(0, 0) = 1.0;
  CHECK(r.matrix == e);

  Rng rng(1);
  CVector v(5);
  for (auto& c : v) c = rng.complex_normal();
  CMatrix same(5, 7);
  for (int t = 0; t < 7; ++t) same.col(t) = v;
  CHECK((sample_covariance(same).matrix - v * v.adjoint()).norm() < 1e-12 * (v * v.adjoint()).norm());

  CMatrix batch(6, 30);
  for (int i = 0; i < 6; ++i) {
    for (int t = 0; t < 30; ++t) batch(i, t) = rng.complex_normal();
  }
  const SampleCovariance rb = sample_covariance(batch);
  double norms = 0;
  for (int t = 0; t < 30; ++t) norms += batch.col(t).squaredNorm();
  CHECK(std::abs(rb.matrix.trace().real() - norms / 30) <= 1e-12 * norms / 30);
  CHECK(rb.matrix == rb.matrix.adjoint());
  CHECK(rb.num_snapshots == 30);
}

TEST_CASE("eigendecomposition invariants on random PSD matrices") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 31);
    const int rank = 1 + static_cast<int>(rng.next_u64() % n);
    const CMatrix r = random_hermitian_psd(n, rank, rng);
    const SubspaceSplit s = eigendecompose(cov_of(r));
    const CMatrix& u = s.eigenvectors;
    CHECK((u.adjoint() * u - CMatrix::Identity(n, n)).norm() <= 1e-10);
    const CMatrix rec = u * s.eigenvalues.cast<std::complex<double>>().asDiagonal() * u.adjoint();
    CHECK((rec - r).norm() <= 1e-10 * r.norm());
    CHECK(std::abs(s.eigenvalues.sum() - r.trace().real()) <= 1e-10 * std::abs(r.trace().real()));
    for (int i = 1; i < n; ++i) CHECK(s.eigenvalues[i] <= s.eigenvalues[i - 1]);
    for (int i = 0; i < n; ++i) {
      CHECK((r * u.col(i) - s.eigenvalues[i] * u.col(i)).norm() <= 1e-8 * r.norm());
    }
  }
}

TEST_CASE("phase fix makes the largest entry real positive") {
  Rng rng(3);
  const CMatrix r = random_hermitian_psd(8, 8, rng);
  const SubspaceSplit s = eigendecompose(cov_of(r));
  for (int j = 0; j < 8; ++j) {
    Eigen::Index arg = 0;
    s.eigenvectors.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(s.eigenvectors(arg, j).imag() == 0.0);
    CHECK(s.eigenvectors(arg, j).real() > 0.0);
  }
  // Determinism under a unitary-equivalent input presentation.
  const Tensor a = cnn_input_tensor(eigendecompose(cov_of(r)));
  const Tensor b = cnn_input_tensor(eigendecompose(cov_of(r)));
  CHECK(a == b);
}

TEST_CASE("identity and rank-one-plus-identity spectra") {
  const SubspaceSplit id = eigendecompose(cov_of(CMatrix::Identity(6, 6)));
  for (int i = 0; i < 6; ++i) CHECK(id.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((id.eigenvectors.adjoint() * id.eigenvectors - CMatrix::Identity(6, 6)).norm() < 1e-12);

  const ArrayGeometry g{4, 4, 0.05, 0.05, 0.1};
  const CVector a = steering_vector(g, SourcePosition::from_spherical(0.4, -0.2, 0.8));
  const double sigma2 = 0.3;
  const CMatrix r = a * a.adjoint() + sigma2 * CMatrix::Identity(16, 16);
  const SubspaceSplit s = eigendecompose(cov_of(r));
  CHECK(s.eigenvalues[0] == doctest::Approx(16 + sigma2).epsilon(1e-12));
  for (int i = 1; i < 16; ++i) CHECK(s.eigenvalues[i] == doctest::Approx(sigma2).epsilon(1e-12));
}

TEST_CASE("repeated eigenvalues are ordered deterministically") {
  CMatrix d = CMatrix::Zero(4, 4);
  d(0, 0) = 2;
  d(1, 1) = 2;
  d(2, 2) = 1;
  d(3, 3) = 1;
  const SubspaceSplit s = eigendecompose(cov_of(d));
  const SubspaceSplit t = eigendecompose(cov_of(d));
  CHECK(cnn_input_tensor(s) == cnn_input_tensor(t));
  CHECK(s.eigenvalues[0] == 2.0);
  CHECK(s.eigenvalues[3] == 1.0);
}

TEST_CASE("non-Hermitian input is rejected") {
  CMatrix m = CMatrix::Identity(3, 3);
  m(0, 1) = 0.5;
  CHECK_THROWS_AS(eigendecompose(cov_of(m)), std::invalid_argument);
}

TEST_CASE("subspace split") {
  const ArrayGeometry g{4, 4, 0.05, 0.05, 0.1};
  const std::vector<SourcePosition> sources{SourcePosition::from_spherical(0.4, -0.2, 0.8),
                                            SourcePosition::from_spherical(-0.5, 0.3, 0.6)};
  CMatrix r = CMatrix::Zero(16, 16);
  for (const auto& s : sources) {
    const CVector a = steering_vector(g, s);
    r += a * a.adjoint();
  }
  SubspaceSplit split = eigendecompose(cov_of(r));
  const SignalNoiseBases b = split_subspaces(split, 2);
  CHECK(b.signal.cols() == 2);
  CHECK(b.noise.cols() == 14);
  for (const auto& s : sources) {
    const CVector a = steering_vector(g, s);
    CHECK((a.adjoint() * b.noise * b.noise.adjoint() * a)(0, 0).real() <= 1e-8 * 16);
  }
  const CMatrix complete = b.signal * b.signal.adjoint() + b.noise * b.noise.adjoint();
  CHECK((complete - CMatrix::Identity(16, 16)).norm() < 1e-10);
  CHECK(split_subspaces(split, 15).noise.cols() == 1);
  CHECK_THROWS_AS(split_subspaces(split, 16), std::invalid_argument);
  CHECK_THROWS_AS(split_subspaces(split, 0), std::invalid_argument);
}

TEST_CASE("CNN input tensor layout") {
  const SubspaceSplit id = eigendecompose(cov_of(CMatrix::Identity(3, 3)));
  SubspaceSplit s = id;
  s.eigenvectors = CMatrix::Identity(3, 3);
  const Tensor t = cnn_input_tensor(s);
  REQUIRE(t.shape() == std::vector<std::size_t>{2, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(t.at({0, i, j}) == (i == j ? 1.0 : 0.0));
      CHECK(t.at({1, i, j}) == 0.0);
    }
  }

  Rng rng(4);
  const SubspaceSplit r = eigendecompose(cov_of(random_hermitian_psd(7, 7, rng)));
  const Tensor x = cnn_input_tensor(r);
  CMatrix u(7, 7);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) u(i, j) = {x.at({0, i, j}), x.at({1, i, j})};
  }
  CHECK(u == r.eigenvectors);
  CHECK((u.adjoint() * u - CMatrix::Identity(7, 7)).norm() < 1e-10);
  for (std::size_t j = 0; j < 7; ++j) {
    double sum = 0;
    for (std::size_t i = 0; i < 7; ++i) sum += x.at({0, i, j}) * x.at({0, i, j}) + x.at({1, i, j}) * x.at({1, i, j});
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
  }
}
