#include "nearfield/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace nearfield {

namespace {

void fix_phase(Eigen::Ref<CVector> v) {
  Eigen::Index pivot = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i));
    if (mag > best) {
      best = mag;
      pivot = i;
    }
  }
  if (best <= 0.0) return;
  const std::complex<double> rotation = std::conj(v(pivot)) / best;
  v *= rotation;
  v(pivot) = {best, 0.0};
}

bool lexicographically_less(const CVector& a, const CVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
    if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
  }
  return false;
}

}  // namespace

SampleCovariance sample_covariance(const CMatrix& snapshots) {
  if (snapshots.cols() < 1) throw std::invalid_argument("sample covariance needs at least one snapshot");
  SampleCovariance cov;
  cov.num_snapshots = static_cast<int>(snapshots.cols());
  CMatrix r = (snapshots * snapshots.adjoint()) / static_cast<double>(snapshots.cols());
  cov.matrix = 0.5 * (r + r.adjoint());
  return cov;
}

SampleCovariance sample_covariance(const SnapshotBatch& batch) { return sample_covariance(batch.snapshots); }

SubspaceSplit eigendecompose(const SampleCovariance& cov) {
  const CMatrix& r = cov.matrix;
  if (r.rows() != r.cols() || r.rows() == 0) throw std::invalid_argument("covariance must be square and non-empty");
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  const double asymmetry = (r - r.adjoint()).cwiseAbs().maxCoeff();
  if (asymmetry > 1e-9 * scale) {
    throw std::invalid_argument("covariance is not Hermitian (max |R - R^H| = " + std::to_string(asymmetry) + ")");
  }

  Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition did not converge");

  const Eigen::Index n = r.rows();
  SubspaceSplit split;
  split.eigenvalues.resize(n);
  split.eigenvectors.resize(n, n);
  // Solver order is ascending; reverse it.
  for (Eigen::Index i = 0; i < n; ++i) {
    split.eigenvalues(i) = eig.eigenvalues()(n - 1 - i);
    split.eigenvectors.col(i) = eig.eigenvectors().col(n - 1 - i);
    fix_phase(split.eigenvectors.col(i));
  }

  // Groups of numerically equal eigenvalues get a canonical vector order.
  const double tie = 1e-12 * std::max(1.0, std::abs(split.eigenvalues(0)));
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && split.eigenvalues(end - 1) - split.eigenvalues(end) <= tie) ++end;
    if (end - start > 1) {
      std::vector<CVector> group;
      for (Eigen::Index i = start; i < end; ++i) group.emplace_back(split.eigenvectors.col(i));
      std::stable_sort(group.begin(), group.end(), lexicographically_less);
      for (Eigen::Index i = start; i < end; ++i) split.eigenvectors.col(i) = group[i - start];
    }
    start = end;
  }
  return split;
}

SignalNoiseBases split_subspaces(const SubspaceSplit& split, int k) {
  const int n = split.size();
  if (k < 1 || k >= n) {
    throw std::invalid_argument("signal dimension " + std::to_string(k) + " must lie in [1, " + std::to_string(n) +
                                ")");
  }
  return {split.eigenvectors.leftCols(k), split.eigenvectors.rightCols(n - k)};
}

Tensor cnn_input_tensor(const SubspaceSplit& split) {
  const auto n = static_cast<std::size_t>(split.size());
  if (split.eigenvectors.rows() != split.eigenvectors.cols() || n == 0) {
    throw std::invalid_argument("cnn input needs the full square eigenvector matrix");
  }
  Tensor t({2, n, n});
  double* re = t.data();
  double* im = t.data() + n * n;
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      const std::complex<double> u = split.eigenvectors(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
      re[row * n + col] = u.real();
      im[row * n + col] = u.imag();
    }
  }
  return t;
}

}  // namespace nearfield
