#pragma once

#include <Eigen/Dense>

#include "nearfield/array_model.hpp"
#include "nearfield/tensor.hpp"

namespace nearfield {

struct SampleCovariance {
  CMatrix matrix;
  int num_snapshots = 0;

  int size() const { return static_cast<int>(matrix.rows()); }
};

/// Eigenvalues in non-increasing order with matching unit-norm eigenvector
/// columns. signal_dim is 0 until a source count has been assigned.
struct SubspaceSplit {
  Eigen::VectorXd eigenvalues;
  CMatrix eigenvectors;
  int signal_dim = 0;

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

struct SignalNoiseBases {
  CMatrix signal;
  CMatrix noise;
};

/// R = (1/T) sum x(t) x(t)^H, symmetrized to be exactly Hermitian.
SampleCovariance sample_covariance(const CMatrix& snapshots);
SampleCovariance sample_covariance(const SnapshotBatch& batch);

/// Hermitian eigendecomposition sorted by descending eigenvalue. Each
/// eigenvector is rotated so its largest-magnitude entry (lowest index on ties)
/// is real and positive; vectors of numerically equal eigenvalues are ordered
/// lexicographically after that rotation. Throws std::invalid_argument if the
/// input is not Hermitian.
SubspaceSplit eigendecompose(const SampleCovariance& cov);

/// Partitions the eigenvectors into the top-k signal and remaining noise bases.
SignalNoiseBases split_subspaces(const SubspaceSplit& split, int k);

/// 2 x N x N tensor holding Re(U) in channel 0 and Im(U) in channel 1.
Tensor cnn_input_tensor(const SubspaceSplit& split);

}  // namespace nearfield
