#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "nearfield/layers.hpp"
#include "nearfield/music.hpp"
#include "nearfield/scenario.hpp"
#include "nearfield/subspace.hpp"

namespace nearfield {

enum class OutputActivation { Linear, Softmax };

std::string to_string(OutputActivation activation);
OutputActivation parse_output_activation(const std::string& text);

/// Shape of the locator network: four convolutional blocks and three hidden
/// dense layers followed by a 3K output head.
struct Architecture {
  std::size_t input_size = 0;  // N, the eigenvector matrix is N x N
  std::size_t num_sources = 1;
  std::array<std::size_t, 4> filters{32, 64, 128, 256};
  std::array<std::size_t, 3> hidden{1024, 512, 256};
  std::size_t pool_size = 4;
  double dropout = 0.3;
  OutputActivation output_activation = OutputActivation::Linear;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  std::size_t num_outputs() const { return 3 * num_sources; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// 32-64-128-256 filters and 1024-512-256 dense widths.
Architecture paper_architecture(std::size_t input_size, std::size_t num_sources);
/// 8-16-32-64 filters and 128-64-32 dense widths.
Architecture desk_architecture(std::size_t input_size, std::size_t num_sources);

/// Learnable parameter count (conv, batch-norm affine, dense) of an architecture.
std::size_t count_parameters(const Architecture& arch);

/// Maps Cartesian labels to [-1, 1] per axis using a bounding box.
struct LabelScaler {
  Vec3 lo = Vec3::Constant(-1.0);
  Vec3 hi = Vec3::Constant(1.0);

  static LabelScaler from_bounds(const CartesianBounds& bounds) { return {bounds.lo, bounds.hi}; }
  std::vector<double> normalize(const std::vector<double>& meters) const;
  std::vector<double> denormalize(const std::vector<double>& normalized) const;
  bool operator==(const LabelScaler&) const = default;
};

/// The network together with its descriptor and label scaling.
class LocatorModel {
 public:
  explicit LocatorModel(const Architecture& arch, LabelScaler scaler = {});
  LocatorModel(const LocatorModel&) = delete;
  LocatorModel& operator=(const LocatorModel&) = delete;
  LocatorModel(LocatorModel&&) = default;
  LocatorModel& operator=(LocatorModel&&) = default;

  const Architecture& architecture() const { return arch_; }
  const LabelScaler& scaler() const { return scaler_; }
  void set_scaler(const LabelScaler& scaler) { scaler_ = scaler; }

  /// Fan-in scaled uniform weights, unit gamma, zero beta, fresh running stats.
  void initialize(Rng& rng);

  /// (B, 2, N, N) -> (B, 3K) in normalized label space.
  Tensor forward(const Tensor& batch, ForwardContext& ctx);
  Tensor backward(const Tensor& grad_output);

  std::vector<ParamRef> parameters();
  /// Every serialized array in declaration order (parameters and running stats).
  std::vector<StateRef> state();
  void zero_grad();

  Sequential& network() { return *net_; }

 private:
  Architecture arch_;
  LabelScaler scaler_;
  std::unique_ptr<Sequential> net_;
};

/// Runs the model in the given mode. Infer mode is deterministic.
Tensor model_forward(LocatorModel& model, const Tensor& batch, Mode mode, Rng* rng = nullptr);

/// Eigenvector tensor -> K source positions in the canonical order; the
/// elapsed time covers tensor construction and inference.
LocationEstimate predict(LocatorModel& model, const SubspaceSplit& split);

/// Normalized network outputs (3K) to source positions in meters.
std::vector<SourcePosition> outputs_to_sources(const LabelScaler& scaler, std::span<const double> outputs);

}  // namespace nearfield
