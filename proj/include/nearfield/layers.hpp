#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nearfield/rng.hpp"
#include "nearfield/tensor.hpp"

namespace nearfield {

enum class Mode { Train, Infer };

/// 3x3 kernels, stride 1, zero padding 1. kernels is out x in x 3 x 3.
struct ConvLayerParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  AlignedBuffer kernels;
  AlignedBuffer bias;

  ConvLayerParams() = default;
  ConvLayerParams(std::size_t in, std::size_t out)
      : in_channels(in), out_channels(out), kernels(out * in * 9, 0.0), bias(out, 0.0) {}
};

struct BatchNormParams {
  AlignedBuffer gamma;
  AlignedBuffer beta;
  AlignedBuffer running_mean;
  AlignedBuffer running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;

  BatchNormParams() = default;
  explicit BatchNormParams(std::size_t channels, double eps = 1e-5, double mom = 0.1)
      : gamma(channels, 1.0), beta(channels, 0.0), running_mean(channels, 0.0), running_var(channels, 1.0),
        epsilon(eps), momentum(mom) {}
  std::size_t channels() const { return gamma.size(); }
};

/// weight is out x in, row-major.
struct FcLayerParams {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  AlignedBuffer weight;
  AlignedBuffer bias;

  FcLayerParams() = default;
  FcLayerParams(std::size_t in, std::size_t out) : in_features(in), out_features(out), weight(in * out, 0.0), bias(out, 0.0) {}
};

// Stateless forward operators. Inputs are either single samples (C x H x W)
// or batches (B x C x H x W); batch norm always expects a batch.

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params);
/// Train mode normalizes with batch statistics and updates the running
/// statistics in params; infer mode uses the running statistics.
Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params, Mode mode);
Tensor relu(const Tensor& input);
/// Non-overlapping 2x2 max, stride 2; odd trailing rows/columns are dropped.
Tensor maxpool_2x2(const Tensor& input);
/// Averages over bins [floor(i*H/h), ceil((i+1)*H/h)) to reach exactly h x w.
Tensor adaptive_avg_pool(const Tensor& input, std::size_t out_h, std::size_t out_w);
Tensor linear_forward(const Tensor& input, const FcLayerParams& params);

/// Mean squared error over every element of equally shaped tensors.
double mse_loss(const Tensor& prediction, const Tensor& target);
Tensor mse_loss_gradient(const Tensor& prediction, const Tensor& target);

/// Non-owning view of one learnable array and its gradient accumulator.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

/// Named array serialized with a model, learnable or not.
struct StateRef {
  std::string name;
  std::span<double> value;
};

struct ForwardContext {
  Mode mode = Mode::Infer;
  /// Dropout masks are drawn from here in train mode.
  Rng* rng = nullptr;
};

/// A differentiable stage. forward() caches what backward() needs; backward()
/// accumulates parameter gradients and returns the gradient of the input.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& input, ForwardContext& ctx) = 0;
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) { (void)prefix, (void)out; }
  virtual void collect_state(const std::string& prefix, std::vector<StateRef>& out) { (void)prefix, (void)out; }
  virtual std::string kind() const = 0;
  // Branch choices of piecewise-linear units in the last forward pass.
  virtual void collect_pattern(std::vector<std::size_t>& out) const { (void)out; }
};

class Conv2d : public Layer {
 public:
  Conv2d(std::size_t in, std::size_t out) : params_(in, out), grads_(in, out) {}
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  std::string kind() const override { return "conv"; }
  ConvLayerParams& params() { return params_; }

 private:
  ConvLayerParams params_;
  ConvLayerParams grads_;
  Tensor input_;
};

class BatchNorm : public Layer {
 public:
  explicit BatchNorm(std::size_t channels, double eps = 1e-5, double momentum = 0.1)
      : params_(channels, eps, momentum), grad_gamma_(channels, 0.0), grad_beta_(channels, 0.0) {}
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  std::string kind() const override { return "batchnorm"; }
  BatchNormParams& params() { return params_; }

 private:
  BatchNormParams params_;
  AlignedBuffer grad_gamma_;
  AlignedBuffer grad_beta_;
  Mode mode_ = Mode::Infer;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string kind() const override { return "relu"; }
  void collect_pattern(std::vector<std::size_t>& out) const override;

 private:
  Tensor output_;
};

class MaxPool2x2 : public Layer {
 public:
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string kind() const override { return "maxpool"; }
  void collect_pattern(std::vector<std::size_t>& out) const override { out.insert(out.end(), argmax_.begin(), argmax_.end()); }

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<std::size_t> argmax_;
};

class AdaptiveAvgPool : public Layer {
 public:
  AdaptiveAvgPool(std::size_t out_h, std::size_t out_w) : out_h_(out_h), out_w_(out_w) {}
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string kind() const override { return "adaptive_avg_pool"; }

 private:
  std::size_t out_h_;
  std::size_t out_w_;
  std::vector<std::size_t> input_shape_;
};

/// Collapses every non-batch axis.
class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string kind() const override { return "flatten"; }

 private:
  std::vector<std::size_t> input_shape_;
};

class Linear : public Layer {
 public:
  Linear(std::size_t in, std::size_t out) : params_(in, out), grads_(in, out) {}
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  std::string kind() const override { return "linear"; }
  FcLayerParams& params() { return params_; }

 private:
  FcLayerParams params_;
  FcLayerParams grads_;
  Tensor input_;
};

/// Inverted dropout: kept activations are scaled by 1/(1-rate) in train mode.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string kind() const override { return "dropout"; }

 private:
  double rate_;
  std::vector<double> mask_;
};

/// Row-wise softmax over the feature axis of a (B x F) tensor.
class Softmax : public Layer {
 public:
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  std::string kind() const override { return "softmax"; }

 private:
  Tensor output_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  Sequential& add(std::string name, std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L& emplace(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(name), std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  std::string kind() const override { return "sequential"; }
  void collect_pattern(std::vector<std::size_t>& out) const override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i).second; }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers_;
};

/// output = input + F(input); F must preserve the input shape.
class Residual : public Layer {
 public:
  Residual() = default;
  Sequential& branch() { return branch_; }
  Tensor forward(const Tensor& input, ForwardContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
  std::string kind() const override { return "residual"; }
  void collect_pattern(std::vector<std::size_t>& out) const override { branch_.collect_pattern(out); }

 private:
  Sequential branch_;
};

/// Functional form of a residual block: input + branch(input).
Tensor residual_block_forward(const Tensor& input, Residual& block, ForwardContext& ctx);

}  // namespace nearfield
