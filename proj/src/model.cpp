#include "nearfield/model.hpp"

#include <chrono>
#include <functional>
#include <cmath>
#include <stdexcept>

namespace nearfield {

namespace {

void add_conv_unit(Sequential& seq, const std::string& name, std::size_t in, std::size_t out, const Architecture& a) {
  seq.emplace<Conv2d>(name + ".conv", in, out);
  seq.emplace<BatchNorm>(name + ".bn", out, a.bn_epsilon, a.bn_momentum);
  seq.emplace<ReLU>(name + ".relu");
}

std::unique_ptr<Sequential> build_network(const Architecture& a) {
  auto net = std::make_unique<Sequential>();
  const auto& f = a.filters;

  auto& block1 = net->emplace<Sequential>("block1");
  add_conv_unit(block1, "unit1", 2, f[0], a);
  add_conv_unit(block1, "unit2", f[0], f[0], a);
  block1.emplace<MaxPool2x2>("pool");

  auto& block2 = net->emplace<Sequential>("block2");
  add_conv_unit(block2, "unit1", f[0], f[1], a);
  add_conv_unit(block2, "unit2", f[1], f[1], a);
  block2.emplace<MaxPool2x2>("pool");

  // Blocks 3 and 4: the shortcut spans the two channel-preserving units.
  auto& block3 = net->emplace<Sequential>("block3");
  add_conv_unit(block3, "unit1", f[1], f[2], a);
  auto& res3 = block3.emplace<Residual>("residual");
  add_conv_unit(res3.branch(), "unit2", f[2], f[2], a);
  add_conv_unit(res3.branch(), "unit3", f[2], f[2], a);

  auto& block4 = net->emplace<Sequential>("block4");
  add_conv_unit(block4, "unit1", f[2], f[3], a);
  auto& res4 = block4.emplace<Residual>("residual");
  add_conv_unit(res4.branch(), "unit2", f[3], f[3], a);
  add_conv_unit(res4.branch(), "unit3", f[3], f[3], a);
  block4.emplace<AdaptiveAvgPool>("pool", a.pool_size, a.pool_size);

  net->emplace<Flatten>("flatten");
  std::size_t width = f[3] * a.pool_size * a.pool_size;
  for (std::size_t i = 0; i < a.hidden.size(); ++i) {
    auto& fc = net->emplace<Sequential>("fc" + std::to_string(i + 1));
    fc.emplace<Linear>("linear", width, a.hidden[i]);
    fc.emplace<BatchNorm>("bn", a.hidden[i], a.bn_epsilon, a.bn_momentum);
    fc.emplace<ReLU>("relu");
    fc.emplace<Dropout>("dropout", a.dropout);
    width = a.hidden[i];
  }
  net->emplace<Linear>("output", width, a.num_outputs());
  if (a.output_activation == OutputActivation::Softmax) net->emplace<Softmax>("softmax");
  return net;
}

}  // namespace

std::string to_string(OutputActivation activation) {
  return activation == OutputActivation::Linear ? "linear" : "softmax";
}

OutputActivation parse_output_activation(const std::string& text) {
  if (text == "linear") return OutputActivation::Linear;
  if (text == "softmax") return OutputActivation::Softmax;
  throw std::invalid_argument("unknown output activation '" + text + "'");
}

void Architecture::validate() const {
  if (input_size < 4) throw std::invalid_argument("input size must be at least 4");
  if (num_sources < 1) throw std::invalid_argument("at least one source is required");
  for (std::size_t f : filters) {
    if (f == 0) throw std::invalid_argument("filter counts must be positive");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden widths must be positive");
  }
  if (pool_size == 0) throw std::invalid_argument("pool size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(bn_epsilon > 0.0)) throw std::invalid_argument("batch norm epsilon must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw std::invalid_argument("batch norm momentum must lie in (0, 1)");
}

Architecture paper_architecture(std::size_t input_size, std::size_t num_sources) {
  Architecture a;
  a.input_size = input_size;
  a.num_sources = num_sources;
  a.filters = {32, 64, 128, 256};
  a.hidden = {1024, 512, 256};
  a.dropout = 0.3;
  return a;
}

Architecture desk_architecture(std::size_t input_size, std::size_t num_sources) {
  Architecture a = paper_architecture(input_size, num_sources);
  a.filters = {8, 16, 32, 64};
  a.hidden = {128, 64, 32};
  return a;
}

std::size_t count_parameters(const Architecture& a) {
  LocatorModel model(a);
  std::size_t total = 0;
  for (const ParamRef& p : model.parameters()) total += p.value.size();
  return total;
}

std::vector<double> LabelScaler::normalize(const std::vector<double>& meters) const {
  std::vector<double> out(meters.size());
  for (std::size_t i = 0; i < meters.size(); ++i) {
    const int axis = static_cast<int>(i % 3);
    out[i] = 2.0 * (meters[i] - lo(axis)) / (hi(axis) - lo(axis)) - 1.0;
  }
  return out;
}

std::vector<double> LabelScaler::denormalize(const std::vector<double>& normalized) const {
  std::vector<double> out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const int axis = static_cast<int>(i % 3);
    out[i] = lo(axis) + 0.5 * (normalized[i] + 1.0) * (hi(axis) - lo(axis));
  }
  return out;
}

LocatorModel::LocatorModel(const Architecture& arch, LabelScaler scaler)
    : arch_(arch), scaler_(std::move(scaler)), net_(nullptr) {
  arch_.validate();
  net_ = build_network(arch_);
}

void LocatorModel::initialize(Rng& rng) {
  // Walk the network in declaration order so initialization is reproducible.
  std::function<void(Sequential&)> visit = [&](Sequential& seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      Layer& layer = seq.at(i);
      if (auto* s = dynamic_cast<Sequential*>(&layer)) {
        visit(*s);
      } else if (auto* r = dynamic_cast<Residual*>(&layer)) {
        visit(r->branch());
      } else if (auto* conv = dynamic_cast<Conv2d*>(&layer)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(conv->params().in_channels * 9));
        for (double& w : conv->params().kernels) w = rng.uniform(-bound, bound);
        for (double& b : conv->params().bias) b = rng.uniform(-bound, bound);
      } else if (auto* fc = dynamic_cast<Linear*>(&layer)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fc->params().in_features));
        for (double& w : fc->params().weight) w = rng.uniform(-bound, bound);
        for (double& b : fc->params().bias) b = rng.uniform(-bound, bound);
      } else if (auto* bn = dynamic_cast<BatchNorm*>(&layer)) {
        auto& p = bn->params();
        std::fill(p.gamma.begin(), p.gamma.end(), 1.0);
        std::fill(p.beta.begin(), p.beta.end(), 0.0);
        std::fill(p.running_mean.begin(), p.running_mean.end(), 0.0);
        std::fill(p.running_var.begin(), p.running_var.end(), 1.0);
      }
    }
  };
  visit(*net_);
}

Tensor LocatorModel::forward(const Tensor& batch, ForwardContext& ctx) {
  const std::size_t n = arch_.input_size;
  if (batch.rank() != 4 || batch.dim(1) != 2 || batch.dim(2) != n || batch.dim(3) != n) {
    throw std::invalid_argument("model expects (B, 2, " + std::to_string(n) + ", " + std::to_string(n) + "), got " +
                                batch.shape_string());
  }
  return net_->forward(batch, ctx);
}

Tensor LocatorModel::backward(const Tensor& grad_output) { return net_->backward(grad_output); }

std::vector<ParamRef> LocatorModel::parameters() {
  std::vector<ParamRef> out;
  net_->collect_parameters("", out);
  return out;
}

std::vector<StateRef> LocatorModel::state() {
  std::vector<StateRef> out;
  net_->collect_state("", out);
  return out;
}

void LocatorModel::zero_grad() {
  for (ParamRef& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

Tensor model_forward(LocatorModel& model, const Tensor& batch, Mode mode, Rng* rng) {
  ForwardContext ctx{mode, rng};
  return model.forward(batch, ctx);
}

std::vector<SourcePosition> outputs_to_sources(const LabelScaler& scaler, std::span<const double> outputs) {
  if (outputs.size() % 3 != 0) throw std::invalid_argument("output length must be a multiple of 3");
  const std::vector<double> meters = scaler.denormalize(std::vector<double>(outputs.begin(), outputs.end()));
  std::vector<SourcePosition> sources;
  for (std::size_t i = 0; i < meters.size(); i += 3) {
    const Vec3 xyz(meters[i], meters[i + 1], meters[i + 2]);
    const Vec3 s = cartesian_to_spherical(xyz);
    sources.push_back({s.x(), s.y(), s.z(), xyz});
  }
  return sources;
}

LocationEstimate predict(LocatorModel& model, const SubspaceSplit& split) {
  const std::size_t n = model.architecture().input_size;
  if (static_cast<std::size_t>(split.size()) != n) {
    throw std::invalid_argument("model expects N = " + std::to_string(n) + ", got " + std::to_string(split.size()));
  }
  const auto start = std::chrono::steady_clock::now();
  const Tensor input = cnn_input_tensor(split).reshaped({1, 2, n, n});
  const Tensor output = model_forward(model, input, Mode::Infer);
  LocationEstimate estimate;
  estimate.method = Method::Cnn;
  estimate.positions = outputs_to_sources(model.scaler(), output.values());
  estimate.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return estimate;
}

}  // namespace nearfield
