#include "nearfield/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace nearfield {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ImageShape {
  std::size_t batch;
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  bool batched;
};

ImageShape image_shape(const Tensor& t, const char* op) {
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  throw std::invalid_argument(std::string(op) + " expects (C,H,W) or (B,C,H,W), got " + t.shape_string());
}

std::vector<std::size_t> image_dims(const ImageShape& s, std::size_t c, std::size_t h, std::size_t w) {
  if (s.batched) return {s.batch, c, h, w};
  return {c, h, w};
}

// Rows are (channel, ky, kx); columns are output pixels.
void im2col(const double* x, std::size_t channels, std::size_t h, std::size_t w, double* col) {
  const std::size_t pixels = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = x + c * pixels;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = col + ((c * 3 + ky) * 3 + kx) * pixels;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          double* out = row + y * w;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(out, out + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x0 = 0; x0 < w; ++x0) {
            const long sx = static_cast<long>(x0 + kx) - 1;
            out[x0] = (sx < 0 || sx >= static_cast<long>(w)) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t channels, std::size_t h, std::size_t w, double* dx) {
  const std::size_t pixels = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = dx + c * pixels;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = col + ((c * 3 + ky) * 3 + kx) * pixels;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          const double* in = row + y * w;
          for (std::size_t x0 = 0; x0 < w; ++x0) {
            const long sx = static_cast<long>(x0 + kx) - 1;
            if (sx >= 0 && sx < static_cast<long>(w)) dst[sx] += in[x0];
          }
        }
      }
    }
  }
}

// (B, C, S) view used by batch norm: S is 1 for dense features.
struct ChannelView {
  std::size_t batch;
  std::size_t channels;
  std::size_t spatial;
};

ChannelView channel_view(const Tensor& t) {
  if (t.rank() < 2) throw std::invalid_argument("batch norm expects a batched tensor, got " + t.shape_string());
  std::size_t spatial = 1;
  for (std::size_t i = 2; i < t.rank(); ++i) spatial *= t.dim(i);
  return {t.dim(0), t.dim(1), spatial};
}

struct NormalizeResult {
  Tensor output;
  Tensor normalized;
  std::vector<double> inv_std;
};

NormalizeResult batchnorm_apply(const Tensor& input, BatchNormParams& p, Mode mode) {
  const ChannelView v = channel_view(input);
  if (v.channels != p.channels()) {
    throw std::invalid_argument("batch norm channel mismatch: " + std::to_string(v.channels) + " vs " +
                                std::to_string(p.channels()));
  }
  if (mode == Mode::Train && v.batch < 2) throw std::invalid_argument("batch norm needs at least 2 samples in train mode");

  NormalizeResult r{Tensor(input.shape()), Tensor(input.shape()), std::vector<double>(v.channels)};
  const double* x = input.data();
  const double count = static_cast<double>(v.batch * v.spatial);
  for (std::size_t c = 0; c < v.channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t b = 0; b < v.batch; ++b) {
        const double* src = x + (b * v.channels + c) * v.spatial;
        for (std::size_t s = 0; s < v.spatial; ++s) mean += src[s];
      }
      mean /= count;
      for (std::size_t b = 0; b < v.batch; ++b) {
        const double* src = x + (b * v.channels + c) * v.spatial;
        for (std::size_t s = 0; s < v.spatial; ++s) var += (src[s] - mean) * (src[s] - mean);
      }
      var /= count;
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * mean;
      p.running_var[c] = (1.0 - p.momentum) * p.running_var[c] + p.momentum * unbiased;
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + p.epsilon);
    r.inv_std[c] = inv_std;
    for (std::size_t b = 0; b < v.batch; ++b) {
      const std::size_t off = (b * v.channels + c) * v.spatial;
      for (std::size_t s = 0; s < v.spatial; ++s) {
        const double xhat = (x[off + s] - mean) * inv_std;
        r.normalized[off + s] = xhat;
        r.output[off + s] = p.gamma[c] * xhat + p.beta[c];
      }
    }
  }
  return r;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
  }
}

void append_param(std::vector<ParamRef>& out, const std::string& prefix, const char* name, AlignedBuffer& value,
                  AlignedBuffer& grad) {
  out.push_back({prefix + "." + name, value, grad});
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& p) {
  const ImageShape s = image_shape(input, "conv2d");
  if (s.channels != p.in_channels) {
    throw std::invalid_argument("conv2d expects " + std::to_string(p.in_channels) + " input channels, got " +
                                std::to_string(s.channels));
  }
  const std::size_t pixels = s.height * s.width;
  Tensor output(image_dims(s, p.out_channels, s.height, s.width));
  AlignedBuffer col(p.in_channels * 9 * pixels);
  ConstMatrixMap weight(p.kernels.data(), p.out_channels, p.in_channels * 9);
  ConstMatrixMap col_map(col.data(), p.in_channels * 9, pixels);
  Eigen::Map<const Eigen::VectorXd> bias(p.bias.data(), p.out_channels);
  for (std::size_t b = 0; b < s.batch; ++b) {
    im2col(input.data() + b * s.channels * pixels, s.channels, s.height, s.width, col.data());
    MatrixMap out(output.data() + b * p.out_channels * pixels, p.out_channels, pixels);
    out.noalias() = weight * col_map;
    out.colwise() += bias;
  }
  return output;
}

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params, Mode mode) {
  return batchnorm_apply(input, params, mode).output;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor maxpool_2x2(const Tensor& input) {
  const ImageShape s = image_shape(input, "maxpool");
  const std::size_t oh = s.height / 2;
  const std::size_t ow = s.width / 2;
  if (oh == 0 || ow == 0) throw std::invalid_argument("maxpool needs at least 2x2 spatial input");
  Tensor out(image_dims(s, s.channels, oh, ow));
  for (std::size_t plane = 0; plane < s.batch * s.channels; ++plane) {
    const double* src = input.data() + plane * s.height * s.width;
    double* dst = out.data() + plane * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const double* p = src + 2 * y * s.width + 2 * x;
        dst[y * ow + x] = std::max(std::max(p[0], p[1]), std::max(p[s.width], p[s.width + 1]));
      }
    }
  }
  return out;
}

namespace {

std::size_t bin_start(std::size_t i, std::size_t in, std::size_t out) { return (i * in) / out; }
std::size_t bin_end(std::size_t i, std::size_t in, std::size_t out) { return ((i + 1) * in + out - 1) / out; }

}  // namespace

Tensor adaptive_avg_pool(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  const ImageShape s = image_shape(input, "adaptive_avg_pool");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("adaptive pool target must be positive");
  Tensor out(image_dims(s, s.channels, out_h, out_w));
  for (std::size_t plane = 0; plane < s.batch * s.channels; ++plane) {
    const double* src = input.data() + plane * s.height * s.width;
    double* dst = out.data() + plane * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const std::size_t y0 = bin_start(i, s.height, out_h), y1 = bin_end(i, s.height, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const std::size_t x0 = bin_start(j, s.width, out_w), x1 = bin_end(j, s.width, out_w);
        double sum = 0.0;
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) sum += src[y * s.width + x];
        }
        dst[i * out_w + j] = sum / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

Tensor linear_forward(const Tensor& input, const FcLayerParams& p) {
  if (input.rank() != 2 || input.dim(1) != p.in_features) {
    throw std::invalid_argument("linear layer expects (B, " + std::to_string(p.in_features) + "), got " +
                                input.shape_string());
  }
  const std::size_t batch = input.dim(0);
  Tensor out({batch, p.out_features});
  ConstMatrixMap x(input.data(), batch, p.in_features);
  ConstMatrixMap w(p.weight.data(), p.out_features, p.in_features);
  MatrixMap y(out.data(), batch, p.out_features);
  y.noalias() = x * w.transpose();
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.bias.data(), p.out_features);
  return out;
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
  check_same_shape(prediction, target, "mse_loss");
  if (prediction.size() == 0) throw std::invalid_argument("mse_loss on empty tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(prediction.size());
}

Tensor mse_loss_gradient(const Tensor& prediction, const Tensor& target) {
  check_same_shape(prediction, target, "mse_loss");
  Tensor grad(prediction.shape());
  const double scale = 2.0 / static_cast<double>(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) grad[i] = scale * (prediction[i] - target[i]);
  return grad;
}

// Conv2d

Tensor Conv2d::forward(const Tensor& input, ForwardContext&) {
  input_ = input;
  return conv2d_forward(input, params_);
}

Tensor Conv2d::backward(const Tensor& grad_output) {
  const ImageShape s = image_shape(input_, "conv2d");
  const std::size_t pixels = s.height * s.width;
  const std::size_t rows = params_.in_channels * 9;
  Tensor grad_input(input_.shape());
  AlignedBuffer col(rows * pixels);
  AlignedBuffer dcol(rows * pixels);
  ConstMatrixMap weight(params_.kernels.data(), params_.out_channels, rows);
  MatrixMap grad_weight(grads_.kernels.data(), params_.out_channels, rows);
  Eigen::Map<Eigen::VectorXd> grad_bias(grads_.bias.data(), params_.out_channels);
  ConstMatrixMap col_map(col.data(), rows, pixels);
  MatrixMap dcol_map(dcol.data(), rows, pixels);
  for (std::size_t b = 0; b < s.batch; ++b) {
    ConstMatrixMap dy(grad_output.data() + b * params_.out_channels * pixels, params_.out_channels, pixels);
    im2col(input_.data() + b * s.channels * pixels, s.channels, s.height, s.width, col.data());
    grad_weight.noalias() += dy * col_map.transpose();
    grad_bias += dy.rowwise().sum();
    dcol_map.noalias() = weight.transpose() * dy;
    col2im_add(dcol.data(), s.channels, s.height, s.width, grad_input.data() + b * s.channels * pixels);
  }
  return grad_input;
}

void Conv2d::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  append_param(out, prefix, "weight", params_.kernels, grads_.kernels);
  append_param(out, prefix, "bias", params_.bias, grads_.bias);
}

void Conv2d::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + ".weight", params_.kernels});
  out.push_back({prefix + ".bias", params_.bias});
}

// BatchNorm

Tensor BatchNorm::forward(const Tensor& input, ForwardContext& ctx) {
  mode_ = ctx.mode;
  NormalizeResult r = batchnorm_apply(input, params_, ctx.mode);
  normalized_ = std::move(r.normalized);
  inv_std_ = std::move(r.inv_std);
  return std::move(r.output);
}

Tensor BatchNorm::backward(const Tensor& grad_output) {
  const ChannelView v = channel_view(normalized_);
  check_same_shape(grad_output, normalized_, "batch norm backward");
  Tensor grad_input(normalized_.shape());
  const double count = static_cast<double>(v.batch * v.spatial);
  for (std::size_t c = 0; c < v.channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < v.batch; ++b) {
      const std::size_t off = (b * v.channels + c) * v.spatial;
      for (std::size_t s = 0; s < v.spatial; ++s) {
        sum_dy += grad_output[off + s];
        sum_dy_xhat += grad_output[off + s] * normalized_[off + s];
      }
    }
    grad_gamma_[c] += sum_dy_xhat;
    grad_beta_[c] += sum_dy;
    const double g = params_.gamma[c] * inv_std_[c];
    for (std::size_t b = 0; b < v.batch; ++b) {
      const std::size_t off = (b * v.channels + c) * v.spatial;
      for (std::size_t s = 0; s < v.spatial; ++s) {
        if (mode_ == Mode::Train) {
          grad_input[off + s] =
              g * (grad_output[off + s] - sum_dy / count - normalized_[off + s] * sum_dy_xhat / count);
        } else {
          grad_input[off + s] = g * grad_output[off + s];
        }
      }
    }
  }
  return grad_input;
}

void BatchNorm::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  append_param(out, prefix, "gamma", params_.gamma, grad_gamma_);
  append_param(out, prefix, "beta", params_.beta, grad_beta_);
}

void BatchNorm::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + ".gamma", params_.gamma});
  out.push_back({prefix + ".beta", params_.beta});
  out.push_back({prefix + ".running_mean", params_.running_mean});
  out.push_back({prefix + ".running_var", params_.running_var});
}

// ReLU

Tensor ReLU::forward(const Tensor& input, ForwardContext&) {
  output_ = relu(input);
  return output_;
}

Tensor ReLU::backward(const Tensor& grad_output) {
  check_same_shape(grad_output, output_, "relu backward");
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output_[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

void ReLU::collect_pattern(std::vector<std::size_t>& out) const {
  for (std::size_t i = 0; i < output_.size(); ++i) out.push_back(output_[i] > 0.0 ? 1 : 0);
}

// MaxPool2x2

Tensor MaxPool2x2::forward(const Tensor& input, ForwardContext&) {
  const ImageShape s = image_shape(input, "maxpool");
  input_shape_ = input.shape();
  Tensor out = maxpool_2x2(input);
  const std::size_t oh = s.height / 2, ow = s.width / 2;
  argmax_.assign(out.size(), 0);
  for (std::size_t plane = 0; plane < s.batch * s.channels; ++plane) {
    const std::size_t base = plane * s.height * s.width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t candidates[4] = {base + 2 * y * s.width + 2 * x, base + 2 * y * s.width + 2 * x + 1,
                                           base + (2 * y + 1) * s.width + 2 * x,
                                           base + (2 * y + 1) * s.width + 2 * x + 1};
        std::size_t best = candidates[0];
        for (std::size_t i = 1; i < 4; ++i) {
          if (input[candidates[i]] > input[best]) best = candidates[i];
        }
        argmax_[plane * oh * ow + y * ow + x] = best;
      }
    }
  }
  return out;
}

Tensor MaxPool2x2::backward(const Tensor& grad_output) {
  Tensor grad(input_shape_);
  for (std::size_t i = 0; i < grad_output.size(); ++i) grad[argmax_[i]] += grad_output[i];
  return grad;
}

// AdaptiveAvgPool

Tensor AdaptiveAvgPool::forward(const Tensor& input, ForwardContext&) {
  input_shape_ = input.shape();
  return adaptive_avg_pool(input, out_h_, out_w_);
}

Tensor AdaptiveAvgPool::backward(const Tensor& grad_output) {
  Tensor grad(input_shape_);
  const ImageShape s = image_shape(grad, "adaptive_avg_pool");
  for (std::size_t plane = 0; plane < s.batch * s.channels; ++plane) {
    double* dst = grad.data() + plane * s.height * s.width;
    const double* src = grad_output.data() + plane * out_h_ * out_w_;
    for (std::size_t i = 0; i < out_h_; ++i) {
      const std::size_t y0 = bin_start(i, s.height, out_h_), y1 = bin_end(i, s.height, out_h_);
      for (std::size_t j = 0; j < out_w_; ++j) {
        const std::size_t x0 = bin_start(j, s.width, out_w_), x1 = bin_end(j, s.width, out_w_);
        const double share = src[i * out_w_ + j] / static_cast<double>((y1 - y0) * (x1 - x0));
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) dst[y * s.width + x] += share;
        }
      }
    }
  }
  return grad;
}

// Flatten

Tensor Flatten::forward(const Tensor& input, ForwardContext&) {
  if (input.rank() < 2) throw std::invalid_argument("flatten expects a batched tensor");
  input_shape_ = input.shape();
  return input.reshaped({input.dim(0), input.stride0()});
}

Tensor Flatten::backward(const Tensor& grad_output) { return grad_output.reshaped(input_shape_); }

// Linear

Tensor Linear::forward(const Tensor& input, ForwardContext&) {
  input_ = input;
  return linear_forward(input, params_);
}

Tensor Linear::backward(const Tensor& grad_output) {
  const std::size_t batch = input_.dim(0);
  ConstMatrixMap x(input_.data(), batch, params_.in_features);
  ConstMatrixMap dy(grad_output.data(), batch, params_.out_features);
  ConstMatrixMap w(params_.weight.data(), params_.out_features, params_.in_features);
  MatrixMap dw(grads_.weight.data(), params_.out_features, params_.in_features);
  dw.noalias() += dy.transpose() * x;
  Eigen::Map<Eigen::RowVectorXd>(grads_.bias.data(), params_.out_features) += dy.colwise().sum();
  Tensor grad_input(input_.shape());
  MatrixMap dx(grad_input.data(), batch, params_.in_features);
  dx.noalias() = dy * w;
  return grad_input;
}

void Linear::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  append_param(out, prefix, "weight", params_.weight, grads_.weight);
  append_param(out, prefix, "bias", params_.bias, grads_.bias);
}

void Linear::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  out.push_back({prefix + ".weight", params_.weight});
  out.push_back({prefix + ".bias", params_.bias});
}

// Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& input, ForwardContext& ctx) {
  if (ctx.mode == Mode::Infer || rate_ == 0.0) {
    mask_.assign(input.size(), 1.0);
    return input;
  }
  if (ctx.rng == nullptr) throw std::invalid_argument("dropout in train mode needs a generator");
  const double keep = 1.0 / (1.0 - rate_);
  mask_.resize(input.size());
  Tensor out = input;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask_[i] = u(ctx.rng->engine()) < rate_ ? 0.0 : keep;
    out[i] *= mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_output) {
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask_[i];
  return grad;
}

// Softmax

Tensor Softmax::forward(const Tensor& input, ForwardContext&) {
  if (input.rank() != 2) throw std::invalid_argument("softmax expects (B, F)");
  output_ = Tensor(input.shape());
  const std::size_t f = input.dim(1);
  for (std::size_t b = 0; b < input.dim(0); ++b) {
    const double* x = input.data() + b * f;
    double* y = output_.data() + b * f;
    const double mx = *std::max_element(x, x + f);
    double sum = 0.0;
    for (std::size_t i = 0; i < f; ++i) sum += (y[i] = std::exp(x[i] - mx));
    for (std::size_t i = 0; i < f; ++i) y[i] /= sum;
  }
  return output_;
}

Tensor Softmax::backward(const Tensor& grad_output) {
  Tensor grad(output_.shape());
  const std::size_t f = output_.dim(1);
  for (std::size_t b = 0; b < output_.dim(0); ++b) {
    const double* y = output_.data() + b * f;
    const double* dy = grad_output.data() + b * f;
    double dot = 0.0;
    for (std::size_t i = 0; i < f; ++i) dot += dy[i] * y[i];
    for (std::size_t i = 0; i < f; ++i) grad[b * f + i] = y[i] * (dy[i] - dot);
  }
  return grad;
}

// Sequential

Sequential& Sequential::add(std::string name, std::unique_ptr<Layer> layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& input, ForwardContext& ctx) {
  Tensor x = input;
  for (auto& [name, layer] : layers_) x = layer->forward(x, ctx);
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

void Sequential::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  for (auto& [name, layer] : layers_) layer->collect_parameters(prefix.empty() ? name : prefix + "." + name, out);
}

void Sequential::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  for (auto& [name, layer] : layers_) layer->collect_state(prefix.empty() ? name : prefix + "." + name, out);
}

void Sequential::collect_pattern(std::vector<std::size_t>& out) const {
  for (const auto& entry : layers_) entry.second->collect_pattern(out);
}

// Residual

Tensor Residual::forward(const Tensor& input, ForwardContext& ctx) {
  Tensor out = branch_.forward(input, ctx);
  check_same_shape(out, input, "residual block");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += input[i];
  return out;
}

Tensor Residual::backward(const Tensor& grad_output) {
  Tensor grad = branch_.backward(grad_output);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grad_output[i];
  return grad;
}

void Residual::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  branch_.collect_parameters(prefix, out);
}

void Residual::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
  branch_.collect_state(prefix, out);
}

Tensor residual_block_forward(const Tensor& input, Residual& block, ForwardContext& ctx) {
  return block.forward(input, ctx);
}

}  // namespace nearfield
