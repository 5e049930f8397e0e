#include "nearfield/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "nearfield/errors.hpp"

namespace nearfield {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("invalid AdamW moments");
  }
}

void adamw_step(std::vector<ParamRef>& params, AdamWState& state, const TrainingConfig& config) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].value.size(), 0.0);
      state.v[i].assign(params[i].value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double lr = config.learning_rate;
  const double wd = config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> theta = params[i].value;
    std::span<const double> g = params[i].grad;
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + wd * theta[j]);
    }
  }
}

std::string format_epoch_log(const EpochRecord& record) {
  return "epoch=" + std::to_string(record.epoch) + " loss=" + detail::format_double(record.loss) +
         " seconds=" + detail::format_double(record.seconds);
}

std::string format_config_log(const Architecture& arch, const TrainingConfig& config) {
  std::ostringstream s;
  s << "config optimizer=adamw lr=" << detail::format_double(config.learning_rate)
    << " weight_decay=" << detail::format_double(config.weight_decay) << " batch=" << config.batch_size
    << " epochs=" << config.epochs << " beta1=" << detail::format_double(config.beta1)
    << " beta2=" << detail::format_double(config.beta2) << " eps=" << detail::format_double(config.epsilon)
    << " dropout=" << detail::format_double(arch.dropout) << " loss=mse init=fan_in_uniform"
    << " filters=" << arch.filters[0] << ',' << arch.filters[1] << ',' << arch.filters[2] << ',' << arch.filters[3]
    << " fc=" << arch.hidden[0] << ',' << arch.hidden[1] << ',' << arch.hidden[2]
    << " output=" << to_string(arch.output_activation) << " seed=" << config.seed;
  return s.str();
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
  if (count == 0) throw std::invalid_argument("cannot batch an empty dataset");
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng.engine());
  if (count == 1) return {{0, 0}};

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    if (end - start == 1) {
      batches.back().push_back(order[start]);
    } else {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return batches;
}

namespace {

Tensor label_batch(const Dataset& dataset, const LabelScaler& scaler, std::span<const std::size_t> indices,
                   std::size_t outputs) {
  Tensor labels({indices.size(), outputs});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::vector<double> norm = scaler.normalize(dataset.records.at(indices[b]).labels);
    if (norm.size() != outputs) throw std::invalid_argument("label count does not match the architecture");
    std::copy(norm.begin(), norm.end(), labels.data() + b * outputs);
  }
  return labels;
}

}  // namespace

TrainResult train(const Dataset& dataset, const Architecture& arch, const TrainingConfig& config, Rng& rng,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  arch.validate();
  if (dataset.size() == 0) throw std::invalid_argument("training dataset is empty");
  if (dataset.input_size() != arch.input_size ||
      static_cast<std::size_t>(dataset.prior.num_sources) != arch.num_sources) {
    throw std::invalid_argument("dataset shape does not match the architecture");
  }

  const CartesianBounds bounds = config.label_bounds.value_or(cartesian_bounds(dataset.prior));
  TrainResult result{LocatorModel(arch, LabelScaler::from_bounds(bounds)), {}};
  LocatorModel& model = result.model;
  Rng init_rng = rng.split(0);
  Rng shuffle_rng = rng.split(1);
  Rng dropout_rng = rng.split(2);
  model.initialize(init_rng);

  std::vector<ParamRef> params = model.parameters();
  AdamWState state;
  ForwardContext ctx{Mode::Train, &dropout_rng};

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double weighted = 0.0;
    std::size_t seen = 0;
    for (const std::vector<std::size_t>& batch : epoch_batches(dataset.size(), config.batch_size, shuffle_rng)) {
      const Tensor input = input_batch(dataset, batch);
      const Tensor target = label_batch(dataset, model.scaler(), batch, arch.num_outputs());
      model.zero_grad();
      const Tensor output = model.forward(input, ctx);
      const double loss = mse_loss(output, target);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("training loss is not finite at epoch " + std::to_string(epoch), static_cast<int>(epoch));
      }
      model.backward(mse_loss_gradient(output, target));
      adamw_step(params, state, config);
      weighted += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    const EpochRecord record{epoch, weighted / static_cast<double>(seen),
                             std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

double evaluate_mse(LocatorModel& model, const Dataset& dataset) {
  if (dataset.size() == 0) throw std::invalid_argument("evaluation dataset is empty");
  double total = 0.0;
  const std::size_t chunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(dataset.size(), start + chunk); ++i) idx.push_back(i);
    const Tensor out = model_forward(model, input_batch(dataset, idx), Mode::Infer);
    const Tensor target = label_batch(dataset, model.scaler(), idx, model.architecture().num_outputs());
    total += mse_loss(out, target) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(dataset.size());
}

}  // namespace nearfield
