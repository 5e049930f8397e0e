#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nearfield/dataset.hpp"
#include "nearfield/model.hpp"

namespace nearfield {

struct TrainingConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  std::size_t batch_size = 32;
  std::size_t epochs = 1200;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Defaults to the Cartesian box of the dataset prior.
  std::optional<CartesianBounds> label_bounds;

  void validate() const;
};

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta), all parameters.
void adamw_step(std::vector<ParamRef>& params, AdamWState& state, const TrainingConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // sample-weighted mean train-mode MSE, normalized labels
  double seconds = 0.0;
};

/// epoch=<n> loss=<v> seconds=<s>
std::string format_epoch_log(const EpochRecord& record);
/// One line echoing every hyperparameter that shapes a run.
std::string format_config_log(const Architecture& arch, const TrainingConfig& config);

struct TrainResult {
  LocatorModel model;
  std::vector<EpochRecord> history;
};

/// Mini-batch index lists for one epoch: shuffled, never holding a single
/// sample (a trailing singleton joins the previous batch; a one-record
/// dataset is repeated to fill a batch of two).
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng);

/// Throws TrainingDiverged when the loss stops being finite.
TrainResult train(const Dataset& dataset, const Architecture& arch, const TrainingConfig& config, Rng& rng,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean squared error in normalized label space, infer mode.
double evaluate_mse(LocatorModel& model, const Dataset& dataset);

}  // namespace nearfield
