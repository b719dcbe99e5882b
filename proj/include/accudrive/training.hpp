#pragma once

// Full-batch BPTT training with Adam on the pooled, masked multi-output MAE.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accudrive/checkpoint.hpp"
#include "accudrive/data.hpp"
#include "accudrive/errors.hpp"
#include "accudrive/model.hpp"

namespace accudrive::training {

struct TrainConfig {
  std::size_t epochs = 750;
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::string holdout;         // driver whose trips form the validation set
  std::uint64_t seed = 0;      // parameter initialization
  double max_grad_norm = 0.0;  // 0 disables clipping
  std::size_t truncation = 0;  // BPTT window in steps, 0 = whole trip

  void validate() const;
};

struct AdamState {
  model::ModelParams first;
  model::ModelParams second;
  std::size_t step = 0;
};

AdamState make_adam_state(const model::ModelParams& params);

// Bias-corrected Adam. Throws NumericError naming the parameter group if a
// gradient is not finite; parameters are left untouched in that case.
void adam_step(AdamState& state, model::ModelParams& params, const model::ModelParams& grads,
               const TrainConfig& config);

// Per-control MAE pooled over every valid step of every trip. predictions
// and observations are [T x 3] per trip.
std::array<double, 3> control_mae(std::span<const Tensor> predictions,
                                  std::span<const Tensor> observations,
                                  std::span<const std::vector<double>> masks);

// Sum of the three pooled MAEs.
double loss(std::span<const Tensor> predictions, std::span<const Tensor> observations,
            std::span<const std::vector<double>> masks);

struct Split {
  std::vector<data::Trip> train;
  std::vector<data::Trip> validation;
  std::vector<std::string> train_drivers;  // sorted; the embedding vocabulary
};

// Throws ArgumentError listing the available drivers if `driver` is unknown.
Split split_leave_one_out(const data::Dataset& dataset, std::string_view driver);

// Loss of a scaled, padded batch through the plain simulation route.
double batch_loss(const model::Model& model, const data::Batch& batch);

// Loss and its gradient through the graph route. Trips are differentiated one
// at a time and their gradients summed in batch order.
double batch_loss_and_gradients(const model::Model& model, const data::Batch& batch,
                                model::ModelParams& grads, std::size_t truncation = 0);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  model::Checkpoint best;  // parameters with the lowest validation loss
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  model::Model final_model;  // parameters after the last update
};

// Thrown when a loss turns non-finite. Carries the last parameters whose
// loss was finite.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& message, model::Checkpoint last_finite,
                   std::vector<EpochRecord> log)
      : NumericError(message), last_finite_(std::move(last_finite)), log_(std::move(log)) {}

  const model::Checkpoint& last_finite() const { return last_finite_; }
  const std::vector<EpochRecord>& log() const { return log_; }

 private:
  model::Checkpoint last_finite_;
  std::vector<EpochRecord> log_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fits scalers on train_raw, applies them to both sets, then runs the epoch
// loop. Losses of epoch e are measured on the parameters before update e.
TrainResult fit(std::span<const data::Trip> train_raw, std::span<const data::Trip> validation_raw,
                const model::ModelConfig& model_config, const TrainConfig& config,
                const EpochCallback& on_epoch = {});

// Leave-one-driver-out split on config.holdout, then fit().
TrainResult train(const data::Dataset& dataset, const model::ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// CSV: epoch,train_loss,val_loss
void write_loss_log(std::ostream& out, std::span<const EpochRecord> log);

}  // namespace accudrive::training
