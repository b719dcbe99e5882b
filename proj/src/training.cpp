#include "accudrive/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace accudrive::training {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (max_grad_norm < 0.0) throw ConfigError("max gradient norm must be non-negative");
}

AdamState make_adam_state(const model::ModelParams& params) {
  return {model::zeros_like(params), model::zeros_like(params), 0};
}

void adam_step(AdamState& state, model::ModelParams& params, const model::ModelParams& grads,
               const TrainConfig& config) {
  double norm_sq = 0.0;
  model::for_each_param(
      [&](const std::string& name, const Tensor& g) {
        for (double v : g.values()) {
          if (!std::isfinite(v)) throw NumericError("non-finite gradient in parameter group '" + name + "'");
          norm_sq += v * v;
        }
      },
      grads);
  double clip = 1.0;
  if (config.max_grad_norm > 0.0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > config.max_grad_norm) clip = config.max_grad_norm / norm;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  model::for_each_param(
      [&](const std::string&, Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double gi = g[i] * clip;
          m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
          v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
          const double m_hat = m[i] / correction1;
          const double v_hat = v[i] / correction2;
          p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
      },
      params, grads, state.first, state.second);
}

std::array<double, 3> control_mae(std::span<const Tensor> predictions,
                                  std::span<const Tensor> observations,
                                  std::span<const std::vector<double>> masks) {
  if (predictions.empty()) throw ArgumentError("loss of an empty batch");
  if (predictions.size() != observations.size() || predictions.size() != masks.size()) {
    throw DimensionError("loss: batch sizes of predictions, observations and masks differ");
  }
  std::array<double, 3> total{};
  double weight = 0.0;
  for (std::size_t n = 0; n < predictions.size(); ++n) {
    const Tensor& p = predictions[n];
    const Tensor& o = observations[n];
    const std::vector<double>& m = masks[n];
    if (!p.same_shape(o) || p.cols() != 3 || m.size() != p.rows()) {
      throw DimensionError("loss: trip " + std::to_string(n) + " has predictions " + p.shape() +
                           ", observations " + o.shape() + " and " + std::to_string(m.size()) +
                           " mask entries");
    }
    for (std::size_t t = 0; t < p.rows(); ++t) {
      if (m[t] == 0.0) continue;
      weight += m[t];
      for (std::size_t c = 0; c < 3; ++c) total[c] += m[t] * std::abs(p(t, c) - o(t, c));
    }
  }
  if (!(weight > 0.0)) throw DegenerateError("loss: masks contain no valid steps");
  for (double& v : total) v /= weight;
  return total;
}

double loss(std::span<const Tensor> predictions, std::span<const Tensor> observations,
            std::span<const std::vector<double>> masks) {
  const auto mae = control_mae(predictions, observations, masks);
  return mae[0] + mae[1] + mae[2];
}

Split split_leave_one_out(const data::Dataset& dataset, std::string_view driver) {
  const std::vector<std::string> drivers = dataset.drivers();
  if (std::find(drivers.begin(), drivers.end(), driver) == drivers.end()) {
    std::string available;
    for (const auto& d : drivers) available += (available.empty() ? "" : ", ") + d;
    throw ArgumentError("unknown holdout driver '" + std::string(driver) + "'; available: " + available);
  }
  Split split;
  for (const data::Trip& trip : dataset.trips) {
    (trip.driver_id == driver ? split.validation : split.train).push_back(trip);
  }
  for (const auto& d : drivers) {
    if (d != driver) split.train_drivers.push_back(d);
  }
  return split;
}

double batch_loss(const model::Model& model, const data::Batch& batch) {
  std::vector<Tensor> predictions;
  predictions.reserve(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    predictions.push_back(model::simulate_trip(model, batch.inputs[n], batch.drivers[n]).predictions);
  }
  return loss(predictions, batch.outputs, batch.masks);
}

double batch_loss_and_gradients(const model::Model& model, const data::Batch& batch,
                                model::ModelParams& grads, std::size_t truncation) {
  if (batch.size() == 0) throw ArgumentError("loss of an empty batch");
  double weight = 0.0;
  for (const auto& mask : batch.masks) {
    for (double m : mask) weight += m;
  }
  if (!(weight > 0.0)) throw DegenerateError("loss: masks contain no valid steps");

  grads = model::zeros_like(model.params);
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    diff::Graph graph;
    const model::ModelVars vars = model::bind(graph, model.params);
    const model::TripGraph trip =
        model::forward_trip(graph, vars, model, batch.inputs[n], batch.drivers[n], truncation);
    const Tensor& observed = batch.outputs[n];
    diff::Var root;
    for (std::size_t c = 0; c < motor::kControls; ++c) {
      Tensor column(observed.rows(), 1);
      for (std::size_t t = 0; t < observed.rows(); ++t) column[t] = observed(t, c);
      const diff::Var term =
          diff::scale(diff::masked_abs_sum(trip.predictions[c], column, batch.masks[n]), 1.0 / weight);
      root = c == 0 ? term : diff::add(root, term);
    }
    total += root.value().item();
    graph.backward(root);
    const model::ModelParams trip_grads = model::gradients(graph, vars);
    model::for_each_param(
        [](const std::string&, Tensor& acc, const Tensor& g) {
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        },
        grads, trip_grads);
  }
  return total;
}

TrainResult fit(std::span<const data::Trip> train_raw, std::span<const data::Trip> validation_raw,
                const model::ModelConfig& model_config, const TrainConfig& config,
                const EpochCallback& on_epoch) {
  config.validate();
  if (train_raw.empty()) throw ArgumentError("training set is empty");
  if (validation_raw.empty()) throw ArgumentError("validation set is empty");

  const data::Scalers scalers = data::fit_scalers(train_raw);
  const std::vector<data::Trip> train_trips = data::apply(scalers, train_raw);
  const std::vector<data::Trip> val_trips = data::apply(scalers, validation_raw);
  const data::Batch train_batch = data::pad_and_mask(train_trips);
  const data::Batch val_batch = data::pad_and_mask(val_trips);

  std::vector<std::string> drivers;
  for (const data::Trip& trip : train_trips) drivers.push_back(trip.driver_id);
  std::sort(drivers.begin(), drivers.end());
  drivers.erase(std::unique(drivers.begin(), drivers.end()), drivers.end());

  model::ModelConfig cfg = model_config;
  cfg.seed = config.seed;
  model::Model model = model::init_model(cfg, drivers);
  AdamState adam = make_adam_state(model.params);

  TrainResult result;
  result.best = {model, scalers, 0};
  double best_val = std::numeric_limits<double>::infinity();
  model::ModelParams grads;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = batch_loss_and_gradients(model, train_batch, grads, config.truncation);
    record.val_loss = std::isfinite(record.train_loss) ? batch_loss(model, val_batch)
                                                       : record.train_loss;
    if (!std::isfinite(record.train_loss) || !std::isfinite(record.val_loss)) {
      model::Checkpoint last{model, scalers, epoch - 1};
      if (epoch > 1) last = {result.final_model, scalers, epoch - 1};
      throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch),
                             std::move(last), std::move(result.log));
    }
    result.log.push_back(record);
    if (record.val_loss < best_val) {
      best_val = record.val_loss;
      result.best = {model, scalers, epoch};
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(record);
    result.final_model = model;
    adam_step(adam, model.params, grads, config);
  }
  result.final_model = model;
  return result;
}

TrainResult train(const data::Dataset& dataset, const model::ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (dataset.drivers().size() < 2) throw ArgumentError("training needs at least two drivers");
  const Split split = split_leave_one_out(dataset, config.holdout);
  return fit(split.train, split.validation, model_config, config, on_epoch);
}

void write_loss_log(std::ostream& out, std::span<const EpochRecord> log) {
  out << "epoch,train_loss,val_loss\n";
  for (const EpochRecord& r : log) {
    out << r.epoch << ',' << model::format_exact(r.train_loss) << ','
        << model::format_exact(r.val_loss) << '\n';
  }
}

}  // namespace accudrive::training
