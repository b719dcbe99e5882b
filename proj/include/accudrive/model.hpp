#pragma once

// perception -> personalization -> accumulator -> three motor heads.
//
// Two routes compute the same forward pass: Simulator steps one timestamp at
// a time on plain doubles, while forward_trip builds a differentiable graph
// over the whole trip. They share every scalar kernel and agree bit for bit.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accudrive/accumulator.hpp"
#include "accudrive/diff.hpp"
#include "accudrive/motor.hpp"
#include "accudrive/perception.hpp"
#include "accudrive/personalization.hpp"
#include "accudrive/tensor.hpp"

namespace accudrive::model {

struct ModelConfig {
  std::size_t channels = 9;
  std::size_t expansion = 7;    // m
  std::size_t compression = 5;  // k
  std::size_t perception_layers = 2;
  std::size_t embedding_width = 10;  // E
  std::size_t motor_hidden = 0;      // 0 means "same as channels"
  double dt = 0.1;
  double threshold = 1.0;
  double sharpness = 4.0;
  double epsilon = 1e-6;
  double initial_leak = 0.1;
  double initial_log_rate = 6.0;
  std::uint64_t seed = 0;

  std::size_t features() const { return compression * channels; }
  std::size_t hidden() const { return motor_hidden == 0 ? channels : motor_hidden; }
  perception::PerceptionShape perception_shape() const {
    return {channels, expansion, compression, perception_layers};
  }
  accumulator::SpikeSettings spike_settings() const { return {threshold, sharpness}; }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

template <class T>
struct ModelParamsT {
  perception::PerceptionParamsT<T> perception;
  personalization::PersonalizationParamsT<T> personalization;
  accumulator::AccumulatorParamsT<T> accumulator;
  std::array<motor::MotorParamsT<T>, motor::kControls> motor;
};

using ModelParams = ModelParamsT<Tensor>;
using ModelVars = ModelParamsT<diff::Var>;

// Calls fn(name, a.field, b.field, ...) for every parameter in a fixed order.
// All bundles must have the same layer counts.
template <class Fn, class P, class... Ps>
void for_each_param(Fn&& fn, P& p, Ps&... ps) {
  for (std::size_t l = 0; l < p.perception.weights.size(); ++l) {
    const std::string n = std::to_string(l + 1);
    fn("perception.w" + n, p.perception.weights[l], ps.perception.weights[l]...);
    fn("perception.b" + n, p.perception.biases[l], ps.perception.biases[l]...);
  }
  fn(std::string("personalization.embedding"), p.personalization.embedding,
     ps.personalization.embedding...);
  fn(std::string("personalization.weight"), p.personalization.weight,
     ps.personalization.weight...);
  fn(std::string("personalization.bias"), p.personalization.bias, ps.personalization.bias...);
  fn(std::string("accumulator.leak_raw"), p.accumulator.leak_raw, ps.accumulator.leak_raw...);
  fn(std::string("accumulator.bias"), p.accumulator.bias, ps.accumulator.bias...);
  fn(std::string("accumulator.gain"), p.accumulator.gain, ps.accumulator.gain...);
  fn(std::string("accumulator.v_reset"), p.accumulator.v_reset, ps.accumulator.v_reset...);
  for (std::size_t c = 0; c < motor::kControls; ++c) {
    const std::string head(motor::kControlNames[c]);
    fn(head + ".proposal_bias", p.motor[c].proposal_bias, ps.motor[c].proposal_bias...);
    fn(head + ".proposal_gain", p.motor[c].proposal_gain, ps.motor[c].proposal_gain...);
    fn(head + ".log_rate", p.motor[c].log_rate, ps.motor[c].log_rate...);
    for (std::size_t l = 0; l < 3; ++l) {
      const std::string n = std::to_string(l + 1);
      fn(head + ".w" + n, p.motor[c].weights[l], ps.motor[c].weights[l]...);
      fn(head + ".b" + n, p.motor[c].biases[l], ps.motor[c].biases[l]...);
    }
  }
}

struct Model {
  ModelConfig config;
  std::vector<std::string> drivers;  // embedding vocabulary, row order
  ModelParams params;

  personalization::EmbeddingTable embedding_table() const {
    return {drivers, params.personalization.embedding};
  }
};

Model init_model(const ModelConfig& config, std::vector<std::string> drivers);

std::size_t count_params(const ModelParams& params);

ModelParams zeros_like(const ModelParams& params);

// ---- sequential simulation ----------------------------------------------

struct SimState {
  accumulator::AccumulatorState accumulator;
  std::array<motor::MotorState, motor::kControls> motor;
  std::size_t step = 0;  // next timestep index; trajectories use time step * dt
};

SimState init_state(const ModelConfig& config);

struct StepOutput {
  std::array<double, motor::kControls> predictions{};
  std::vector<double> potentials;  // post-reset
  std::vector<double> spikes;
  bool triggered = false;
  std::array<double, motor::kControls> targets{};
  std::array<double, motor::kControls> y0{};
};

// Replaces the spike nonlinearity: (pre-reset potential, step, neuron).
using SpikeOverride = std::function<double(double potential, std::size_t step, std::size_t neuron)>;

class Simulator {
 public:
  // The driver's embedding row, or the mean row for an unknown driver.
  Simulator(const Model& model, std::string_view driver);
  Simulator(const Model& model, std::string_view driver, SimState state);

  StepOutput step(std::span<const double> x, const SpikeOverride& spike_fn = {});

  const SimState& state() const { return state_; }

 private:
  const Model* model_;
  std::vector<double> embedding_;
  SimState state_;
};

struct TriggerEvent {
  std::size_t step = 0;
  std::size_t control = 0;
  double target = 0.0;
  double y0 = 0.0;
};

struct Trace {
  Tensor potentials;  // [T x kC] post-reset
  Tensor spikes;      // [T x kC]
  std::vector<TriggerEvent> triggers;
};

struct TripResult {
  Tensor predictions;  // [T x 3]: brake, throttle, steer
  Trace trace;
};

// inputs is [T x C], already standardized. Throws SchemaError on a channel
// count mismatch.
TripResult simulate_trip(const Model& model, const Tensor& inputs, std::string_view driver,
                         const SpikeOverride& spike_fn = {});

// ---- differentiable route ------------------------------------------------

ModelVars bind(diff::Graph& graph, const ModelParams& params);
ModelParams gradients(const diff::Graph& graph, const ModelVars& vars);

struct TripGraph {
  std::array<diff::Var, motor::kControls> predictions;  // each [T x 1]
  Trace trace;
};

TripGraph forward_trip(diff::Graph& graph, const ModelVars& vars, const Model& model,
                       const Tensor& inputs, std::string_view driver,
                       std::size_t truncation = 0);

}  // namespace accudrive::model
