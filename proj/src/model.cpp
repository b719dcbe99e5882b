#include "accudrive/model.hpp"

#include <random>

#include "accudrive/errors.hpp"

namespace accudrive::model {

namespace {

bool any_spike(std::span<const double> spikes) {
  for (double s : spikes) {
    if (s >= 0.5) return true;
  }
  return false;
}

}  // namespace

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid model config: ") + what);
  };
  require(channels > 0, "channels must be positive");
  require(expansion > 0, "expansion (m) must be positive");
  require(compression > 0, "compression (k) must be positive");
  require(perception_layers >= 2, "perception needs at least two layers");
  require(embedding_width > 0, "embedding width must be positive");
  require(dt > 0.0, "dt must be positive");
  require(threshold > 0.0, "threshold must be positive");
  require(sharpness > 0.0, "surrogate sharpness must be positive");
  require(epsilon > 0.0, "primitive baseline epsilon must be positive");
  require(initial_leak > 0.0, "initial leak must be positive");
}

Model init_model(const ModelConfig& config, std::vector<std::string> drivers) {
  config.validate();
  if (drivers.empty()) throw ConfigError("model needs at least one training driver");
  std::mt19937_64 rng(config.seed);
  Model model;
  model.config = config;
  model.drivers = std::move(drivers);
  model.params.perception = perception::init_params(config.perception_shape(), rng);
  model.params.personalization = personalization::init_params(
      config.features(), config.embedding_width, model.drivers.size(), rng);
  model.params.accumulator = accumulator::init_params(config.features(), config.initial_leak);
  for (auto& head : model.params.motor) {
    head = motor::init_params(config.features(), config.hidden(), config.initial_log_rate, rng);
  }
  return model;
}

std::size_t count_params(const ModelParams& params) {
  std::size_t total = 0;
  for_each_param([&](const std::string&, const Tensor& t) { total += t.size(); }, params);
  return total;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams zeros = params;
  for_each_param([](const std::string&, Tensor& t) { t.fill(0.0); }, zeros);
  return zeros;
}

SimState init_state(const ModelConfig& config) {
  SimState state;
  state.accumulator = accumulator::initial_state(config.features());
  return state;
}

Simulator::Simulator(const Model& model, std::string_view driver)
    : Simulator(model, driver, init_state(model.config)) {}

Simulator::Simulator(const Model& model, std::string_view driver, SimState state)
    : model_(&model),
      embedding_(personalization::lookup(model.embedding_table(), driver)),
      state_(std::move(state)) {
  if (state_.accumulator.potential.size() != model.config.features()) {
    throw DimensionError("simulation state has " +
                         std::to_string(state_.accumulator.potential.size()) +
                         " potentials for a model with " +
                         std::to_string(model.config.features()) + " neurons");
  }
}

StepOutput Simulator::step(std::span<const double> x, const SpikeOverride& spike_fn) {
  const ModelConfig& cfg = model_->config;
  const ModelParams& p = model_->params;
  if (x.size() != cfg.channels) {
    throw SchemaError("expected " + std::to_string(cfg.channels) + " input channels, got " +
                      std::to_string(x.size()));
  }
  const std::size_t index = state_.step;
  const std::vector<double> features = personalization::personalize(
      p.personalization, perception::perceive(p.perception, x), embedding_);

  accumulator::SpikeFunction neuron_fn;
  if (spike_fn) {
    neuron_fn = [&spike_fn, index](double v, std::size_t i) { return spike_fn(v, index, i); };
  }
  accumulator::StepResult acc =
      accumulator::step(p.accumulator, state_.accumulator, features, cfg.dt,
                        cfg.spike_settings(), neuron_fn);

  StepOutput out;
  out.triggered = any_spike(acc.spikes);
  const double time = static_cast<double>(index) * cfg.dt;
  for (std::size_t c = 0; c < motor::kControls; ++c) {
    motor::MotorState& head = state_.motor[c];
    if (out.triggered) {
      const std::vector<double> gated =
          motor::gate(motor::propose(p.motor[c], features), acc.spikes);
      out.targets[c] = motor::compress(p.motor[c], gated);
      out.y0[c] = head.trigger(out.targets[c], time, motor::rate(p.motor[c]), cfg.epsilon).y0;
    }
    out.predictions[c] = head.evaluate(time);
  }
  state_.accumulator = std::move(acc.state);
  out.potentials = state_.accumulator.potential;
  out.spikes = std::move(acc.spikes);
  ++state_.step;
  return out;
}

TripResult simulate_trip(const Model& model, const Tensor& inputs, std::string_view driver,
                         const SpikeOverride& spike_fn) {
  if (inputs.cols() != model.config.channels) {
    throw SchemaError("trip has " + std::to_string(inputs.cols()) + " input channels, model expects " +
                      std::to_string(model.config.channels));
  }
  const std::size_t steps = inputs.rows();
  const std::size_t n = model.config.features();
  Simulator sim(model, driver);
  TripResult result;
  result.predictions = Tensor(steps, motor::kControls);
  result.trace.potentials = Tensor(steps, n);
  result.trace.spikes = Tensor(steps, n);
  for (std::size_t t = 0; t < steps; ++t) {
    const StepOutput out = sim.step(inputs.row(t), spike_fn);
    for (std::size_t c = 0; c < motor::kControls; ++c) {
      result.predictions(t, c) = out.predictions[c];
      if (out.triggered) result.trace.triggers.push_back({t, c, out.targets[c], out.y0[c]});
    }
    for (std::size_t i = 0; i < n; ++i) {
      result.trace.potentials(t, i) = out.potentials[i];
      result.trace.spikes(t, i) = out.spikes[i];
    }
  }
  return result;
}

ModelVars bind(diff::Graph& graph, const ModelParams& params) {
  ModelVars vars;
  vars.perception.weights.resize(params.perception.weights.size());
  vars.perception.biases.resize(params.perception.biases.size());
  for_each_param([&](const std::string&, const Tensor& t, diff::Var& v) { v = graph.leaf(t); },
                 params, vars);
  return vars;
}

ModelParams gradients(const diff::Graph& graph, const ModelVars& vars) {
  ModelParams grads;
  grads.perception.weights.resize(vars.perception.weights.size());
  grads.perception.biases.resize(vars.perception.biases.size());
  for_each_param([&](const std::string&, const diff::Var& v, Tensor& g) { g = graph.grad(v); },
                 vars, grads);
  return grads;
}

TripGraph forward_trip(diff::Graph& graph, const ModelVars& vars, const Model& model,
                       const Tensor& inputs, std::string_view driver, std::size_t truncation) {
  const ModelConfig& cfg = model.config;
  if (inputs.cols() != cfg.channels) {
    throw SchemaError("trip has " + std::to_string(inputs.cols()) + " input channels, model expects " +
                      std::to_string(cfg.channels));
  }
  const std::size_t steps = inputs.rows();
  const diff::Var x = graph.constant(inputs);
  const diff::Var perceived = perception::perceive(vars.perception, x);
  const diff::Var e =
      personalization::lookup(vars.personalization.embedding, model.drivers, driver);
  const diff::Var features = personalization::personalize(vars.personalization, perceived, e);
  accumulator::ScanResult acc =
      accumulator::scan(vars.accumulator, features, cfg.dt, cfg.spike_settings(), truncation);

  const Tensor& spikes = acc.spikes.value();
  std::vector<double> triggers(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) triggers[t] = any_spike(spikes.row(t)) ? 1.0 : 0.0;

  TripGraph out;
  std::array<std::vector<motor::TriggeredPrimitive>, motor::kControls> records;
  for (std::size_t c = 0; c < motor::kControls; ++c) {
    const diff::Var gated = motor::gate(motor::propose(vars.motor[c], features), acc.spikes);
    const diff::Var targets = motor::compress(vars.motor[c], gated);
    out.predictions[c] = motor::superpose(targets, vars.motor[c].log_rate, triggers, cfg.dt,
                                          cfg.epsilon, &records[c]);
  }
  out.trace.potentials = std::move(acc.potentials);
  out.trace.spikes = spikes;
  std::array<std::size_t, motor::kControls> cursor{};
  for (std::size_t t = 0; t < steps; ++t) {
    if (triggers[t] == 0.0) continue;
    for (std::size_t c = 0; c < motor::kControls; ++c) {
      const motor::TriggeredPrimitive& r = records[c][cursor[c]++];
      out.trace.triggers.push_back({r.step, c, r.target, r.primitive.y0});
    }
  }
  return out;
}

}  // namespace accudrive::model
