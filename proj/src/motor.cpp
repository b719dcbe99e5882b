#include "accudrive/motor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "accudrive/errors.hpp"
#include "accudrive/init.hpp"
#include "accudrive/kernels.hpp"

namespace accudrive::motor {

MotorParams init_params(std::size_t features, std::size_t hidden, double log_rate,
                        std::mt19937_64& rng) {
  if (features == 0 || hidden == 0) throw ConfigError("motor widths must be positive");
  MotorParams params;
  params.proposal_bias = Tensor(1, features, 0.0);
  params.proposal_gain = Tensor(1, features, 1.0);
  params.log_rate = Tensor::scalar(log_rate);
  const std::array<std::size_t, 3> in{features, hidden, hidden};
  const std::array<std::size_t, 3> out{hidden, hidden, 1};
  for (std::size_t l = 0; l < 3; ++l) {
    params.weights[l] = uniform_fan_in(out[l], in[l], in[l], rng);
    params.biases[l] = uniform_fan_in(1, out[l], in[l], rng);
  }
  return params;
}

double rate(const MotorParams& params) { return std::exp(params.log_rate[0]); }

std::vector<double> propose(const MotorParams& params, std::span<const double> features) {
  if (features.size() != params.proposal_gain.size()) {
    throw DimensionError("propose: " + std::to_string(features.size()) + " features for " +
                         params.proposal_gain.shape() + " proposal parameters");
  }
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = params.proposal_bias[i] + params.proposal_gain[i] * features[i];
  }
  return out;
}

std::vector<double> gate(std::span<const double> proposals, std::span<const double> spikes) {
  if (proposals.size() != spikes.size()) {
    throw DimensionError("gate: " + std::to_string(proposals.size()) + " proposals but " +
                         std::to_string(spikes.size()) + " spikes");
  }
  std::vector<double> out(proposals.begin(), proposals.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= spikes[i];
  return out;
}

double compress(const MotorParams& params, std::span<const double> gated) {
  if (gated.size() != params.weights[0].cols()) {
    throw DimensionError("compress: input of " + std::to_string(gated.size()) +
                         " for first layer " + params.weights[0].shape());
  }
  std::vector<double> current(gated.begin(), gated.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < 3; ++l) {
    next.assign(params.weights[l].rows(), 0.0);
    kernels::affine_row(params.weights[l].values(), params.biases[l].values(), current, next);
    if (l < 2) {
      for (double& v : next) v = kernels::mish(v);
    }
    current.swap(next);
  }
  return current[0];
}

diff::Var propose(const MotorParamsT<diff::Var>& params, diff::Var features) {
  return diff::scale_shift(features, params.proposal_bias, params.proposal_gain);
}

diff::Var gate(diff::Var proposals, diff::Var spikes) { return diff::mul(proposals, spikes); }

diff::Var compress(const MotorParamsT<diff::Var>& params, diff::Var gated) {
  diff::Var h = diff::mish(diff::affine(params.weights[0], params.biases[0], gated));
  h = diff::mish(diff::affine(params.weights[1], params.biases[1], h));
  return diff::affine(params.weights[2], params.biases[2], h);
}

double MotorPrimitive::contribution(double t) const {
  return sign * magnitude / (1.0 + amplitude * std::exp(-exponent(t)));
}

MotorPrimitive make_primitive(double target, double y0, double t0, double rate, double epsilon) {
  const double delta = target - y0;
  MotorPrimitive p;
  p.magnitude = std::abs(delta);
  p.sign = static_cast<double>((delta > 0.0) - (delta < 0.0));
  p.amplitude = p.magnitude / epsilon;
  p.rate = rate;
  p.t0 = t0;
  p.y0 = y0;
  return p;
}

double MotorState::evaluate(double t) {
  for (const MotorPrimitive& p : active_) {
    if (p.exponent(t) > kFoldExponent) settled_ += p.sign * p.magnitude;
  }
  std::erase_if(active_, [t](const MotorPrimitive& p) { return p.exponent(t) > kFoldExponent; });
  double value = settled_;
  for (const MotorPrimitive& p : active_) value += p.contribution(t);
  return value;
}

const MotorPrimitive& MotorState::trigger(double target, double t, double rate, double epsilon) {
  if (!std::isfinite(target)) {
    throw NumericError("motor trigger: non-finite target at t=" + std::to_string(t));
  }
  const double y0 = evaluate(t);
  active_.push_back(make_primitive(target, y0, t, rate, epsilon));
  return active_.back();
}

diff::Var superpose(diff::Var targets, diff::Var log_rate, std::span<const double> triggers,
                    double dt, double epsilon, std::vector<TriggeredPrimitive>* record) {
  const Tensor& targets_value = targets.value();
  const std::size_t steps = targets_value.rows();
  if (targets_value.cols() != 1 || triggers.size() != steps) {
    throw DimensionError("superpose: targets " + targets_value.shape() + " with " +
                         std::to_string(triggers.size()) + " trigger flags");
  }
  if (log_rate.value().size() != 1) {
    throw DimensionError("superpose: log rate must be scalar, got " + log_rate.value().shape());
  }
  const double rate = std::exp(log_rate.value()[0]);

  auto primitives = std::make_shared<std::vector<TriggeredPrimitive>>();
  MotorState state;
  Tensor out(steps, 1);
  for (std::size_t t = 0; t < steps; ++t) {
    const double time = static_cast<double>(t) * dt;
    if (triggers[t] != 0.0) {
      const double target = targets_value[t];
      primitives->push_back({t, target, state.trigger(target, time, rate, epsilon)});
    }
    out[t] = state.evaluate(time);
  }
  if (record) *record = *primitives;

  return targets.graph()->custom(
      std::move(out), {targets, log_rate},
      [primitives, steps, dt, epsilon, rate](const Tensor& g, std::span<Tensor* const> pg) {
        // g_y0[t]: dL/d(target - y0) of the primitive started at step t; the
        // earlier primitives see it with a negative sign through y0.
        std::vector<double> g_y0(steps, 0.0);
        double g_rate = 0.0;
        for (auto it = primitives->rbegin(); it != primitives->rend(); ++it) {
          const MotorPrimitive& p = it->primitive;
          double g_delta = 0.0;
          if (p.magnitude > 0.0) {
            for (std::size_t t = it->step; t < steps; ++t) {
              const double upstream = t == it->step ? g[t] : g[t] - g_y0[t];
              if (upstream == 0.0) continue;
              const double time = static_cast<double>(t) * dt;
              const double x = p.exponent(time);
              if (x > kFoldExponent) {
                g_delta += upstream;  // folded: contributes target - y0 exactly
                continue;
              }
              const double u = time - p.t0;
              const double e = std::exp(-x);
              const double d = 1.0 + p.amplitude * e;
              const double d_mag = 1.0 / d - p.magnitude * (e / epsilon) * (1.0 - p.magnitude * u) / (d * d);
              g_delta += upstream * d_mag;  // S * S * dc/dT
              g_rate += upstream * p.sign * p.magnitude * p.amplitude * e * u / (d * d);
            }
          }
          g_y0[it->step] = g_delta;
          if (pg[0]) (*pg[0])[it->step] += g_delta;
        }
        if (pg[1]) (*pg[1])[0] += g_rate * rate;
      });
}

}  // namespace accudrive::motor
