#include "accudrive/accumulator.hpp"

#include <memory>
#include <string>

#include "accudrive/errors.hpp"
#include "accudrive/kernels.hpp"

namespace accudrive::accumulator {

AccumulatorParams init_params(std::size_t neurons, double leak) {
  if (neurons == 0) throw ConfigError("accumulator needs at least one neuron");
  if (!(leak > 0.0)) throw ConfigError("initial leak must be positive");
  AccumulatorParams params;
  params.leak_raw = Tensor(1, neurons, kernels::softplus_inverse(leak));
  params.bias = Tensor(1, neurons, 0.0);
  params.gain = Tensor(1, neurons, 1.0);
  params.v_reset = Tensor(1, neurons, 0.0);
  return params;
}

AccumulatorState initial_state(std::size_t neurons) {
  return AccumulatorState{std::vector<double>(neurons, 0.0)};
}

std::vector<double> effective_leak(const AccumulatorParams& params) {
  std::vector<double> rho(params.leak_raw.size());
  for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = kernels::softplus(params.leak_raw[i]);
  return rho;
}

StepResult step(const AccumulatorParams& params, const AccumulatorState& state,
                std::span<const double> x, double dt, const SpikeSettings& settings,
                const SpikeFunction& spike_fn) {
  if (!(dt > 0.0)) throw ArgumentError("accumulator step: dt must be positive");
  const std::size_t n = params.gain.size();
  if (x.size() != n || state.potential.size() != n) {
    throw DimensionError("accumulator step: " + std::to_string(n) + " neurons but input of " +
                         std::to_string(x.size()) + " and state of " +
                         std::to_string(state.potential.size()));
  }
  StepResult out;
  out.state.potential.resize(n);
  out.spikes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = kernels::softplus(params.leak_raw[i]);
    const double v_pre = kernels::euler_potential(state.potential[i], rho, params.bias[i],
                                                  params.gain[i], x[i], dt);
    const double s = spike_fn ? spike_fn(v_pre, i) : kernels::heaviside(v_pre, settings.threshold);
    out.spikes[i] = s;
    out.state.potential[i] = kernels::reset_potential(s, params.v_reset[i], v_pre);
  }
  return out;
}

ScanResult scan(const AccumulatorParamsT<diff::Var>& params, diff::Var x, double dt,
                const SpikeSettings& settings, std::size_t truncation) {
  if (!(dt > 0.0)) throw ArgumentError("accumulator scan: dt must be positive");
  const diff::Var rho = diff::softplus(params.leak_raw);
  const Tensor& X = x.value();
  const std::size_t steps = X.rows();
  const std::size_t n = X.cols();
  for (const diff::Var* p : {&rho, &params.bias, &params.gain, &params.v_reset}) {
    if (p->value().rows() != 1 || p->value().cols() != n) {
      throw DimensionError("accumulator scan: parameter " + p->value().shape() +
                           " does not match input " + X.shape());
    }
  }
  const Tensor& R = rho.value();
  const Tensor& A = params.bias.value();
  const Tensor& B = params.gain.value();
  const Tensor& VR = params.v_reset.value();

  auto pre = std::make_shared<Tensor>(steps, n);
  auto post = std::make_shared<Tensor>(steps, n);
  Tensor spikes(steps, n);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = t == 0 ? 0.0 : (*post)(t - 1, i);
      const double v_pre = kernels::euler_potential(v, R[i], A[i], B[i], X(t, i), dt);
      const double s = kernels::heaviside(v_pre, settings.threshold);
      (*pre)(t, i) = v_pre;
      spikes(t, i) = s;
      (*post)(t, i) = kernels::reset_potential(s, VR[i], v_pre);
    }
  }

  ScanResult result;
  result.potentials = *post;
  const diff::Var spike_out = x.graph()->custom(
      std::move(spikes), {x, rho, params.bias, params.gain, params.v_reset},
      [x, rho, gain = params.gain, v_reset = params.v_reset, pre, post, dt, settings,
       truncation](const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& X = x.value();
        const Tensor& R = rho.value();
        const Tensor& B = gain.value();
        const Tensor& VR = v_reset.value();
        const std::size_t steps = X.rows();
        const std::size_t n = X.cols();
        for (std::size_t i = 0; i < n; ++i) {
          double carry = 0.0;  // dL/dv_t (post-reset) flowing back from step t+1
          double g_rho = 0.0, g_bias = 0.0, g_gain = 0.0, g_reset = 0.0;
          for (std::size_t t = steps; t-- > 0;) {
            const double v_pre = (*pre)(t, i);
            const double s = kernels::heaviside(v_pre, settings.threshold);
            const double g_spike = g(t, i) + carry * (VR[i] - v_pre);
            const double g_pre =
                carry * (1.0 - s) +
                g_spike * kernels::spike_surrogate(v_pre, settings.threshold, settings.sharpness);
            g_reset += carry * s;
            const double v_prev = t == 0 ? 0.0 : (*post)(t - 1, i);
            g_rho -= g_pre * v_prev * dt;
            g_bias += g_pre * dt;
            g_gain += g_pre * X(t, i) * dt;
            if (pg[0]) (*pg[0])(t, i) += g_pre * B[i] * dt;
            const bool cut = truncation != 0 && t % truncation == 0;
            carry = cut ? 0.0 : g_pre * (1.0 - R[i] * dt);
          }
          if (pg[1]) (*pg[1])[i] += g_rho;
          if (pg[2]) (*pg[2])[i] += g_bias;
          if (pg[3]) (*pg[3])[i] += g_gain;
          if (pg[4]) (*pg[4])[i] += g_reset;
        }
      });
  result.spikes = spike_out;
  return result;
}

}  // namespace accudrive::accumulator
