#pragma once

// Bank of independent leaky integrate-and-fire accumulators, one per feature.
//
//   v' = v + (-rho * v + bias + gain * x) * dt
//   s  = [v' >= threshold]
//   v  = s * v_reset + (1 - s) * v'
//
// rho = softplus(leak_raw) keeps the leak non-negative.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "accudrive/diff.hpp"
#include "accudrive/tensor.hpp"

namespace accudrive::accumulator {

template <class T>
struct AccumulatorParamsT {
  T leak_raw;  // [1 x kC], rho = softplus(leak_raw), 1/s
  T bias;      // [1 x kC], evidence/s
  T gain;      // [1 x kC], drift rate
  T v_reset;   // [1 x kC]
};

using AccumulatorParams = AccumulatorParamsT<Tensor>;

struct SpikeSettings {
  double threshold = 1.0;
  double sharpness = 4.0;  // surrogate alpha
};

struct AccumulatorState {
  std::vector<double> potential;
};

struct StepResult {
  AccumulatorState state;
  std::vector<double> spikes;
};

// Replaces the Heaviside spike in the plain path; receives the pre-reset
// potential and the neuron index.
using SpikeFunction = std::function<double(double potential, std::size_t neuron)>;

// bias 0, gain 1, v_reset 0, leak_raw such that rho == leak.
AccumulatorParams init_params(std::size_t neurons, double leak);

AccumulatorState initial_state(std::size_t neurons);

std::vector<double> effective_leak(const AccumulatorParams& params);

StepResult step(const AccumulatorParams& params, const AccumulatorState& state,
                std::span<const double> x, double dt, const SpikeSettings& settings = {},
                const SpikeFunction& spike_fn = {});

struct ScanResult {
  diff::Var spikes;      // [T x kC]
  Tensor potentials;     // post-reset potentials [T x kC], for inspection
};

// Runs step() over every row of x starting from a zero state, as one graph
// node whose backward is BPTT through the whole sequence. A non-zero
// truncation stops the gradient carried between steps t-1 and t whenever
// t is a multiple of it.
ScanResult scan(const AccumulatorParamsT<diff::Var>& params, diff::Var x, double dt,
                const SpikeSettings& settings, std::size_t truncation = 0);

}  // namespace accudrive::accumulator
