#pragma once

// Maps the raw sensor channels of one timestamp to saturated features:
// tanh(W_L ... mish(W_1 x + b_1) ... + b_L). Two layers by default.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "accudrive/diff.hpp"
#include "accudrive/tensor.hpp"

namespace accudrive::perception {

struct PerceptionShape {
  std::size_t channels = 9;
  std::size_t expansion = 7;    // m: hidden width is m * channels
  std::size_t compression = 5;  // k: output width is k * channels
  std::size_t layers = 2;

  std::size_t hidden() const { return expansion * channels; }
  std::size_t features() const { return compression * channels; }
};

template <class T>
struct PerceptionParamsT {
  std::vector<T> weights;  // layer l: [out x in]
  std::vector<T> biases;   // layer l: [1 x out]
};

using PerceptionParams = PerceptionParamsT<Tensor>;

PerceptionParams init_params(const PerceptionShape& shape, std::mt19937_64& rng);

// Single timestamp. Throws DimensionError if x does not have one entry per channel.
std::vector<double> perceive(const PerceptionParams& params, std::span<const double> x);

// Every row of x is an independent timestamp.
diff::Var perceive(const PerceptionParamsT<diff::Var>& params, diff::Var x);

}  // namespace accudrive::perception
