#include "accudrive/perception.hpp"

#include <cmath>
#include <string>

#include "accudrive/errors.hpp"
#include "accudrive/init.hpp"
#include "accudrive/kernels.hpp"

namespace accudrive::perception {

PerceptionParams init_params(const PerceptionShape& shape, std::mt19937_64& rng) {
  if (shape.channels == 0 || shape.expansion == 0 || shape.compression == 0 || shape.layers < 2) {
    throw ConfigError("perception needs positive channels, m, k and at least two layers");
  }
  PerceptionParams params;
  std::size_t in = shape.channels;
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::size_t out = l + 1 == shape.layers ? shape.features() : shape.hidden();
    params.weights.push_back(uniform_fan_in(out, in, in, rng));
    params.biases.push_back(uniform_fan_in(1, out, in, rng));
    in = out;
  }
  return params;
}

std::vector<double> perceive(const PerceptionParams& params, std::span<const double> x) {
  if (x.size() != params.weights.front().cols()) {
    throw DimensionError("perceive: expected " + std::to_string(params.weights.front().cols()) +
                         " channels, got " + std::to_string(x.size()));
  }
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  const std::size_t layers = params.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    next.assign(params.weights[l].rows(), 0.0);
    kernels::affine_row(params.weights[l].values(), params.biases[l].values(), current, next);
    const bool last = l + 1 == layers;
    for (double& v : next) v = last ? kernels::saturate(v) : kernels::mish(v);
    current.swap(next);
  }
  return current;
}

diff::Var perceive(const PerceptionParamsT<diff::Var>& params, diff::Var x) {
  diff::Var h = x;
  const std::size_t layers = params.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = diff::affine(params.weights[l], params.biases[l], h);
    h = l + 1 == layers ? diff::tanh_act(h) : diff::mish(h);
  }
  return h;
}

}  // namespace accudrive::perception
