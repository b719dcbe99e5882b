#pragma once

#include <cmath>
#include <cstddef>
#include <random>

#include "accudrive/tensor.hpp"

namespace accudrive {

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Tensor uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in,
                             std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace accudrive
