#pragma once

#include <random>
#include <string>
#include <vector>

#include "accudrive/data.hpp"
#include "accudrive/model.hpp"
#include "support/random.hpp"

namespace testing_support {

// A standardized-looking trip with N(0,1) inputs and outputs in the scaled ranges.
inline accudrive::data::Trip random_trip(const std::string& driver, const std::string& id,
                                         std::size_t steps, std::mt19937_64& rng) {
  accudrive::data::Trip trip;
  trip.driver_id = driver;
  trip.trip_id = id;
  for (std::size_t t = 0; t < steps; ++t) trip.time.push_back(0.1 * static_cast<double>(t));
  trip.inputs = normal(steps, 9, 1.0, rng);
  trip.outputs = accudrive::Tensor(steps, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < steps; ++t) {
    trip.outputs(t, 0) = unit(rng);
    trip.outputs(t, 1) = unit(rng);
    trip.outputs(t, 2) = 2.0 * unit(rng) - 1.0;
  }
  return trip;
}

// Default-sized model whose accumulators fire within a few steps.
inline accudrive::model::Model busy_model(std::vector<std::string> drivers, std::uint64_t seed,
                                          double gain = 8.0) {
  accudrive::model::ModelConfig cfg;
  cfg.seed = seed;
  accudrive::model::Model m = accudrive::model::init_model(cfg, std::move(drivers));
  m.params.accumulator.gain.fill(gain);
  return m;
}

}  // namespace testing_support
