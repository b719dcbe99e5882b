#pragma once

// Plain-text, versioned serialization. Every number is written in scientific
// notation with 17 significant digits so a save/load cycle is exact.
//
//   accudrive-checkpoint 1
//   config <key> <value>          (one line per ModelConfig field)
//   epoch <n>
//   scalers <name> <n> <v>...     (input_mean, input_std, output_min, output_max)
//   drivers <n> <id>...
//   param <name> <rows> <cols>    followed by <rows> lines of <cols> values
//   end

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "accudrive/data.hpp"
#include "accudrive/model.hpp"

namespace accudrive::model {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  data::Scalers scalers;
  std::size_t epoch = 0;  // epoch the parameters were taken from, 0 if untrained
};

void save_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws SchemaError for malformed documents, unknown versions, missing or
// misshapen parameters.
Checkpoint load_checkpoint(std::istream& in, const std::string& source = "checkpoint");
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Mid-trip simulation state: step counter, potentials, motor primitives.
void save_state(std::ostream& out, const SimState& state);
SimState load_state(std::istream& in);

std::string format_exact(double value);

}  // namespace accudrive::model
