#pragma once

// Trips on disk are one CSV per trip:
//
//   driver_id,trip_id,t,ego_speed,ego_lon,ego_lat,target_speed,gaze_pitch,
//   gaze_yaw,scooter_speed,scooter_lon,scooter_lat,brake,throttle,steer
//
// Inputs are z-scored and outputs min-max scaled with statistics fitted on the
// training split only.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accudrive/tensor.hpp"

namespace accudrive::data {

inline constexpr std::array<std::string_view, 9> kInputColumns{
    "ego_speed",  "ego_lon",       "ego_lat",     "target_speed", "gaze_pitch",
    "gaze_yaw",   "scooter_speed", "scooter_lon", "scooter_lat"};
inline constexpr std::array<std::string_view, 3> kOutputColumns{"brake", "throttle", "steer"};

struct Trip {
  std::string driver_id;
  std::string trip_id;
  std::vector<double> time;  // seconds
  Tensor inputs;             // [T x 9]
  Tensor outputs;            // [T x 3]

  std::size_t length() const { return time.size(); }
};

struct Dataset {
  std::vector<Trip> trips;

  // Sorted, unique.
  std::vector<std::string> drivers() const;
  const Trip* find_trip(std::string_view trip_id) const;
};

// `source` is used in error messages.
Trip read_trip(std::istream& in, const std::string& source);
Trip read_trip_file(const std::filesystem::path& path);
// Every *.csv in the directory, in file-name order.
Dataset load_dataset(const std::filesystem::path& dir);

void write_trip(std::ostream& out, const Trip& trip);
// Writes <trip_id>.csv per trip, creating the directory if needed.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

struct Scalers {
  std::vector<double> input_mean;
  std::vector<double> input_std;  // population standard deviation
  std::vector<double> output_min;
  std::vector<double> output_max;

  static constexpr std::array<double, 3> kOutputLow{0.0, 0.0, -1.0};
  static constexpr std::array<double, 3> kOutputHigh{1.0, 1.0, 1.0};
};

// Throws DegenerateError for a constant input channel or output.
Scalers fit_scalers(std::span<const Trip> trips);
Trip apply(const Scalers& scalers, const Trip& trip);
std::vector<Trip> apply(const Scalers& scalers, std::span<const Trip> trips);
Tensor scale_outputs(const Scalers& scalers, const Tensor& raw);
Tensor invert_outputs(const Scalers& scalers, const Tensor& scaled);

struct Batch {
  std::vector<std::string> drivers;
  std::vector<std::string> trip_ids;
  std::vector<Tensor> inputs;                // [steps x 9], zero padded
  std::vector<Tensor> outputs;               // [steps x 3], zero padded
  std::vector<std::vector<double>> masks;    // 1 on valid steps
  std::size_t steps = 0;

  std::size_t size() const { return inputs.size(); }
};

Batch pad_and_mask(std::span<const Trip> trips);

// ---- synthetic scenarios -------------------------------------------------

enum class Style { cautious, aggressive };

std::string_view style_name(Style style);

struct SynthSpec {
  std::size_t drivers = 25;
  std::size_t trips_per_driver = 9;
};

struct SynthDataset {
  Dataset dataset;
  std::map<std::string, Style> styles;
  // Distance to the turn (m) when braking began, parallel to dataset.trips.
  std::vector<double> brake_onset_distance;
};

// Deterministic for a given seed. Even-indexed drivers are cautious, odd ones
// aggressive. Throws ArgumentError for fewer than two drivers.
SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace accudrive::data
