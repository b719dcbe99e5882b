#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "accudrive/data.hpp"
#include "accudrive/errors.hpp"

namespace accudrive::data {

namespace {

constexpr double kSampleDt = 0.1;
constexpr int kSubsteps = 10;
constexpr double kTurnRadius = 10.0;                                     // m
constexpr double kTurnArc = std::numbers::pi / 2.0 * kTurnRadius;        // m
constexpr double kCycleLaneX = 4.0;                                      // m east of the ego lane
constexpr double kLat0 = 57.7089;
constexpr double kLon0 = 11.9746;
constexpr double kMetersPerDegree = 111320.0;

struct DriverTraits {
  Style style;
  double onset_distance;  // m before the turn
  double brake_peak;      // pedal fraction
  double brake_rise;      // 1/s
  double turn_speed;      // m/s
  double throttle_gain;
  double steer_peak;      // deg
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Disjoint onset-distance ranges keep the two styles separable in every trip.
DriverTraits draw_driver(Style style, std::mt19937_64& rng) {
  if (style == Style::cautious) {
    return {style,
            uniform(rng, 48.0, 56.0),
            uniform(rng, 0.35, 0.45),
            uniform(rng, 1.0, 1.5),
            uniform(rng, 3.5, 4.2),
            uniform(rng, 0.35, 0.45),
            uniform(rng, 100.0, 120.0)};
  }
  return {style,
          uniform(rng, 22.0, 28.0),
          uniform(rng, 0.65, 0.80),
          uniform(rng, 2.0, 3.0),
          uniform(rng, 5.0, 6.0),
          uniform(rng, 0.55, 0.70),
          uniform(rng, 120.0, 145.0)};
}

DriverTraits perturb(const DriverTraits& base, std::mt19937_64& rng) {
  DriverTraits t = base;
  t.onset_distance += uniform(rng, -3.0, 3.0);
  t.brake_peak = std::clamp(t.brake_peak + uniform(rng, -0.05, 0.05), 0.2, 0.95);
  t.brake_rise *= uniform(rng, 0.9, 1.1);
  t.turn_speed += uniform(rng, -0.3, 0.3);
  t.throttle_gain *= uniform(rng, 0.9, 1.1);
  t.steer_peak += uniform(rng, -8.0, 8.0);
  return t;
}

// First-order autoregressive noise with unit-free stationary deviation sigma.
class SmoothNoise {
 public:
  SmoothNoise(double sigma, double phi) : sigma_(sigma), phi_(phi) {}
  double next(std::mt19937_64& rng) {
    value_ = phi_ * value_ + sigma_ * std::sqrt(1.0 - phi_ * phi_) * normal_(rng);
    return value_;
  }

 private:
  double sigma_;
  double phi_;
  double value_ = 0.0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Pose {
  double x;
  double y;
  double heading;  // rad, 0 = north, pi/2 = east
};

// Straight north to the turn entry at y = 0, quarter circle to the right,
// then east along y = kTurnRadius.
Pose ego_pose(double s, double s_turn) {
  const double d = s - s_turn;
  if (d < 0.0) return {0.0, d, 0.0};
  if (d < kTurnArc) {
    const double phi = d / kTurnRadius;
    return {kTurnRadius - kTurnRadius * std::cos(phi), kTurnRadius * std::sin(phi), phi};
  }
  return {kTurnRadius + (d - kTurnArc), kTurnRadius, std::numbers::pi / 2.0};
}

double lat_of(double y) { return kLat0 + y / kMetersPerDegree; }
double lon_of(double x) {
  return kLon0 + x / (kMetersPerDegree * std::cos(kLat0 * std::numbers::pi / 180.0));
}

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

std::string driver_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "d%02zu", index + 1);
  return buf;
}

Trip simulate(const std::string& driver, std::size_t trip_index, const DriverTraits& traits,
              std::mt19937_64& rng, double& onset_distance) {
  static constexpr std::array<double, 3> kTrialSpeedsKmh{20.0, 30.0, 40.0};
  const double target_kmh = kTrialSpeedsKmh[trip_index % 3] + uniform(rng, -1.0, 1.0);
  const double v_target = target_kmh / 3.6;
  const bool stationary = trip_index % 4 == 3;
  const std::size_t steps = 280 + std::uniform_int_distribution<std::size_t>(0, 40)(rng);

  const double s_turn = 20.0 + v_target * 12.0;
  const double arrival = s_turn / (0.8 * v_target);
  const double scooter_speed = stationary ? 0.0 : uniform(rng, 3.5, 5.5);
  double scooter_y = stationary ? kTurnRadius - 3.0
                                : kTurnRadius - scooter_speed * (arrival + uniform(rng, -2.0, 2.0));
  const double exit_speed = 25.0 / 3.6;

  SmoothNoise pitch_noise(0.8, 0.95);
  SmoothNoise yaw_noise(3.0, 0.9);
  SmoothNoise steer_noise(2.0, 0.97);

  double s = 0.0;
  double v = 0.5 * v_target;
  double brake = 0.0;
  double throttle = 0.3;
  double steer = 0.0;
  double onset_time = -1.0;
  onset_distance = -1.0;
  double time = 0.0;

  Trip trip;
  trip.driver_id = driver;
  char id[32];
  std::snprintf(id, sizeof id, "%s_t%02zu", driver.c_str(), trip_index + 1);
  trip.trip_id = id;
  trip.inputs = Tensor(steps, kInputColumns.size());
  trip.outputs = Tensor(steps, kOutputColumns.size());

  for (std::size_t k = 0; k < steps; ++k) {
    const Pose pose = ego_pose(s, s_turn);
    const double lane_noise = steer_noise.next(rng);
    trip.time.push_back(static_cast<double>(k) * kSampleDt);

    const double dx = kCycleLaneX - pose.x;
    const double dy = scooter_y - pose.y;
    double bearing = std::atan2(dx, dy) - pose.heading;
    bearing = std::remainder(bearing, 2.0 * std::numbers::pi) * 180.0 / std::numbers::pi;
    const double yaw = 0.5 * std::clamp(bearing, -70.0, 70.0) + yaw_noise.next(rng);
    const double pitch = -3.0 + pitch_noise.next(rng);

    auto in = trip.inputs.row(k);
    in[0] = v;
    in[1] = lon_of(pose.x);
    in[2] = lat_of(pose.y);
    in[3] = target_kmh;
    in[4] = pitch;
    in[5] = yaw;
    in[6] = scooter_speed;
    in[7] = lon_of(kCycleLaneX);
    in[8] = lat_of(scooter_y);
    auto out = trip.outputs.row(k);
    out[0] = 100.0 * brake;
    out[1] = 100.0 * throttle;
    out[2] = steer + lane_noise;

    for (int sub = 0; sub < kSubsteps; ++sub) {
      const double h = kSampleDt / kSubsteps;
      const double to_turn = s_turn - s;
      const double into_turn = s - s_turn;
      const bool scooter_conflict = scooter_speed > 0.0 && scooter_y > kTurnRadius - 15.0 &&
                                    scooter_y < kTurnRadius + 2.0;
      double brake_cmd = 0.0;
      double throttle_cmd = 0.0;
      double steer_cmd = 0.0;
      if (to_turn > traits.onset_distance && onset_time < 0.0) {
        const double hold = 0.04 * v / 3.0;
        throttle_cmd = std::clamp(hold + traits.throttle_gain * (v_target - v) / v_target * 3.0, 0.0, 1.0);
      } else if (into_turn < 0.0) {
        if (onset_time < 0.0) {
          onset_time = time;
          onset_distance = to_turn;
        }
        const double ramp = 1.0 / (1.0 + std::exp(-(traits.brake_rise * (time - onset_time) * 3.0 - 3.0)));
        const bool yield = traits.style == Style::cautious && scooter_conflict && to_turn < 8.0;
        if (yield) {
          brake_cmd = traits.brake_peak;
        } else if (v > traits.turn_speed) {
          brake_cmd = traits.brake_peak * ramp;
        } else {
          throttle_cmd = std::clamp(0.1 + 0.3 * (traits.turn_speed - v), 0.0, 1.0);
        }
      } else if (into_turn < kTurnArc) {
        steer_cmd = traits.steer_peak * std::sin(std::numbers::pi * into_turn / kTurnArc);
        throttle_cmd = std::clamp(0.12 + 0.3 * (traits.turn_speed - v), 0.0, 1.0);
      } else {
        throttle_cmd = std::clamp(traits.throttle_gain * (exit_speed - v) / exit_speed * 2.0 + 0.1, 0.0, 1.0);
      }

      brake += (brake_cmd - brake) * h / 0.25;
      throttle += (throttle_cmd - throttle) * h / 0.3;
      steer += (steer_cmd - steer) * h / 0.2;
      const double accel = 3.0 * throttle - 8.0 * brake - 0.04 * v;
      v = std::max(0.0, v + accel * h);
      s += v * h;
      scooter_y += scooter_speed * h;
      time += h;
    }
  }
  return trip;
}

}  // namespace

std::string_view style_name(Style style) {
  return style == Style::cautious ? "cautious" : "aggressive";
}

SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.drivers < 2) throw ArgumentError("synth_generate needs at least two drivers");
  if (spec.trips_per_driver == 0) throw ArgumentError("synth_generate needs at least one trip per driver");
  SynthDataset out;
  for (std::size_t d = 0; d < spec.drivers; ++d) {
    const std::string driver = driver_name(d);
    const Style style = d % 2 == 0 ? Style::cautious : Style::aggressive;
    std::seed_seq driver_seed{lo32(seed), hi32(seed), static_cast<std::uint32_t>(d), 0x5eedu};
    std::mt19937_64 driver_rng(driver_seed);
    const DriverTraits base = draw_driver(style, driver_rng);
    out.styles[driver] = style;
    for (std::size_t j = 0; j < spec.trips_per_driver; ++j) {
      std::seed_seq trip_seed{lo32(seed), hi32(seed), static_cast<std::uint32_t>(d),
                              static_cast<std::uint32_t>(j + 1)};
      std::mt19937_64 rng(trip_seed);
      double onset = -1.0;
      out.dataset.trips.push_back(simulate(driver, j, perturb(base, rng), rng, onset));
      out.brake_onset_distance.push_back(onset);
    }
  }
  return out;
}

}  // namespace accudrive::data
