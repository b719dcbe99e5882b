#pragma once

// Intermittent motor control for one vehicle control. Features are turned
// into per-feature target proposals, gated by the accumulator spikes,
// compressed to a single target, and executed as a logistic-growth
// primitive that is superimposed on the running trajectory:
//
//   T = |target - y0|,  S = sign(target - y0),  A = T / eps,  R = exp(r)
//   y*(t) = S * T / (1 + A * exp(-(T + R) * (t - t0)))

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "accudrive/diff.hpp"
#include "accudrive/tensor.hpp"

namespace accudrive::motor {

enum class Control : std::size_t { brake = 0, throttle = 1, steer = 2 };

inline constexpr std::size_t kControls = 3;
inline constexpr std::array<std::string_view, kControls> kControlNames{"brake", "throttle",
                                                                       "steer"};

// Primitives whose exponent (T + R)(t - t0) exceeds this are replaced by
// their asymptote S * T.
inline constexpr double kFoldExponent = 45.0;

template <class T>
struct MotorParamsT {
  T proposal_bias;           // [1 x kC]
  T proposal_gain;           // [1 x kC]
  T log_rate;                // [1 x 1], R = exp(log_rate)
  std::array<T, 3> weights;  // [h x kC], [h x h], [1 x h]
  std::array<T, 3> biases;   // [1 x h], [1 x h], [1 x 1]
};

using MotorParams = MotorParamsT<Tensor>;

// Proposals start as the identity map; the compression layers use fan-in
// uniform init.
MotorParams init_params(std::size_t features, std::size_t hidden, double log_rate,
                        std::mt19937_64& rng);

double rate(const MotorParams& params);

std::vector<double> propose(const MotorParams& params, std::span<const double> features);
std::vector<double> gate(std::span<const double> proposals, std::span<const double> spikes);
double compress(const MotorParams& params, std::span<const double> gated);

diff::Var propose(const MotorParamsT<diff::Var>& params, diff::Var features);
diff::Var gate(diff::Var proposals, diff::Var spikes);
// [T x kC] -> [T x 1], one target per row.
diff::Var compress(const MotorParamsT<diff::Var>& params, diff::Var gated);

struct MotorPrimitive {
  double magnitude = 0.0;  // T
  double sign = 0.0;       // S
  double amplitude = 0.0;  // A = T / eps
  double rate = 0.0;       // R
  double t0 = 0.0;
  double y0 = 0.0;

  double exponent(double t) const { return (magnitude + rate) * (t - t0); }
  double contribution(double t) const;
};

MotorPrimitive make_primitive(double target, double y0, double t0, double rate, double epsilon);

class MotorState {
 public:
  MotorState() = default;
  MotorState(std::vector<MotorPrimitive> active, double settled_offset)
      : active_(std::move(active)), settled_(settled_offset) {}

  // Trajectory value at t (t must not precede any t0). Saturated primitives
  // are folded into the settled offset.
  double evaluate(double t);

  // Starts a primitive towards target from the current trajectory value.
  // Throws NumericError for a non-finite target.
  const MotorPrimitive& trigger(double target, double t, double rate, double epsilon);

  std::span<const MotorPrimitive> active() const { return active_; }
  double settled_offset() const { return settled_; }

 private:
  std::vector<MotorPrimitive> active_;
  double settled_ = 0.0;
};

struct TriggeredPrimitive {
  std::size_t step = 0;
  double target = 0.0;
  MotorPrimitive primitive;
};

// Differentiable trajectory for one trip. Row t of targets is used only when
// triggers[t] != 0; predictions are evaluated at t * dt. The result is
// [T x 1]. Gradients reach the targets (through T and y0) and log_rate; the
// trigger times and signs are treated as constants.
diff::Var superpose(diff::Var targets, diff::Var log_rate, std::span<const double> triggers,
                    double dt, double epsilon, std::vector<TriggeredPrimitive>* record = nullptr);

}  // namespace accudrive::motor
