#pragma once

// Scalar kernels shared by the plain simulation path and the differentiable
// graph path. Both routes must call these so their forward values agree bit
// for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace accudrive::kernels {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln(1 + e^x), switching to x + ln(1 + e^-x) above 20 to avoid overflow.
inline double softplus(double x) {
  if (x > 20.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) { return y > 20.0 ? y : std::log(std::expm1(y)); }

inline double mish(double x) { return x * std::tanh(softplus(x)); }

inline double mish_derivative(double x) {
  const double t = std::tanh(softplus(x));
  return t + x * (1.0 - t * t) * sigmoid(x);
}

// tanh kept strictly inside (-1, 1); plain tanh rounds to +-1 beyond |x| ~ 19.
inline double saturate(double x) {
  constexpr double kEdge = 1.0 - 0x1p-53;
  return std::clamp(std::tanh(x), -kEdge, kEdge);
}

inline double heaviside(double v, double threshold) { return v >= threshold ? 1.0 : 0.0; }

// Derivative of the logistic sigmoid with sharpness alpha, centred on the threshold.
inline double spike_surrogate(double v, double threshold, double alpha) {
  const double s = sigmoid(alpha * (v - threshold));
  return alpha * s * (1.0 - s);
}

// out[i] = sum_j w[i, j] * x[j] + b[i]; w is row-major [out.size() x x.size()].
inline void affine_row(std::span<const double> w, std::span<const double> b,
                       std::span<const double> x, std::span<double> out) {
  const std::size_t m = x.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* wi = w.data() + i * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += wi[j] * x[j];
    out[i] = acc + b[i];
  }
}

// One explicit Euler step of dv/dt = -rho * v + (bias + gain * x).
inline double euler_potential(double v, double rho, double bias, double gain, double x,
                              double dt) {
  const double drive = bias + gain * x;
  return v + (-rho * v + drive) * dt;
}

// Hard reset written as a blend so the reset value receives gradient.
inline double reset_potential(double spike, double v_reset, double v_pre) {
  return spike * v_reset + (1.0 - spike) * v_pre;
}

}  // namespace accudrive::kernels
