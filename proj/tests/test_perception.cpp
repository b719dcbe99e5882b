#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "accudrive/diff.hpp"
#include "accudrive/errors.hpp"
#include "accudrive/perception.hpp"
#include "support/random.hpp"

using accudrive::Tensor;
namespace perception = accudrive::perception;
namespace diff = accudrive::diff;

TEST(Perception, DefaultShapes) {
  std::mt19937_64 rng(0);
  const auto p = perception::init_params({}, rng);
  ASSERT_EQ(p.weights.size(), 2u);
  EXPECT_EQ(p.weights[0].shape(), "[63x9]");
  EXPECT_EQ(p.biases[0].shape(), "[1x63]");
  EXPECT_EQ(p.weights[1].shape(), "[45x63]");
  EXPECT_EQ(p.biases[1].shape(), "[1x45]");
}

TEST(Perception, InitWithinFanInBound) {
  std::mt19937_64 rng(1);
  const auto p = perception::init_params({}, rng);
  for (std::size_t l = 0; l < 2; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.weights[l].cols()));
    for (double w : p.weights[l].values()) EXPECT_LE(std::abs(w), bound);
    for (double b : p.biases[l].values()) EXPECT_LE(std::abs(b), bound);
  }
}

TEST(Perception, ZeroParametersGiveZeroFeatures) {
  std::mt19937_64 rng(2);
  auto p = perception::init_params({}, rng);
  for (auto& w : p.weights) w.fill(0.0);
  for (auto& b : p.biases) b.fill(0.0);
  const std::vector<double> x{1, -2, 3, 0.5, 7, -1, 0, 2, 9};
  for (double f : perception::perceive(p, x)) EXPECT_EQ(f, 0.0);
}

TEST(Perception, OutputBoundedForExtremeInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = perception::init_params({}, rng);
    for (double& w : p.weights[1].values()) w *= 50.0;
    const Tensor x = testing_support::uniform(1, 9, -1e3, 1e3, rng);
    for (double f : perception::perceive(p, x.values())) ASSERT_LT(std::abs(f), 1.0);
  }
}

TEST(Perception, ChannelMismatchRejected) {
  std::mt19937_64 rng(4);
  const auto p = perception::init_params({}, rng);
  const std::vector<double> x(8, 0.0);
  EXPECT_THROW(perception::perceive(p, x), accudrive::DimensionError);
}

TEST(Perception, DeterministicAndMatchesGraphRoute) {
  std::mt19937_64 rng(5);
  const auto p = perception::init_params({}, rng);
  const Tensor x = testing_support::normal(7, 9, 1.0, rng);
  diff::Graph g;
  perception::PerceptionParamsT<diff::Var> vars;
  for (std::size_t l = 0; l < 2; ++l) {
    vars.weights.push_back(g.leaf(p.weights[l]));
    vars.biases.push_back(g.leaf(p.biases[l]));
  }
  const diff::Var out = perception::perceive(vars, g.constant(x));
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto a = perception::perceive(p, x.row(t));
    const auto b = perception::perceive(p, x.row(t));
    ASSERT_EQ(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], out.value()(t, i));
  }
}

TEST(Perception, ConfigurableDepthAndWidth) {
  std::mt19937_64 rng(6);
  const perception::PerceptionShape shape{4, 3, 2, 3};
  const auto p = perception::init_params(shape, rng);
  ASSERT_EQ(p.weights.size(), 3u);
  EXPECT_EQ(p.weights[0].shape(), "[12x4]");
  EXPECT_EQ(p.weights[1].shape(), "[12x12]");
  EXPECT_EQ(p.weights[2].shape(), "[8x12]");
  EXPECT_EQ(perception::perceive(p, std::vector<double>{1, 2, 3, 4}).size(), 8u);
}

TEST(Perception, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const perception::PerceptionShape shape{3, 2, 2, 2};
  auto p = perception::init_params(shape, rng);
  Tensor x = testing_support::uniform(2, 3, -2, 2, rng);
  const Tensor w = testing_support::uniform(2, 6, -1, 1, rng);

  auto value = [&](const perception::PerceptionParams& q, const Tensor& xx) {
    double s = 0.0;
    for (std::size_t t = 0; t < xx.rows(); ++t) {
      const auto f = perception::perceive(q, xx.row(t));
      for (std::size_t i = 0; i < f.size(); ++i) s += w(t, i) * f[i];
    }
    return s;
  };

  diff::Graph g;
  perception::PerceptionParamsT<diff::Var> vars;
  for (std::size_t l = 0; l < 2; ++l) {
    vars.weights.push_back(g.leaf(p.weights[l]));
    vars.biases.push_back(g.leaf(p.biases[l]));
  }
  const diff::Var xv = g.leaf(x);
  g.backward(diff::sum(diff::mul(perception::perceive(vars, xv), g.constant(w))));

  auto check = [&](Tensor& target, const Tensor& analytic) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double saved = target[i];
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      target[i] = saved + h;
      const double up = value(p, x);
      target[i] = saved - h;
      const double down = value(p, x);
      target[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - analytic[i]);
      EXPECT_TRUE(err < 1e-8 || err < 1e-5 * std::abs(numeric)) << analytic[i] << " vs " << numeric;
    }
  };
  for (std::size_t l = 0; l < 2; ++l) {
    check(p.weights[l], g.grad(vars.weights[l]));
    check(p.biases[l], g.grad(vars.biases[l]));
  }
  check(x, g.grad(xv));
}
