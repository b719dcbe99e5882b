#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "accudrive/accumulator.hpp"
#include "accudrive/diff.hpp"
#include "accudrive/errors.hpp"
#include "support/random.hpp"

using accudrive::Tensor;
namespace acc = accudrive::accumulator;
namespace diff = accudrive::diff;

namespace {

// Parameters for n neurons with the given leak (0 allowed), bias, gain, reset.
acc::AccumulatorParams make(std::size_t n, double rho, double a = 0.0, double b = 1.0,
                            double vr = 0.0) {
  acc::AccumulatorParams p = acc::init_params(n, 0.1);
  // softplus underflows to exactly 0 far in the negative tail.
  p.leak_raw.fill(rho == 0.0 ? -1000.0 : std::log(std::expm1(rho)));
  p.bias.fill(a);
  p.gain.fill(b);
  p.v_reset.fill(vr);
  return p;
}

}  // namespace

TEST(Step, IntegratesBelowThreshold) {
  const auto p = make(1, 0.0);
  const auto r = acc::step(p, {{0.0}}, std::vector<double>{0.5}, 0.1);
  EXPECT_DOUBLE_EQ(r.state.potential[0], 0.05);
  EXPECT_EQ(r.spikes[0], 0.0);
}

TEST(Step, LeakOnly) {
  const auto p = make(1, 0.5);
  EXPECT_NEAR(acc::effective_leak(p)[0], 0.5, 1e-15);
  const auto r = acc::step(p, {{0.8}}, std::vector<double>{0.0}, 0.1);
  EXPECT_NEAR(r.state.potential[0], 0.76, 1e-15);
}

TEST(Step, CrossingSpikesAndResets) {
  const auto p = make(1, 0.0, 0.0, 1.0, -0.25);
  const auto r = acc::step(p, {{0.95}}, std::vector<double>{1.0}, 0.1);
  EXPECT_EQ(r.spikes[0], 1.0);
  EXPECT_EQ(r.state.potential[0], -0.25);
}

TEST(Step, Errors) {
  const auto p = make(2, 0.1);
  EXPECT_THROW(acc::step(p, acc::initial_state(2), std::vector<double>{1, 1}, 0.0),
               accudrive::ArgumentError);
  EXPECT_THROW(acc::step(p, acc::initial_state(2), std::vector<double>{1}, 0.1),
               accudrive::DimensionError);
}

TEST(Step, DefaultInitIsLeakyIntegrator) {
  const auto p = acc::init_params(45, 0.1);
  for (double r : acc::effective_leak(p)) EXPECT_NEAR(r, 0.1, 1e-15);
  EXPECT_EQ(p.bias, Tensor(1, 45, 0.0));
  EXPECT_EQ(p.gain, Tensor(1, 45, 1.0));
  EXPECT_EQ(p.v_reset, Tensor(1, 45, 0.0));
  EXPECT_EQ(acc::initial_state(45).potential, std::vector<double>(45, 0.0));
}

TEST(Step, LeakIsNeverNegative) {
  std::mt19937_64 rng(0);
  auto p = acc::init_params(200, 0.1);
  for (double& v : p.leak_raw.values()) v = std::uniform_real_distribution<double>(-50, 50)(rng);
  for (double r : acc::effective_leak(p)) EXPECT_GE(r, 0.0);
}

TEST(Properties, ClosedFormSpikeTiming) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> drive(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = drive(rng);
    const auto p = make(1, 0.0, c, 0.0);
    const std::size_t period = static_cast<std::size_t>(std::ceil(1.0 / (c * 0.1)));
    acc::AccumulatorState s = acc::initial_state(1);
    for (std::size_t t = 0; t < 1000; ++t) {
      const auto r = acc::step(p, s, std::vector<double>{0.0}, 0.1);
      ASSERT_EQ(r.spikes[0], (t + 1) % period == 0 ? 1.0 : 0.0) << "c=" << c << " t=" << t;
      s = r.state;
    }
  }
}

TEST(Properties, LeakOnlyDecayIsGeometric) {
  const auto p = make(1, 0.3);
  const double rho = acc::effective_leak(p)[0];
  acc::AccumulatorState s{{0.9}};
  for (int t = 1; t <= 100; ++t) {
    s = acc::step(p, s, std::vector<double>{0.0}, 0.1).state;
    const double expected = 0.9 * std::pow(1 - rho * 0.1, t);
    ASSERT_NEAR(s.potential[0], expected, 1e-14 * expected) << t;
  }
}

TEST(Properties, NeuronsAreIndependent) {
  std::mt19937_64 rng(2);
  auto p = make(6, 0.2);
  const Tensor x = testing_support::uniform(50, 6, 0, 4, rng);
  Tensor y = x;
  for (std::size_t t = 0; t < 50; ++t) y(t, 3) += 1.5;
  acc::AccumulatorState a = acc::initial_state(6), b = acc::initial_state(6);
  bool differs = false;
  for (std::size_t t = 0; t < 50; ++t) {
    const auto ra = acc::step(p, a, x.row(t), 0.1);
    const auto rb = acc::step(p, b, y.row(t), 0.1);
    for (std::size_t i = 0; i < 6; ++i) {
      if (i == 3) {
        differs |= ra.state.potential[i] != rb.state.potential[i];
        continue;
      }
      ASSERT_EQ(ra.state.potential[i], rb.state.potential[i]);
      ASSERT_EQ(ra.spikes[i], rb.spikes[i]);
    }
    a = ra.state;
    b = rb.state;
  }
  EXPECT_TRUE(differs);
}

TEST(Properties, SpikesAreBinary) {
  std::mt19937_64 rng(3);
  const auto p = make(10, 0.1);
  acc::AccumulatorState s = acc::initial_state(10);
  for (int t = 0; t < 200; ++t) {
    const Tensor x = testing_support::uniform(1, 10, -5, 10, rng);
    const auto r = acc::step(p, s, x.values(), 0.1);
    for (double v : r.spikes) ASSERT_TRUE(v == 0.0 || v == 1.0);
    s = r.state;
  }
}

namespace {

struct ScanFixture {
  acc::AccumulatorParams params;
  Tensor x;
};

}  // namespace

TEST(Scan, ForwardMatchesSteppingBitForBit) {
  std::mt19937_64 rng(4);
  auto p = make(8, 0.1, 0.2, 1.3, 0.1);
  const Tensor x = testing_support::uniform(40, 8, -1, 3, rng);
  diff::Graph g;
  const acc::AccumulatorParamsT<diff::Var> v{g.leaf(p.leak_raw), g.leaf(p.bias), g.leaf(p.gain),
                                             g.leaf(p.v_reset)};
  const auto r = acc::scan(v, g.leaf(x), 0.1, {});
  acc::AccumulatorState s = acc::initial_state(8);
  for (std::size_t t = 0; t < 40; ++t) {
    const auto st = acc::step(p, s, x.row(t), 0.1);
    for (std::size_t i = 0; i < 8; ++i) {
      ASSERT_EQ(st.spikes[i], r.spikes.value()(t, i));
      ASSERT_EQ(st.state.potential[i], r.potentials(t, i));
    }
    s = st.state;
  }
}

TEST(Scan, BpttWithoutSpikesMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  ScanFixture f{make(4, 0.2, 0.1, 0.7, 0.0), testing_support::uniform(10, 4, -1, 1, rng)};
  const Tensor w = testing_support::uniform(10, 4, -1, 1, rng);
  const acc::SpikeSettings settings{};

  diff::Graph g;
  const acc::AccumulatorParamsT<diff::Var> v{g.leaf(f.params.leak_raw), g.leaf(f.params.bias),
                                             g.leaf(f.params.gain), g.leaf(f.params.v_reset)};
  const diff::Var xv = g.leaf(f.x);
  const auto r = acc::scan(v, xv, 0.1, settings);
  for (double s : r.spikes.value().values()) ASSERT_EQ(s, 0.0);
  g.backward(diff::sum(diff::mul(r.spikes, g.constant(w))));

  // Reference derivative: the plain step with a spike whose value is frozen
  // at the unperturbed run but whose slope is the surrogate's.
  auto logistic = [&](double v) {
    return 1.0 / (1.0 + std::exp(-settings.sharpness * (v - settings.threshold)));
  };
  std::vector<std::vector<double>> v0(10, std::vector<double>(4));
  {
    acc::AccumulatorState s = acc::initial_state(4);
    for (std::size_t t = 0; t < 10; ++t) {
      s = acc::step(f.params, s, f.x.row(t), 0.1, settings, [&](double v, std::size_t i) {
            v0[t][i] = v;
            return v >= settings.threshold ? 1.0 : 0.0;
          }).state;
    }
  }
  auto smooth = [&](const ScanFixture& q) {
    acc::AccumulatorState s = acc::initial_state(4);
    double total = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
      const auto r = acc::step(q.params, s, q.x.row(t), 0.1, settings, [&](double v, std::size_t i) {
        return (v0[t][i] >= settings.threshold ? 1.0 : 0.0) + logistic(v) - logistic(v0[t][i]);
      });
      for (std::size_t i = 0; i < 4; ++i) total += w(t, i) * r.spikes[i];
      s = r.state;
    }
    return total;
  };

  ScanFixture probe = f;
  auto check = [&](Tensor& target, const Tensor& analytic) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double saved = target[i];
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      target[i] = saved + h;
      const double up = smooth(probe);
      target[i] = saved - h;
      const double down = smooth(probe);
      target[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - analytic[i]);
      EXPECT_TRUE(err < 1e-8 || err < 1e-5 * std::abs(numeric)) << analytic[i] << " vs " << numeric;
    }
  };
  check(probe.params.leak_raw, g.grad(v.leak_raw));
  check(probe.params.bias, g.grad(v.bias));
  check(probe.params.gain, g.grad(v.gain));
  check(probe.x, g.grad(xv));
  check(probe.params.v_reset, g.grad(v.v_reset));
}

TEST(Scan, TruncationStopsCarry) {
  std::mt19937_64 rng(6);
  const auto p = make(2, 0.2);
  const Tensor x = testing_support::uniform(6, 2, -1, 1, rng);
  Tensor w(6, 2, 0.0);
  w(5, 0) = 1.0;  // only the last step is observed
  diff::Graph g;
  const acc::AccumulatorParamsT<diff::Var> v{g.leaf(p.leak_raw), g.leaf(p.bias), g.leaf(p.gain),
                                             g.leaf(p.v_reset)};
  const diff::Var xv = g.leaf(x);
  const auto r = acc::scan(v, xv, 0.1, {}, 3);
  g.backward(diff::sum(diff::mul(r.spikes, g.constant(w))));
  const Tensor& gx = g.grad(xv);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(gx(t, 0), 0.0) << t;
  for (std::size_t t = 3; t < 6; ++t) EXPECT_NE(gx(t, 0), 0.0) << t;
  for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(gx(t, 1), 0.0);
}
