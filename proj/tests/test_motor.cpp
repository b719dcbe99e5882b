#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "accudrive/diff.hpp"
#include "accudrive/errors.hpp"
#include "accudrive/motor.hpp"
#include "support/random.hpp"

using accudrive::Tensor;
namespace motor = accudrive::motor;
namespace diff = accudrive::diff;

namespace {

motor::MotorParams default_head(std::uint64_t seed = 0, double log_rate = 0.0) {
  std::mt19937_64 rng(seed);
  return motor::init_params(45, 9, log_rate, rng);
}

// Reference trajectory without folding: y0 chains through every primitive.
struct NaiveTrajectory {
  std::vector<motor::MotorPrimitive> all;
  double value(double t) const {
    double v = 0.0;
    for (const auto& p : all) v += p.sign * p.magnitude / (1.0 + p.amplitude * std::exp(-(p.magnitude + p.rate) * (t - p.t0)));
    return v;
  }
};

}  // namespace

TEST(Propose, IdentityAtInit) {
  const auto p = default_head();
  std::vector<double> f(45);
  for (std::size_t i = 0; i < 45; ++i) f[i] = 0.01 * static_cast<double>(i) - 0.2;
  EXPECT_EQ(motor::propose(p, f), f);
}

TEST(Propose, BiasAndGain) {
  auto p = default_head();
  p.proposal_bias.fill(0.5);
  p.proposal_gain.fill(2.0);
  const std::vector<double> f(45, 0.25);
  EXPECT_EQ(motor::propose(p, f)[7], 1.0);
}

TEST(Propose, Elementwise) {
  std::mt19937_64 rng(1);
  auto p = default_head();
  p.proposal_gain = testing_support::uniform(1, 45, -2, 2, rng);
  std::vector<double> f(45, 0.3);
  const auto a = motor::propose(p, f);
  f[11] = -4.0;
  const auto b = motor::propose(p, f);
  for (std::size_t i = 0; i < 45; ++i) {
    if (i != 11) EXPECT_EQ(a[i], b[i]);
  }
  EXPECT_THROW(motor::propose(p, std::vector<double>(44)), accudrive::DimensionError);
}

TEST(Gate, ElementwiseProduct) {
  EXPECT_EQ(motor::gate(std::vector<double>{2, 3}, std::vector<double>{0, 1}),
            (std::vector<double>{0, 3}));
  EXPECT_EQ(motor::gate(std::vector<double>{2, 3}, std::vector<double>{0, 0}),
            (std::vector<double>{0, 0}));
  EXPECT_EQ(motor::gate(std::vector<double>{2, 3}, std::vector<double>{1, 1}),
            (std::vector<double>{2, 3}));
  EXPECT_THROW(motor::gate(std::vector<double>{2, 3}, std::vector<double>{1}),
               accudrive::DimensionError);
}

TEST(Compress, WidthsAndZeroParams) {
  auto p = default_head();
  EXPECT_EQ(p.weights[0].shape(), "[9x45]");
  EXPECT_EQ(p.weights[1].shape(), "[9x9]");
  EXPECT_EQ(p.weights[2].shape(), "[1x9]");
  EXPECT_EQ(p.log_rate.shape(), "[1x1]");
  for (auto& w : p.weights) w.fill(0.0);
  for (auto& b : p.biases) b.fill(0.0);
  EXPECT_EQ(motor::compress(p, std::vector<double>(45, 0.7)), 0.0);
  EXPECT_THROW(motor::compress(p, std::vector<double>(9)), accudrive::DimensionError);
}

TEST(Compress, GraphMatchesPlainAndFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::mt19937_64 init(3);
  auto p = motor::init_params(4, 3, 0.0, init);
  const Tensor x = testing_support::uniform(5, 4, -2, 2, rng);
  const Tensor w = testing_support::uniform(5, 1, -1, 1, rng);
  auto value = [&](const motor::MotorParams& q) {
    double s = 0.0;
    for (std::size_t t = 0; t < 5; ++t) s += w[t] * motor::compress(q, x.row(t));
    return s;
  };
  diff::Graph g;
  motor::MotorParamsT<diff::Var> v;
  v.proposal_bias = g.leaf(p.proposal_bias);
  v.proposal_gain = g.leaf(p.proposal_gain);
  v.log_rate = g.leaf(p.log_rate);
  for (std::size_t l = 0; l < 3; ++l) {
    v.weights[l] = g.leaf(p.weights[l]);
    v.biases[l] = g.leaf(p.biases[l]);
  }
  const diff::Var out = motor::compress(v, g.constant(x));
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(out.value()[t], motor::compress(p, x.row(t)));
  g.backward(diff::sum(diff::mul(out, g.constant(w))));
  auto check = [&](Tensor& target, const Tensor& analytic) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double saved = target[i];
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      target[i] = saved + h;
      const double up = value(p);
      target[i] = saved - h;
      const double down = value(p);
      target[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - analytic[i]);
      EXPECT_TRUE(err < 1e-8 || err < 1e-5 * std::abs(numeric)) << analytic[i] << " vs " << numeric;
    }
  };
  for (std::size_t l = 0; l < 3; ++l) {
    check(p.weights[l], g.grad(v.weights[l]));
    check(p.biases[l], g.grad(v.biases[l]));
  }
}

TEST(Primitive, AmplitudeAndSign) {
  const auto up = motor::make_primitive(0.5, 0.0, 0.0, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(up.amplitude, 5e5);
  EXPECT_EQ(up.sign, 1.0);
  const auto down = motor::make_primitive(-0.3, 0.0, 0.0, 1.0, 1e-6);
  EXPECT_EQ(down.sign, -1.0);
  EXPECT_DOUBLE_EQ(down.magnitude, 0.3);
}

TEST(Primitive, ZeroDeltaContributesNothing) {
  const auto p = motor::make_primitive(0.42, 0.42, 1.0, 3.0, 1e-6);
  EXPECT_EQ(p.magnitude, 0.0);
  EXPECT_EQ(p.amplitude, 0.0);
  for (double t : {1.0, 1.1, 5.0, 1e6}) EXPECT_EQ(p.contribution(t), 0.0);
}

TEST(Primitive, ValueAtOnset) {
  const auto p = motor::make_primitive(0.5, 0.0, 2.0, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(p.contribution(2.0), 0.5 / (1 + 5e5));
  EXPECT_NEAR(p.contribution(2.0), 1.0e-6, 1e-9);
}

TEST(Primitive, ConvergesAfterLogLatency) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mag(0.01, 1.0), rate(0.1, 10.0), coin(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const double T = mag(rng);
    const double R = rate(rng);
    const double S = coin(rng) < 0.5 ? -1.0 : 1.0;
    const auto p = motor::make_primitive(S * T, 0.0, 0.0, R, 1e-6);
    const double t = (std::log(T / 1e-6) + std::log(1000.0)) / (T + R);
    EXPECT_LE(std::abs(p.contribution(t) - S * T), 0.001 * T + 1e-12);
  }
}

TEST(Primitive, Monotone) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> target(-2, 2), rate(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = motor::make_primitive(target(rng), 0.0, 0.0, rate(rng), 1e-6);
    double prev = p.contribution(0.0);
    for (int k = 1; k < 2000; ++k) {
      const double y = p.contribution(0.01 * k);
      if (p.sign > 0) ASSERT_GE(y, prev);
      else ASSERT_LE(y, prev);
      ASSERT_LE(std::abs(y), p.magnitude);
      prev = y;
    }
  }
}

TEST(MotorState, ChainsTowardsLatestTarget) {
  motor::MotorState s;
  s.trigger(0.8, 0.0, 5.0, 1e-6);
  EXPECT_NEAR(s.evaluate(100.0), 0.8, 1e-12);
  s.trigger(-0.2, 100.0, 5.0, 1e-6);
  EXPECT_DOUBLE_EQ(s.active().back().y0, 0.8);
  EXPECT_NEAR(s.evaluate(200.0), -0.2, 1e-12);
}

TEST(MotorState, TwoPrimitivesAdd) {
  motor::MotorState s;
  const auto a = s.trigger(0.5, 0.0, 2.0, 1e-6);
  const auto b = s.trigger(1.0, 0.0, 2.0, 1e-6);
  const double t = 3.0;
  EXPECT_DOUBLE_EQ(s.evaluate(t), a.contribution(t) + b.contribution(t));
}

TEST(MotorState, NonFiniteTargetRejected) {
  motor::MotorState s;
  EXPECT_THROW(s.trigger(std::nan(""), 0.0, 1.0, 1e-6), accudrive::NumericError);
  EXPECT_THROW(s.trigger(INFINITY, 0.0, 1.0, 1e-6), accudrive::NumericError);
}

TEST(MotorState, FoldingMatchesNaiveSum) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> target(-1, 1), coin(0, 1);
  for (double rate : {0.5, 20.0, 150.0}) {
    motor::MotorState s;
    NaiveTrajectory naive;
    for (int k = 0; k < 1000; ++k) {
      const double t = 0.1 * k;
      if (coin(rng) < 0.3) {
        const double y0 = naive.value(t);
        s.trigger(target(rng), t, rate, 1e-6);
        auto p = s.active().back();
        ASSERT_NEAR(p.y0, y0, 1e-9);
        p.y0 = y0;
        naive.all.push_back(motor::make_primitive(p.sign * p.magnitude + y0, y0, t, rate, 1e-6));
      }
      ASSERT_NEAR(s.evaluate(t), naive.value(t), 1e-9) << "rate " << rate << " step " << k;
    }
    if (rate > 1.0) EXPECT_LT(s.active().size(), naive.all.size());
  }
}

TEST(MotorState, ZeroDeltaTriggerIsNeutral) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> target(-1, 1);
  motor::MotorState a, b;
  for (int k = 0; k < 300; ++k) {
    const double t = 0.1 * k;
    if (k % 7 == 0) {
      const double y = target(rng);
      a.trigger(y, t, 4.0, 1e-6);
      b.trigger(y, t, 4.0, 1e-6);
    }
    if (k % 5 == 0) b.trigger(b.evaluate(t), t, 4.0, 1e-6);
    ASSERT_EQ(a.evaluate(t), b.evaluate(t)) << k;
  }
}

namespace {

Tensor plain_superpose(const Tensor& targets, double log_rate, const std::vector<double>& triggers,
                       double dt) {
  motor::MotorState s;
  Tensor out(targets.rows(), 1);
  for (std::size_t t = 0; t < targets.rows(); ++t) {
    const double time = static_cast<double>(t) * dt;
    if (triggers[t] != 0.0) s.trigger(targets[t], time, std::exp(log_rate), 1e-6);
    out[t] = s.evaluate(time);
  }
  return out;
}

}  // namespace

TEST(Superpose, ForwardMatchesMotorState) {
  std::mt19937_64 rng(8);
  const Tensor targets = testing_support::uniform(60, 1, -1, 1, rng);
  std::vector<double> triggers(60);
  for (auto& v : triggers) v = std::uniform_real_distribution<double>(0, 1)(rng) < 0.4 ? 1.0 : 0.0;
  diff::Graph g;
  std::vector<motor::TriggeredPrimitive> record;
  const diff::Var y = motor::superpose(g.leaf(targets), g.leaf(Tensor::scalar(2.5)), triggers, 0.1,
                                       1e-6, &record);
  EXPECT_EQ(y.value(), plain_superpose(targets, 2.5, triggers, 0.1));
  std::size_t fired = 0;
  for (double v : triggers) fired += v != 0.0;
  EXPECT_EQ(record.size(), fired);
}

TEST(Superpose, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (double log_rate : {0.0, 2.0, 4.5}) {
    Tensor targets = testing_support::uniform(40, 1, -1, 1, rng);
    std::vector<double> triggers(40, 0.0);
    for (std::size_t t = 0; t < 40; t += 3) triggers[t] = 1.0;
    triggers[1] = 1.0;
    const Tensor w = testing_support::uniform(40, 1, -1, 1, rng);
    auto value = [&](const Tensor& tg, double r) {
      const Tensor y = plain_superpose(tg, r, triggers, 0.1);
      double s = 0;
      for (std::size_t t = 0; t < 40; ++t) s += w[t] * y[t];
      return s;
    };
    diff::Graph g;
    const diff::Var tv = g.leaf(targets);
    const diff::Var rv = g.leaf(Tensor::scalar(log_rate));
    g.backward(diff::sum(diff::mul(motor::superpose(tv, rv, triggers, 0.1, 1e-6), g.constant(w))));
    for (std::size_t t = 0; t < 40; ++t) {
      const double saved = targets[t];
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      targets[t] = saved + h;
      const double up = value(targets, log_rate);
      targets[t] = saved - h;
      const double down = value(targets, log_rate);
      targets[t] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - g.grad(tv)[t]);
      EXPECT_TRUE(err < 1e-8 || err < 1e-5 * std::abs(numeric))
          << "r=" << log_rate << " t=" << t << ": " << g.grad(tv)[t] << " vs " << numeric;
      if (triggers[t] == 0.0) EXPECT_EQ(g.grad(tv)[t], 0.0);
    }
    const double h = 1e-6 * std::max(1.0, std::abs(log_rate));
    const double numeric = (value(targets, log_rate + h) - value(targets, log_rate - h)) / (2 * h);
    const double err = std::abs(numeric - g.grad(rv).item());
    EXPECT_TRUE(err < 1e-8 || err < 1e-5 * std::abs(numeric)) << g.grad(rv).item() << " vs " << numeric;
  }
}
