#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fednoil/errors.hpp"
#include "fednoil/model.hpp"
#include "fednoil/rng.hpp"
#include "support/oracles.hpp"

namespace fednoil {
namespace {

const Architecture kLinear2{2, 0, 2, Activation::kTanh};

ModelParams linear_with_bias(std::vector<double> bias) {
  ModelParams p = ModelParams::zeros(
      {2, 0, static_cast<int>(bias.size()), Activation::kTanh});
  std::copy(bias.begin(), bias.end(), p.values.end() - bias.size());
  return p;
}

TEST(Forward, ZeroModelIsUniformAtAnyTemperature) {
  const ModelParams p = ModelParams::zeros({3, 0, 5, Activation::kTanh});
  const std::vector<double> x = {0.3, -1.0, 2.0};
  for (double tau : {0.1, 0.5, 1.0, 4.0}) {
    for (double q : forward(p, x, tau)) EXPECT_DOUBLE_EQ(q, 0.2);
  }
}

TEST(Forward, TemperatureSharpensLogits) {
  const ModelParams p = linear_with_bias({2.0, 0.0});
  const std::vector<double> x = {0.0, 0.0};
  const auto q = forward(p, x, 0.5);
  const double e4 = std::exp(4.0);
  EXPECT_NEAR(q[0], e4 / (e4 + 1.0), 1e-15);
  EXPECT_NEAR(q[0], 0.98201, 5e-6);
  EXPECT_NEAR(q[1], 0.01799, 5e-6);
}

TEST(Forward, TemperatureKeepsArgmax) {
  Rng rng(4);
  const ModelParams p =
      ModelParams::initialize({3, 6, 4, Activation::kTanh}, 9);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(3);
    for (double& v : x) v = standard_normal(rng);
    const auto a = forward(p, x, 1.0);
    const auto b = forward(p, x, 0.5);
    EXPECT_EQ(std::max_element(a.begin(), a.end()) - a.begin(),
              std::max_element(b.begin(), b.end()) - b.begin());
    EXPECT_NEAR(std::accumulate(b.begin(), b.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Forward, StableForHugeLogits) {
  const ModelParams p = linear_with_bias({1000.0, -1000.0});
  const auto q = forward(p, std::vector<double>{0.0, 0.0}, 0.5);
  EXPECT_EQ(q[0], 1.0);
  EXPECT_EQ(q[1], 0.0);
}

TEST(Forward, DimensionMismatchIsAShapeError) {
  const ModelParams p = ModelParams::zeros(kLinear2);
  EXPECT_THROW(forward(p, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
  EXPECT_THROW(forward(p, std::vector<double>{1.0, 2.0}, 0.0), DomainError);
}

TEST(Predict, TiesGoToTheSmallestClass) {
  const ModelParams p = ModelParams::zeros({2, 0, 3, Activation::kTanh});
  EXPECT_EQ(predict(p, std::vector<double>{1.0, 1.0}), 0);
  EXPECT_EQ(predict(linear_with_bias({0.0, 1.0, 1.0}),
                    std::vector<double>{0.0, 0.0}),
            1);
}

TEST(Loss, UniformModelGivesLogC) {
  const ModelParams p = ModelParams::zeros({2, 0, 4, Activation::kTanh});
  const std::vector<double> x = {0.5, 0.5};
  const std::vector<Example> batch = {{x, 2, 1.0}};
  EXPECT_NEAR(loss_and_grad(p, batch).loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(std::log(4.0), 1.3863, 5e-5);
}

TEST(Loss, PerfectFitHasZeroLossAndGradient) {
  const ModelParams p = linear_with_bias({800.0, 0.0});
  const std::vector<double> x = {0.2, -0.1};
  const std::vector<Example> batch = {{x, 0, 1.0}};
  const auto r = loss_and_grad(p, batch);
  EXPECT_EQ(r.loss, 0.0);
  for (double g : r.grad) EXPECT_EQ(g, 0.0);
}

TEST(Loss, WeightsScaleTheirSample) {
  const ModelParams p = ModelParams::initialize({2, 3, 3, Activation::kTanh}, 1);
  const std::vector<double> a = {0.1, 0.4};
  const std::vector<double> b = {-0.7, 0.2};
  const std::vector<Example> full = {{a, 0, 1.0}, {b, 2, 1.0}};
  const std::vector<Example> masked = {{a, 0, 1.0}, {b, 2, 0.0}};
  const std::vector<Example> only_a = {{a, 0, 1.0}};
  EXPECT_NEAR(loss_and_grad(p, masked).loss,
              0.5 * loss_and_grad(p, only_a).loss, 1e-15);
  EXPECT_GT(loss_and_grad(p, full).loss, loss_and_grad(p, masked).loss);
}

TEST(Loss, RejectsBadLabelsAndWeights) {
  const ModelParams p = ModelParams::zeros(kLinear2);
  const std::vector<double> x = {0.0, 0.0};
  const std::vector<Example> bad_label = {{x, 2, 1.0}};
  const std::vector<Example> bad_weight = {{x, 0, -1.0}};
  EXPECT_THROW(loss_and_grad(p, bad_label), ShapeError);
  EXPECT_THROW(loss_and_grad(p, bad_weight), DomainError);
}

TEST(Loss, NonFiniteInputIsANumericError) {
  const ModelParams p = ModelParams::initialize(kLinear2, 3);
  const std::vector<double> x = {NAN, 0.0};
  const std::vector<Example> batch = {{x, 0, 1.0}};
  EXPECT_THROW(loss_and_grad(p, batch), NumericError);
}

void check_gradient(const Architecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p = ModelParams::initialize(arch, seed);
  for (double& v : p.values) v += 0.5 * standard_normal(rng);
  std::vector<std::vector<double>> xs(5, std::vector<double>(arch.input_dim));
  std::vector<Example> batch;
  for (auto& x : xs) {
    for (double& v : x) v = standard_normal(rng);
    batch.push_back({x, static_cast<ClassId>(uniform_index(rng, arch.num_classes)),
                     uniform01(rng) + 0.5});
  }
  const auto analytic = loss_and_grad(p, batch, 0.7).grad;
  const auto numeric = testing::finite_difference_gradient(
      [&](const std::vector<double>& v) {
        ModelParams q = p;
        q.values = v;
        return loss_and_grad(q, batch, 0.7).loss;
      },
      p.values);
  EXPECT_LT(testing::max_relative_error(analytic, numeric), 1e-4);
}

TEST(Gradient, MatchesFiniteDifferencesLinear) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    check_gradient({4, 0, 3, Activation::kTanh}, s);
  }
}

TEST(Gradient, MatchesFiniteDifferencesTanh) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    check_gradient({3, 5, 4, Activation::kTanh}, s);
  }
}

TEST(Gradient, MatchesFiniteDifferencesRelu) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    check_gradient({3, 5, 4, Activation::kRelu}, s);
  }
}

TEST(Gradient, AccumulateAddsScaledGradient) {
  const ModelParams p = ModelParams::initialize({2, 3, 2, Activation::kTanh}, 5);
  const std::vector<double> x = {0.3, 0.9};
  const std::vector<Example> batch = {{x, 1, 1.0}};
  const auto base = loss_and_grad(p, batch);
  std::vector<double> grad(p.values.size(), 1.0);
  const double loss = accumulate_loss_and_grad(p, batch, 1.0, 3.0, grad);
  EXPECT_NEAR(loss, 3.0 * base.loss, 1e-14);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    EXPECT_NEAR(grad[i], 1.0 + 3.0 * base.grad[i], 1e-14);
  }
  std::vector<double> wrong(p.values.size() + 1);
  EXPECT_THROW(accumulate_loss_and_grad(p, batch, 1.0, 1.0, wrong),
               ShapeError);
}

TEST(Sgd, ZeroGradientWithoutDecayIsAFixedPoint) {
  ModelParams p = ModelParams::initialize(kLinear2, 2);
  const ModelParams before = p;
  OptimizerState s = OptimizerState::zeros_like(p);
  const std::vector<double> g(p.values.size(), 0.0);
  sgd_step(p, s, g, {0.05, 0.5, 0.0, 32});
  EXPECT_EQ(p, before);
}

TEST(Sgd, PlainStepWithoutMomentum) {
  ModelParams p = ModelParams::initialize(kLinear2, 2);
  const ModelParams before = p;
  OptimizerState s = OptimizerState::zeros_like(p);
  std::vector<double> g(p.values.size());
  std::iota(g.begin(), g.end(), 1.0);
  sgd_step(p, s, g, {0.1, 0.0, 0.0, 32});
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(p.values[i], before.values[i] - 0.1 * g[i]);
  }
}

TEST(Sgd, TwoMomentumStepsMoveTwoAndAHalfGradients) {
  ModelParams p = ModelParams::zeros(kLinear2);
  OptimizerState s = OptimizerState::zeros_like(p);
  std::vector<double> g(p.values.size());
  std::iota(g.begin(), g.end(), -2.0);
  sgd_step(p, s, g, {1.0, 0.5, 0.0, 32});
  sgd_step(p, s, g, {1.0, 0.5, 0.0, 32});
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_DOUBLE_EQ(p.values[i], -2.5 * g[i]);
  }
}

TEST(Sgd, WeightDecayPullsTowardZero) {
  ModelParams p = ModelParams::zeros(kLinear2);
  std::fill(p.values.begin(), p.values.end(), 2.0);
  OptimizerState s = OptimizerState::zeros_like(p);
  const std::vector<double> g(p.values.size(), 0.0);
  sgd_step(p, s, g, {0.5, 0.0, 0.1, 32});
  for (double v : p.values) EXPECT_DOUBLE_EQ(v, 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Sgd, ShapeMismatchThrows) {
  ModelParams p = ModelParams::zeros(kLinear2);
  OptimizerState s = OptimizerState::zeros_like(p);
  const std::vector<double> g(1, 0.0);
  EXPECT_THROW(sgd_step(p, s, g, {}), ShapeError);
}

TEST(Accuracy, UniformModelPicksClassZero) {
  Dataset d;
  d.num_classes = 2;
  d.features = Matrix(5, 2);
  d.true_labels = {0, 1, 0, 1, 1};
  EXPECT_DOUBLE_EQ(evaluate_accuracy(ModelParams::zeros(kLinear2), d), 0.4);
}

TEST(Accuracy, MatchesPerSampleArgmax) {
  Rng rng(21);
  Dataset d;
  d.num_classes = 3;
  d.features = Matrix(0, 2);
  for (int i = 0; i < 10; ++i) {
    d.features.append_row(
        std::vector<double>{standard_normal(rng), standard_normal(rng)});
    d.true_labels.push_back(static_cast<ClassId>(uniform_index(rng, 3)));
  }
  const ModelParams p = ModelParams::initialize({2, 4, 3, Activation::kRelu}, 6);
  int correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto q = logits(p, d.features.row(i));
    const auto best = std::max_element(q.begin(), q.end()) - q.begin();
    correct += best == d.true_labels[i];
  }
  EXPECT_DOUBLE_EQ(evaluate_accuracy(p, d), correct / 10.0);
}

TEST(Init, UniformWithinFanInBound) {
  const Architecture arch{9, 4, 3, Activation::kTanh};
  const ModelParams p = ModelParams::initialize(arch, 1);
  ASSERT_EQ(p.values.size(), arch.parameter_count());
  EXPECT_EQ(arch.parameter_count(), 4u * 9 + 4 + 3 * 4 + 3);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_LE(std::abs(p.values[i]), 1.0 / 3);
  for (std::size_t i = 40; i < p.values.size(); ++i) {
    EXPECT_LE(std::abs(p.values[i]), 0.5);
  }
  EXPECT_EQ(p, ModelParams::initialize(arch, 1));
  EXPECT_NE(p, ModelParams::initialize(arch, 2));
  EXPECT_TRUE(all_finite(p.values));
}

TEST(Init, ZeroOutputLayerGivesUniformPredictions) {
  const Architecture arch{3, 5, 4, Activation::kTanh};
  const ModelParams p = ModelParams::initialize(arch, 7, OutputInit::kZero);
  const ModelParams u = ModelParams::initialize(arch, 7);
  EXPECT_TRUE(std::equal(p.values.begin(), p.values.begin() + 20,
                         u.values.begin()));
  for (double q : forward(p, std::vector<double>{1.0, -2.0, 0.5})) {
    EXPECT_DOUBLE_EQ(q, 0.25);
  }
  const ModelParams lin =
      ModelParams::initialize({3, 0, 4, Activation::kTanh}, 7, OutputInit::kZero);
  EXPECT_EQ(lin, ModelParams::zeros({3, 0, 4, Activation::kTanh}));
}

TEST(Serialize, RoundTripsBitExactly) {
  const ModelParams p = ModelParams::initialize({7, 3, 5, Activation::kRelu}, 3);
  const auto blob = serialize(p);
  EXPECT_EQ(blob.size(), 16 + 8 * p.values.size());
  EXPECT_EQ(blob[0], 'F');
  EXPECT_EQ(blob[3], 'M');
  EXPECT_EQ(deserialize(blob), p);

  testing::TempDir dir("model");
  save_params(p, dir.path() / "m.bin");
  EXPECT_EQ(load_params(dir.path() / "m.bin"), p);
}

TEST(Serialize, RejectsCorruptBlobs) {
  const auto blob = serialize(ModelParams::zeros(kLinear2));
  auto bad_magic = blob;
  bad_magic[0] ^= 0xFF;
  EXPECT_THROW(deserialize(bad_magic), ParseError);
  auto truncated = blob;
  truncated.pop_back();
  EXPECT_THROW(deserialize(truncated), ParseError);
  EXPECT_THROW(deserialize(std::span(blob).first(10)), ParseError);
  auto bad_version = blob;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize(bad_version), ParseError);
}

}  // namespace
}  // namespace fednoil
