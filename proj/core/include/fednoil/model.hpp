#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fednoil/data.hpp"

namespace fednoil {

enum class Activation : std::uint8_t { kTanh = 0, kRelu = 1 };

// How the output layer starts. kZero makes the initial model predict the
// uniform distribution for every input.
enum class OutputInit : std::uint8_t { kUniform = 0, kZero = 1 };

// Softmax regression when hidden == 0, otherwise one hidden layer.
struct Architecture {
  std::size_t input_dim = 2;
  std::size_t hidden = 0;
  int num_classes = 2;
  Activation activation = Activation::kTanh;

  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

// Flat parameter vector. Layout:
//   linear: W[C x d], b[C]
//   hidden: W1[h x d], b1[h], W2[C x h], b2[C]
// All matrices row-major.
struct ModelParams {
  Architecture arch;
  std::vector<double> values;

  static ModelParams zeros(const Architecture& arch);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  static ModelParams initialize(const Architecture& arch, std::uint64_t seed,
                                OutputInit output = OutputInit::kUniform);

  bool operator==(const ModelParams&) const = default;
};

struct OptimizerConfig {
  double learning_rate = 0.05;
  double momentum = 0.5;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
  std::vector<double> velocity;

  static OptimizerState zeros_like(const ModelParams& params) {
    return {std::vector<double>(params.values.size(), 0.0)};
  }
};

// One training sample as seen by the loss: borrowed features, a target class
// and a non-negative weight.
struct Example {
  std::span<const double> x;
  ClassId label = 0;
  double weight = 1.0;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

std::vector<double> logits(const ModelParams& params,
                           std::span<const double> x);

// softmax(logits / temperature).
std::vector<double> forward(const ModelParams& params,
                            std::span<const double> x,
                            double temperature = 1.0);

// Argmax of the logits, ties to the smallest class id.
ClassId predict(const ModelParams& params, std::span<const double> x);

// Mean over the batch of weight * cross-entropy. Throws NumericError on
// non-finite values.
LossAndGrad loss_and_grad(const ModelParams& params,
                          std::span<const Example> batch,
                          double temperature = 1.0);

// Same as loss_and_grad but accumulates scale * gradient into `grad` and
// returns scale * loss. `grad` must already have the parameter shape.
double accumulate_loss_and_grad(const ModelParams& params,
                                std::span<const Example> batch,
                                double temperature, double scale,
                                std::span<double> grad);

// velocity = momentum * velocity + grad + weight_decay * params
// params  -= learning_rate * velocity
void sgd_step(ModelParams& params, OptimizerState& state,
              std::span<const double> grad, const OptimizerConfig& config);

double evaluate_accuracy(const ModelParams& params, const Dataset& dataset);

bool all_finite(std::span<const double> values);

// Checkpoint blob: 16-byte header (u32 magic "FNLM", u8 version,
// u8 activation, u16 classes, u32 input dim, u32 hidden) followed by the
// parameters as little-endian IEEE-754 doubles.
std::vector<std::uint8_t> serialize(const ModelParams& params);
ModelParams deserialize(std::span<const std::uint8_t> blob);
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace fednoil
