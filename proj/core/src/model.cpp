#include "fednoil/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "fednoil/errors.hpp"
#include "fednoil/rng.hpp"

namespace fednoil {
namespace {

// Offsets into the flat parameter vector.
struct Layout {
  std::size_t d, h, c;
  std::size_t w1, b1, w2, b2;

  explicit Layout(const Architecture& a)
      : d(a.input_dim), h(a.hidden), c(static_cast<std::size_t>(a.num_classes)) {
    if (h == 0) {
      w1 = b1 = 0;
      w2 = 0;
      b2 = c * d;
    } else {
      w1 = 0;
      b1 = h * d;
      w2 = b1 + h;
      b2 = w2 + c * h;
    }
  }
};

double activate(Activation act, double z) {
  return act == Activation::kTanh ? std::tanh(z) : std::max(0.0, z);
}

// Derivative expressed through the activation value a = act(z).
double activate_grad(Activation act, double z, double a) {
  return act == Activation::kTanh ? 1.0 - a * a : (z > 0.0 ? 1.0 : 0.0);
}

void check_input(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.arch.input_dim) {
    throw ShapeError("input of dimension " + std::to_string(x.size()) +
                     " given to a model expecting " +
                     std::to_string(params.arch.input_dim));
  }
  if (params.values.size() != params.arch.parameter_count()) {
    throw ShapeError("parameter vector has " +
                     std::to_string(params.values.size()) +
                     " entries, architecture needs " +
                     std::to_string(params.arch.parameter_count()));
  }
}

// Computes hidden pre-activations/activations (when present) and logits.
void compute(const ModelParams& params, std::span<const double> x,
             std::vector<double>& pre, std::vector<double>& hidden,
             std::vector<double>& out) {
  const Layout l(params.arch);
  const double* p = params.values.data();
  std::span<const double> input = x;
  std::size_t in_dim = l.d;
  if (l.h > 0) {
    pre.assign(l.h, 0.0);
    hidden.assign(l.h, 0.0);
    for (std::size_t j = 0; j < l.h; ++j) {
      const double* w = p + l.w1 + j * l.d;
      double z = p[l.b1 + j];
      for (std::size_t i = 0; i < l.d; ++i) z += w[i] * x[i];
      pre[j] = z;
      hidden[j] = activate(params.arch.activation, z);
    }
    input = hidden;
    in_dim = l.h;
  }
  out.assign(l.c, 0.0);
  for (std::size_t k = 0; k < l.c; ++k) {
    const double* w = p + l.w2 + k * in_dim;
    double z = p[l.b2 + k];
    for (std::size_t i = 0; i < in_dim; ++i) z += w[i] * input[i];
    out[k] = z;
  }
}

// In-place softmax(v / temperature); returns log-sum-exp of the scaled values.
double softmax_inplace(std::vector<double>& v, double temperature) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double& z : v) {
    z /= temperature;
    max_v = std::max(max_v, z);
  }
  double sum = 0.0;
  for (double& z : v) {
    z = std::exp(z - max_v);
    sum += z;
  }
  for (double& z : v) z /= sum;
  return max_v + std::log(sum);
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0)) {
    throw DomainError("softmax temperature must be positive");
  }
}

}  // namespace

std::size_t Architecture::parameter_count() const {
  const auto c = static_cast<std::size_t>(num_classes);
  if (hidden == 0) return c * input_dim + c;
  return hidden * input_dim + hidden + c * hidden + c;
}

void Architecture::validate() const {
  if (input_dim == 0) throw ConfigError("model input dimension must be positive");
  if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
}

ModelParams ModelParams::zeros(const Architecture& arch) {
  arch.validate();
  return {arch, std::vector<double>(arch.parameter_count(), 0.0)};
}

ModelParams ModelParams::initialize(const Architecture& arch,
                                    std::uint64_t seed, OutputInit output) {
  ModelParams params = zeros(arch);
  const Layout l(arch);
  Rng rng(seed);
  auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = begin; i < end; ++i) {
      params.values[i] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  };
  const bool random_output = output == OutputInit::kUniform;
  if (l.h == 0) {
    if (random_output) fill(0, l.b2 + l.c, l.d);
  } else {
    fill(l.w1, l.w2, l.d);
    if (random_output) fill(l.w2, l.b2 + l.c, l.h);
  }
  return params;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0)) {
    throw ConfigError("learning rate must be non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("weight decay must be non-negative");
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

std::vector<double> logits(const ModelParams& params,
                           std::span<const double> x) {
  check_input(params, x);
  std::vector<double> pre, hidden, out;
  compute(params, x, pre, hidden, out);
  return out;
}

std::vector<double> forward(const ModelParams& params,
                            std::span<const double> x, double temperature) {
  check_temperature(temperature);
  std::vector<double> out = logits(params, x);
  softmax_inplace(out, temperature);
  return out;
}

ClassId predict(const ModelParams& params, std::span<const double> x) {
  const std::vector<double> z = logits(params, x);
  return static_cast<ClassId>(std::max_element(z.begin(), z.end()) -
                              z.begin());
}

double accumulate_loss_and_grad(const ModelParams& params,
                                std::span<const Example> batch,
                                double temperature, double scale,
                                std::span<double> grad) {
  check_temperature(temperature);
  if (grad.size() != params.values.size()) {
    throw ShapeError("gradient buffer does not match the parameter shape");
  }
  if (batch.empty()) return 0.0;
  const Layout l(params.arch);
  const double* p = params.values.data();
  const double per_sample = scale / static_cast<double>(batch.size());

  std::vector<double> pre, hidden, out, delta_hidden;
  double total = 0.0;
  for (const Example& ex : batch) {
    check_input(params, ex.x);
    if (ex.label < 0 || ex.label >= params.arch.num_classes) {
      throw ShapeError("label " + std::to_string(ex.label) +
                       " outside the model's class range");
    }
    if (!(ex.weight >= 0.0)) {
      throw DomainError("sample weights must be non-negative");
    }
    if (ex.weight == 0.0) continue;

    compute(params, ex.x, pre, hidden, out);
    const double scaled_label_logit = out[ex.label] / temperature;
    const double lse = softmax_inplace(out, temperature);
    const double loss = lse - scaled_label_logit;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite cross-entropy during loss evaluation");
    }
    total += ex.weight * loss;

    // d(loss)/d(logit_k) = (p_k - [k == y]) / temperature
    const double coeff = per_sample * ex.weight / temperature;
    for (std::size_t k = 0; k < l.c; ++k) {
      out[k] = coeff * (out[k] - (static_cast<int>(k) == ex.label ? 1.0 : 0.0));
    }
    std::span<const double> input = ex.x;
    std::size_t in_dim = l.d;
    if (l.h > 0) {
      input = hidden;
      in_dim = l.h;
    }
    for (std::size_t k = 0; k < l.c; ++k) {
      double* g = grad.data() + l.w2 + k * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) g[i] += out[k] * input[i];
      grad[l.b2 + k] += out[k];
    }
    if (l.h == 0) continue;

    delta_hidden.assign(l.h, 0.0);
    for (std::size_t k = 0; k < l.c; ++k) {
      const double* w = p + l.w2 + k * l.h;
      for (std::size_t j = 0; j < l.h; ++j) delta_hidden[j] += w[j] * out[k];
    }
    for (std::size_t j = 0; j < l.h; ++j) {
      const double dz =
          delta_hidden[j] * activate_grad(params.arch.activation, pre[j], hidden[j]);
      if (dz == 0.0) continue;
      double* g = grad.data() + l.w1 + j * l.d;
      for (std::size_t i = 0; i < l.d; ++i) g[i] += dz * ex.x[i];
      grad[l.b1 + j] += dz;
    }
  }
  return per_sample * total;
}

LossAndGrad loss_and_grad(const ModelParams& params,
                          std::span<const Example> batch, double temperature) {
  LossAndGrad result;
  result.grad.assign(params.values.size(), 0.0);
  result.loss =
      accumulate_loss_and_grad(params, batch, temperature, 1.0, result.grad);
  if (!all_finite(result.grad)) {
    throw NumericError("non-finite gradient");
  }
  return result;
}

void sgd_step(ModelParams& params, OptimizerState& state,
              std::span<const double> grad, const OptimizerConfig& config) {
  const std::size_t n = params.values.size();
  if (grad.size() != n || state.velocity.size() != n) {
    throw ShapeError("sgd_step: parameter, gradient and velocity shapes differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    double& v = state.velocity[i];
    v = config.momentum * v + grad[i] + config.weight_decay * params.values[i];
    params.values[i] -= config.learning_rate * v;
  }
}

double evaluate_accuracy(const ModelParams& params, const Dataset& dataset) {
  if (dataset.size() == 0) throw DomainError("cannot evaluate on an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (predict(params, dataset.features.row(i)) == dataset.true_labels[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

constexpr std::uint32_t kBlobMagic = 0x4D4C4E46;  // "FNLM" little-endian
constexpr std::uint8_t kBlobVersion = 1;
constexpr std::size_t kHeaderSize = 16;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset,
                     int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[offset + i]} << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const ModelParams& params) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 8 * params.values.size());
  put_le(out, kBlobMagic, 4);
  put_le(out, kBlobVersion, 1);
  put_le(out, static_cast<std::uint8_t>(params.arch.activation), 1);
  put_le(out, static_cast<std::uint64_t>(params.arch.num_classes), 2);
  put_le(out, params.arch.input_dim, 4);
  put_le(out, params.arch.hidden, 4);
  for (double v : params.values) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

ModelParams deserialize(std::span<const std::uint8_t> blob) {
  if (blob.size() < kHeaderSize) {
    throw ParseError("model blob truncated at offset " +
                     std::to_string(blob.size()) + " (header is 16 bytes)");
  }
  if (get_le(blob, 0, 4) != kBlobMagic) {
    throw ParseError("model blob: bad magic at offset 0");
  }
  if (blob[4] != kBlobVersion) {
    throw ParseError("model blob: unsupported version " +
                     std::to_string(blob[4]) + " at offset 4");
  }
  if (blob[5] > 1) {
    throw ParseError("model blob: unknown activation at offset 5");
  }
  Architecture arch;
  arch.activation = static_cast<Activation>(blob[5]);
  arch.num_classes = static_cast<int>(get_le(blob, 6, 2));
  arch.input_dim = get_le(blob, 8, 4);
  arch.hidden = get_le(blob, 12, 4);
  const std::size_t count = arch.parameter_count();
  if (blob.size() != kHeaderSize + 8 * count) {
    throw ParseError("model blob: expected " +
                     std::to_string(kHeaderSize + 8 * count) +
                     " bytes, found " + std::to_string(blob.size()));
  }
  ModelParams params{arch, std::vector<double>(count)};
  for (std::size_t i = 0; i < count; ++i) {
    params.values[i] =
        std::bit_cast<double>(get_le(blob, kHeaderSize + 8 * i, 8));
  }
  return params;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  const auto blob = serialize(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> blob{std::istreambuf_iterator<char>(in),
                                       std::istreambuf_iterator<char>()};
  return deserialize(blob);
}

}  // namespace fednoil
