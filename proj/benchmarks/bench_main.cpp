#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "fednoil/localtrain.hpp"
#include "fednoil/model.hpp"
#include "fednoil/sampling.hpp"
#include "fednoil/server.hpp"

namespace fednoil {
namespace {

struct Batch {
  Dataset data;
  std::vector<Example> examples;

  Batch(std::size_t dim, std::size_t n) {
    data = generate_synthetic({4, dim, n / 4, 0.3}, 5);
    for (std::size_t i = 0; i < data.size(); ++i) {
      examples.push_back({data.features.row(i), data.true_labels[i], 1.0});
    }
  }
};

void BM_LossAndGrad(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const Batch batch(16, 64);
  const ModelParams params =
      ModelParams::initialize({16, hidden, 4, Activation::kTanh}, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grad(params, batch.examples));
  }
  state.SetItemsProcessed(state.iterations() * batch.examples.size());
}
BENCHMARK(BM_LossAndGrad)->Arg(0)->Arg(16)->Arg(64);

void BM_WeightedSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> weights(n);
  std::iota(weights.begin(), weights.end(), 1.0);
  Rng rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        weighted_sample_without_replacement(weights, n * 35 / 100, rng));
  }
}
BENCHMARK(BM_WeightedSample)->Arg(100)->Arg(1000)->Arg(5000);

void BM_LocalUpdate(benchmark::State& state) {
  const Dataset d = generate_synthetic({4, 6, 75, 0.3}, 2);
  auto shards = partition(d, {PartitionMode::kIid, 0.5, 1, {}}, 2);
  NoiseSpec noise;
  noise.group_ratios = {0.6};
  shards = apply_noise(std::move(shards), noise, 4);
  const ModelParams global =
      ModelParams::initialize({6, 16, 4, Activation::kTanh}, 1);
  LocalTrainOptions options;
  options.use_ssl = state.range(0) != 0;
  for (auto _ : state) {
    Rng rng(9);
    benchmark::DoNotOptimize(local_update(global, shards[0], 1, options, rng));
  }
}
BENCHMARK(BM_LocalUpdate)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Aggregate(benchmark::State& state) {
  const auto clients = static_cast<std::size_t>(state.range(0));
  std::vector<ModelParams> models;
  for (std::size_t k = 0; k < clients; ++k) {
    models.push_back(
        ModelParams::initialize({32, 64, 10, Activation::kRelu}, k));
  }
  std::vector<WeightedModel> weighted;
  for (std::size_t k = 0; k < clients; ++k) {
    weighted.push_back({&models[k], 100.0 + static_cast<double>(k)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(weighted));
}
BENCHMARK(BM_Aggregate)->Arg(6)->Arg(20);

}  // namespace
}  // namespace fednoil

BENCHMARK_MAIN();
