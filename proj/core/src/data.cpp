#include "fednoil/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "fednoil/errors.hpp"
#include "fednoil/rng.hpp"

namespace fednoil {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw ShapeError("row of width " + std::to_string(values.size()) +
                     " appended to matrix with " + std::to_string(cols_) +
                     " columns");
  }
  values_.insert(values_.end(), values.begin(), values.end());
  ++rows_;
}

void Dataset::validate() const {
  if (num_classes < 2) {
    throw ConfigError("dataset needs at least 2 classes, got " +
                      std::to_string(num_classes));
  }
  if (features.rows() != true_labels.size()) {
    throw ShapeError("dataset has " + std::to_string(features.rows()) +
                     " feature rows but " + std::to_string(true_labels.size()) +
                     " labels");
  }
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    if (true_labels[i] < 0 || true_labels[i] >= num_classes) {
      throw ShapeError("label " + std::to_string(true_labels[i]) +
                       " at sample " + std::to_string(i) + " is outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

std::size_t ClientShard::clean_count() const {
  std::size_t clean = 0;
  for (std::size_t i = 0; i < size(); ++i) clean += is_clean(i) ? 1 : 0;
  return clean;
}

double ClientShard::realized_noise_ratio() const {
  if (size() == 0) return 0.0;
  return static_cast<double>(size() - clean_count()) /
         static_cast<double>(size());
}

void PartitionSpec::validate() const {
  if (num_clients < 1) {
    throw ConfigError("partition needs at least one client, got " +
                      std::to_string(num_clients));
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("Dirichlet concentration beta must be positive");
  }
  if (samples_per_client && *samples_per_client == 0) {
    throw ConfigError("samples_per_client must be positive");
  }
}

std::vector<double> NoiseSpec::default_group_ratios(NoiseFlavor flavor,
                                                    NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kHigh:
      if (flavor == NoiseFlavor::kSymmetric) return {0.5, 0.6, 0.7, 0.8};
      return {0.3, 0.5, 0.6, 0.8};
    case NoiseMode::kLow:
      return {0.3, 0.4, 0.5, 0.6};
    case NoiseMode::kCustom:
      return {};
  }
  return {};
}

double NoiseSpec::ratio_for(ClientId client) const {
  if (!custom_ratios.empty()) {
    return custom_ratios.at(static_cast<std::size_t>(client));
  }
  const std::vector<double> groups =
      group_ratios.empty() ? default_group_ratios(flavor, mode) : group_ratios;
  if (groups.empty()) return 0.0;
  return groups[static_cast<std::size_t>(client) % groups.size()];
}

void NoiseSpec::validate(int num_clients) const {
  auto check = [](const std::vector<double>& ratios, const char* what) {
    for (double r : ratios) {
      if (!(r >= 0.0 && r <= 1.0)) {
        throw ConfigError(std::string(what) + " must lie in [0, 1], got " +
                          std::to_string(r));
      }
    }
  };
  check(group_ratios, "noise group ratio");
  check(custom_ratios, "per-client noise ratio");
  if (!custom_ratios.empty() &&
      custom_ratios.size() != static_cast<std::size_t>(num_clients)) {
    throw ConfigError("per-client noise ratios list has " +
                      std::to_string(custom_ratios.size()) +
                      " entries for " + std::to_string(num_clients) +
                      " clients");
  }
  if (mode == NoiseMode::kCustom && group_ratios.empty() &&
      custom_ratios.empty()) {
    throw ConfigError("custom noise mode needs group or per-client ratios");
  }
}

std::size_t round_half_up(double value) {
  return static_cast<std::size_t>(std::floor(value + 0.5));
}

std::vector<double> synthetic_class_mean(int num_classes, std::size_t dim,
                                         ClassId label) {
  std::vector<double> mean(dim, 0.0);
  const double angle =
      2.0 * std::numbers::pi * label / static_cast<double>(num_classes);
  mean[0] = std::cos(angle);
  mean[1] = std::sin(angle);
  return mean;
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.num_classes < 2) {
    throw ConfigError("synthetic data needs num_classes >= 2");
  }
  if (spec.dim < 2) throw ConfigError("synthetic data needs dim >= 2");
  if (!(spec.cluster_spread >= 0.0) || !std::isfinite(spec.cluster_spread)) {
    throw ConfigError("cluster_spread must be a finite non-negative number");
  }
  if (spec.samples_per_class == 0) {
    throw ConfigError("samples_per_class must be positive");
  }

  Rng rng(seed);
  Dataset out;
  out.num_classes = spec.num_classes;
  out.features = Matrix(0, spec.dim);
  std::vector<double> point(spec.dim);
  for (ClassId c = 0; c < spec.num_classes; ++c) {
    const std::vector<double> mean =
        synthetic_class_mean(spec.num_classes, spec.dim, c);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        point[j] = mean[j] + spec.cluster_spread * standard_normal(rng);
      }
      out.features.append_row(point);
      out.true_labels.push_back(c);
    }
  }
  return out;
}

namespace {

// Splits `total` into integer counts proportional to `weights` (largest
// remainder; ties go to the lower index).
std::vector<std::size_t> apportion(std::span<const double> weights,
                                   std::size_t total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  std::vector<double> remainders(weights.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact =
        sum > 0.0 ? weights[i] / sum * static_cast<double>(total)
                  : static_cast<double>(total) / weights.size();
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  // Floating error can push the floor sum one past the total.
  while (assigned > total) {
    const auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

std::vector<double> sample_dirichlet(std::size_t k, double beta, Rng& rng) {
  std::gamma_distribution<double> gamma(beta, 1.0);
  std::vector<double> q(k);
  double sum = 0.0;
  for (double& v : q) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(k));
    return q;
  }
  for (double& v : q) v /= sum;
  return q;
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

std::vector<std::vector<std::size_t>> class_buckets(const Dataset& dataset,
                                                    Rng& rng) {
  std::vector<std::vector<std::size_t>> buckets(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    buckets[dataset.true_labels[i]].push_back(i);
  }
  for (auto& bucket : buckets) shuffle_indices(bucket, rng);
  return buckets;
}

// Per-client class quota that keeps the dataset's class proportions.
std::vector<std::size_t> class_quota(
    const std::vector<std::vector<std::size_t>>& buckets,
    std::size_t per_client) {
  std::vector<double> weights;
  for (const auto& bucket : buckets) weights.push_back(bucket.size());
  return apportion(weights, per_client);
}

ClientShard make_shard(const Dataset& dataset, ClientId id,
                       std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  ClientShard shard;
  shard.client_id = id;
  shard.num_classes = dataset.num_classes;
  shard.features = Matrix(0, dataset.dim());
  for (std::size_t i : indices) {
    shard.features.append_row(dataset.features.row(i));
    shard.true_labels.push_back(dataset.true_labels[i]);
  }
  shard.given_labels = shard.true_labels;
  shard.source_indices = std::move(indices);
  return shard;
}

[[noreturn]] void insufficient(const std::string& what) {
  throw AllocationError("insufficient samples: " + what);
}

}  // namespace

std::vector<ClientShard> partition(const Dataset& dataset,
                                   const PartitionSpec& spec,
                                   std::uint64_t seed) {
  spec.validate();
  dataset.validate();
  const std::size_t k = static_cast<std::size_t>(spec.num_clients);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> assigned(k);

  switch (spec.mode) {
    case PartitionMode::kIid: {
      auto buckets = class_buckets(dataset, rng);
      if (spec.samples_per_client) {
        const auto quota = class_quota(buckets, *spec.samples_per_client);
        for (std::size_t c = 0; c < buckets.size(); ++c) {
          if (quota[c] * k > buckets[c].size()) {
            insufficient("class " + std::to_string(c) + " has " +
                         std::to_string(buckets[c].size()) + " samples, " +
                         std::to_string(quota[c] * k) + " requested");
          }
          for (std::size_t client = 0; client < k; ++client) {
            auto first = buckets[c].begin() + client * quota[c];
            assigned[client].insert(assigned[client].end(), first,
                                    first + quota[c]);
          }
        }
      } else {
        for (const auto& bucket : buckets) {
          const std::size_t base = bucket.size() / k;
          const std::size_t leftover = bucket.size() % k;
          std::size_t pos = 0;
          for (std::size_t client = 0; client < k; ++client) {
            const std::size_t take = base + (client < leftover ? 1 : 0);
            assigned[client].insert(assigned[client].end(),
                                    bucket.begin() + pos,
                                    bucket.begin() + pos + take);
            pos += take;
          }
        }
      }
      break;
    }
    case PartitionMode::kDirichletLabel: {
      auto buckets = class_buckets(dataset, rng);
      if (spec.samples_per_client) {
        const auto quota = class_quota(buckets, *spec.samples_per_client);
        for (std::size_t c = 0; c < buckets.size(); ++c) {
          if (quota[c] * k > buckets[c].size()) {
            insufficient("class " + std::to_string(c) + " has " +
                         std::to_string(buckets[c].size()) + " samples, " +
                         std::to_string(quota[c] * k) + " requested");
          }
          buckets[c].resize(quota[c] * k);
        }
      }
      for (const auto& bucket : buckets) {
        const std::vector<double> q = sample_dirichlet(k, spec.beta, rng);
        const auto counts = apportion(q, bucket.size());
        std::size_t pos = 0;
        for (std::size_t client = 0; client < k; ++client) {
          assigned[client].insert(assigned[client].end(), bucket.begin() + pos,
                                  bucket.begin() + pos + counts[client]);
          pos += counts[client];
        }
      }
      break;
    }
    case PartitionMode::kDirichletSize: {
      std::vector<std::size_t> pool(dataset.size());
      std::iota(pool.begin(), pool.end(), 0);
      shuffle_indices(pool, rng);
      const std::size_t total =
          spec.samples_per_client ? *spec.samples_per_client * k : pool.size();
      if (total > pool.size()) {
        insufficient(std::to_string(total) + " samples requested from a " +
                     std::to_string(pool.size()) + "-sample dataset");
      }
      const std::vector<double> q = sample_dirichlet(k, spec.beta, rng);
      const auto counts = apportion(q, total);
      std::size_t pos = 0;
      for (std::size_t client = 0; client < k; ++client) {
        assigned[client].assign(pool.begin() + pos,
                                pool.begin() + pos + counts[client]);
        pos += counts[client];
      }
      break;
    }
  }

  std::vector<ClientShard> shards;
  shards.reserve(k);
  for (std::size_t client = 0; client < k; ++client) {
    if (assigned[client].empty()) {
      insufficient("client " + std::to_string(client) +
                   " received no samples");
    }
    shards.push_back(make_shard(dataset, static_cast<ClientId>(client),
                                std::move(assigned[client])));
  }
  return shards;
}

ClientShard inject_noise(ClientShard shard, NoiseFlavor flavor, double ratio,
                         std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw DomainError("noise ratio must lie in [0, 1], got " +
                      std::to_string(ratio));
  }
  const std::size_t n = shard.size();
  const std::size_t flips = std::min(n, round_half_up(ratio * n));
  shard.given_labels = shard.true_labels;
  shard.nominal_noise_ratio = ratio;

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `flips` slots are a uniform subset.
  for (std::size_t i = 0; i < flips; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, n - i)]);
  }
  const int classes = shard.num_classes;
  for (std::size_t i = 0; i < flips; ++i) {
    const std::size_t idx = order[i];
    const ClassId truth = shard.true_labels[idx];
    if (flavor == NoiseFlavor::kPair) {
      shard.given_labels[idx] = (truth + 1) % classes;
    } else {
      const auto other =
          static_cast<ClassId>(uniform_index(rng, classes - 1));
      shard.given_labels[idx] = other >= truth ? other + 1 : other;
    }
  }
  return shard;
}

std::vector<ClientShard> apply_noise(std::vector<ClientShard> shards,
                                     const NoiseSpec& spec,
                                     std::uint64_t seed) {
  spec.validate(static_cast<int>(shards.size()));
  for (auto& shard : shards) {
    const auto id = static_cast<std::uint64_t>(shard.client_id);
    const double ratio = spec.ratio_for(shard.client_id);
    shard = inject_noise(std::move(shard), spec.flavor, ratio,
                         derive_seed(seed, {id}));
  }
  return shards;
}

std::string_view to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::kIid:
      return "iid";
    case PartitionMode::kDirichletLabel:
      return "dirichlet_label";
    case PartitionMode::kDirichletSize:
      return "dirichlet_size";
  }
  return "?";
}

std::string_view to_string(NoiseFlavor flavor) {
  return flavor == NoiseFlavor::kSymmetric ? "symmetric" : "pair";
}

std::string_view to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::kHigh:
      return "high";
    case NoiseMode::kLow:
      return "low";
    case NoiseMode::kCustom:
      return "custom";
  }
  return "?";
}

}  // namespace fednoil
