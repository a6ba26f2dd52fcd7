#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fednoil {

using ClassId = int;
using ClientId = int;

// Dense row-major matrix of doubles. One row per sample.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * cols_, cols_};
  }

  const std::vector<double>& values() const { return values_; }

  // Appends one row. The first appended row fixes the column count of an
  // empty matrix.
  void append_row(std::span<const double> values);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct Dataset {
  Matrix features;
  std::vector<ClassId> true_labels;
  int num_classes = 0;

  std::size_t size() const { return true_labels.size(); }
  std::size_t dim() const { return features.cols(); }

  // Throws ShapeError / ConfigError when the invariants do not hold.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

// One client's local dataset. given_labels may differ from true_labels after
// noise injection; the simulator keeps the truth for diagnostics only.
struct ClientShard {
  ClientId client_id = 0;
  int num_classes = 0;
  Matrix features;
  std::vector<ClassId> true_labels;
  std::vector<ClassId> given_labels;
  // Indices into the source dataset, for disjointness checks.
  std::vector<std::size_t> source_indices;
  double nominal_noise_ratio = 0.0;

  std::size_t size() const { return true_labels.size(); }
  bool is_clean(std::size_t i) const {
    return given_labels[i] == true_labels[i];
  }
  std::size_t clean_count() const;
  double realized_noise_ratio() const;

  bool operator==(const ClientShard&) const = default;
};

enum class PartitionMode { kIid, kDirichletLabel, kDirichletSize };

struct PartitionSpec {
  PartitionMode mode = PartitionMode::kIid;
  double beta = 0.5;
  int num_clients = 20;
  // Unset means every sample of the dataset is distributed.
  std::optional<std::size_t> samples_per_client;

  void validate() const;
  bool operator==(const PartitionSpec&) const = default;
};

enum class NoiseFlavor { kSymmetric, kPair };
enum class NoiseMode { kHigh, kLow, kCustom };

struct NoiseSpec {
  NoiseFlavor flavor = NoiseFlavor::kSymmetric;
  NoiseMode mode = NoiseMode::kHigh;
  // Client k belongs to group k mod group_ratios.size().
  std::vector<double> group_ratios;
  // When non-empty, one ratio per client; overrides the groups.
  std::vector<double> custom_ratios;

  // The four group ratios used for each flavor and noise mode.
  static std::vector<double> default_group_ratios(NoiseFlavor flavor,
                                                  NoiseMode mode);

  double ratio_for(ClientId client) const;
  void validate(int num_clients) const;
  bool operator==(const NoiseSpec&) const = default;
};

struct SyntheticSpec {
  int num_classes = 4;
  std::size_t dim = 2;
  std::size_t samples_per_class = 100;
  double cluster_spread = 0.3;

  bool operator==(const SyntheticSpec&) const = default;
};

// Gaussian blobs around class means spaced evenly on the unit circle in the
// first two coordinates. The remaining coordinates carry only noise.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Class mean used by generate_synthetic.
std::vector<double> synthetic_class_mean(int num_classes, std::size_t dim,
                                         ClassId label);

// IDX image/label containers (see idx.cpp for the layout).
Dataset parse_idx(std::span<const std::uint8_t> images,
                  std::span<const std::uint8_t> labels);
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

std::vector<ClientShard> partition(const Dataset& dataset,
                                   const PartitionSpec& spec,
                                   std::uint64_t seed);

// Flips exactly round(ratio * n) labels chosen uniformly without replacement.
ClientShard inject_noise(ClientShard shard, NoiseFlavor flavor, double ratio,
                         std::uint64_t seed);

// Applies inject_noise to every shard with its group ratio. Each shard draws
// from its own seed derived from (seed, client id).
std::vector<ClientShard> apply_noise(std::vector<ClientShard> shards,
                                     const NoiseSpec& spec, std::uint64_t seed);

// Round half up, used for every count derived from a fraction.
std::size_t round_half_up(double value);

std::string_view to_string(PartitionMode mode);
std::string_view to_string(NoiseFlavor flavor);
std::string_view to_string(NoiseMode mode);

}  // namespace fednoil
