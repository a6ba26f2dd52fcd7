#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fednoil/data.hpp"
#include "fednoil/model.hpp"
#include "fednoil/rng.hpp"

namespace fednoil {

// How clients (per round) and labeled samples (per epoch) are drawn.
enum class Selection { kConfidence, kUniform };

struct SamplingConfig {
  double temperature = 0.5;
  double clean_fraction = 0.35;
  double client_fraction = 0.3;
  Selection clients = Selection::kConfidence;
  Selection data = Selection::kConfidence;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

// The single scalar a client uploads for client selection: the sum of its
// samples' confidences on their given labels.
struct ClientScore {
  ClientId client_id = 0;
  double score = 0.0;
  std::size_t sample_count = 0;
};

// Global-model confidence on each sample's given label, with a
// temperature-sharpened softmax.
std::vector<double> confidence_scores(const ModelParams& global_params,
                                      const ClientShard& shard,
                                      double temperature);

ClientScore score_client(const ModelParams& global_params,
                         const ClientShard& shard, double temperature);

// Normalizes non-negative weights to a distribution. All-zero input yields
// the uniform distribution.
std::vector<double> normalize_weights(std::span<const double> weights);

// p_k = s_k / sum_j s_j
std::vector<double> client_probabilities(std::span<const ClientScore> scores);

// p_i = score_i / sum_j score_j over one shard.
std::vector<double> local_data_probabilities(std::span<const double> scores);

// Successive sampling: draw one index proportionally to the remaining
// weights, remove it, renormalize, repeat. Once the positive mass is used up
// the remaining picks are uniform over the indices not yet drawn. Returns
// indices in draw order.
std::vector<std::size_t> weighted_sample_without_replacement(
    std::span<const double> weights, std::size_t count, Rng& rng);

// ceil(fraction * total), at least one.
std::size_t clients_per_round(double client_fraction, std::size_t total);

std::vector<ClientId> sample_clients(std::span<const double> probabilities,
                                     std::size_t count, Rng& rng);

struct LabeledSplit {
  // Labeled (trusted) indices in draw order.
  std::vector<std::size_t> labeled;
  // Complement, ascending.
  std::vector<std::size_t> unlabeled;
};

// |labeled| = round_half_up(clean_fraction * n), drawn by `probabilities`.
LabeledSplit sample_labeled_subset(std::span<const double> probabilities,
                                   double clean_fraction, Rng& rng);

}  // namespace fednoil
