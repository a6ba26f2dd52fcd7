#include "fednoil/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fednoil/errors.hpp"

namespace fednoil {

void SamplingConfig::validate() const {
  if (!(temperature > 0.0)) {
    throw ConfigError("sampling temperature must be positive");
  }
  if (!(clean_fraction > 0.0 && clean_fraction <= 1.0)) {
    throw ConfigError("clean_fraction must lie in (0, 1]");
  }
  if (!(client_fraction > 0.0 && client_fraction <= 1.0)) {
    throw ConfigError("client_fraction must lie in (0, 1]");
  }
}

std::vector<double> confidence_scores(const ModelParams& global_params,
                                      const ClientShard& shard,
                                      double temperature) {
  if (shard.size() == 0) {
    throw DomainError("client " + std::to_string(shard.client_id) +
                      " has no samples to score");
  }
  std::vector<double> scores(shard.size());
  for (std::size_t i = 0; i < shard.size(); ++i) {
    scores[i] = forward(global_params, shard.features.row(i),
                        temperature)[shard.given_labels[i]];
  }
  return scores;
}

ClientScore score_client(const ModelParams& global_params,
                         const ClientShard& shard, double temperature) {
  const auto scores = confidence_scores(global_params, shard, temperature);
  return {shard.client_id, std::accumulate(scores.begin(), scores.end(), 0.0),
          shard.size()};
}

std::vector<double> normalize_weights(std::span<const double> weights) {
  if (weights.empty()) return {};
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("sampling weights must be finite and non-negative");
    }
    sum += w;
  }
  std::vector<double> p(weights.size());
  if (sum <= 0.0) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = weights[i] / sum;
  return p;
}

std::vector<double> client_probabilities(std::span<const ClientScore> scores) {
  std::vector<double> s;
  s.reserve(scores.size());
  for (const ClientScore& c : scores) s.push_back(c.score);
  return normalize_weights(s);
}

std::vector<double> local_data_probabilities(std::span<const double> scores) {
  return normalize_weights(scores);
}

std::vector<std::size_t> weighted_sample_without_replacement(
    std::span<const double> weights, std::size_t count, Rng& rng) {
  const std::size_t n = weights.size();
  if (count > n) {
    throw DomainError("cannot draw " + std::to_string(count) +
                      " items without replacement from " + std::to_string(n));
  }
  std::vector<double> remaining(weights.begin(), weights.end());
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t draw = 0; draw < count; ++draw) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) mass += remaining[i];
    }
    std::size_t pick = n;
    if (mass > 0.0) {
      const double target = uniform01(rng) * mass;
      double acc = 0.0;
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || remaining[i] <= 0.0) continue;
        last_positive = i;
        acc += remaining[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
      // Rounding can leave target just above the accumulated sum.
      if (pick == n) pick = last_positive;
    } else {
      std::uint64_t slot = uniform_index(rng, n - draw);
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (slot-- == 0) {
          pick = i;
          break;
        }
      }
    }
    taken[pick] = true;
    out.push_back(pick);
  }
  return out;
}

std::size_t clients_per_round(double client_fraction, std::size_t total) {
  // Guard against 0.3 * 20 evaluating to 6.000000000000001.
  const double exact = client_fraction * static_cast<double>(total);
  auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(count, 1, total);
}

std::vector<ClientId> sample_clients(std::span<const double> probabilities,
                                     std::size_t count, Rng& rng) {
  const auto picks =
      weighted_sample_without_replacement(probabilities, count, rng);
  return {picks.begin(), picks.end()};
}

LabeledSplit sample_labeled_subset(std::span<const double> probabilities,
                                   double clean_fraction, Rng& rng) {
  const std::size_t n = probabilities.size();
  const std::size_t size =
      std::min(n, round_half_up(clean_fraction * static_cast<double>(n)));
  if (size == 0) {
    throw DomainError("clean subset would be empty: clean_fraction * n < 0.5");
  }
  LabeledSplit split;
  split.labeled = weighted_sample_without_replacement(probabilities, size, rng);
  std::vector<bool> in_labeled(n, false);
  for (std::size_t i : split.labeled) in_labeled[i] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_labeled[i]) split.unlabeled.push_back(i);
  }
  return split;
}

}  // namespace fednoil
