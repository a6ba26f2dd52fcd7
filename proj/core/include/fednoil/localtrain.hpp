#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fednoil/data.hpp"
#include "fednoil/model.hpp"
#include "fednoil/rng.hpp"
#include "fednoil/sampling.hpp"

namespace fednoil {

// Pseudo-labeling and augmentation settings for the unlabeled part of a
// client's data. Augmentations are vector perturbations: weak views add
// Gaussian jitter, strong views add more jitter and zero out a random subset
// of coordinates.
struct SslConfig {
  double threshold = 0.95;
  double lambda_u = 1.0;
  double weak_noise_std = 0.05;
  double strong_noise_std = 0.2;
  double strong_mask_fraction = 0.2;
  // Weak views averaged before the pseudo-label argmax.
  int weak_views = 1;

  void validate() const;
  bool operator==(const SslConfig&) const = default;
};

std::vector<double> weak_augment(std::span<const double> x, double std,
                                 Rng& rng);
std::vector<double> strong_augment(std::span<const double> x, double std,
                                   double mask_fraction, Rng& rng);

struct PseudoLabel {
  ClassId label = 0;
  double confidence = 0.0;
  bool accepted = false;
};

// Argmax of the global model's mean prediction (temperature 1) over the weak
// views; accepted iff its probability reaches the threshold.
PseudoLabel pseudo_label_from_views(const ModelParams& global_params,
                                    std::span<const std::vector<double>> views,
                                    double threshold);

PseudoLabel pseudo_label(const ModelParams& global_params,
                         std::span<const double> x, const SslConfig& cfg,
                         Rng& rng);

struct LabeledView {
  std::vector<double> x;  // weakly augmented
  ClassId label = 0;      // given (possibly noisy) label
};

struct UnlabeledView {
  std::vector<std::vector<double>> weak;  // views for the pseudo-label
  std::vector<double> strong;             // view the local model trains on
};

struct CombinedLoss {
  double total = 0.0;
  double labeled = 0.0;
  double unlabeled = 0.0;
  std::size_t accepted = 0;
  std::vector<double> grad;
};

// L_x + lambda_u * L_u.
//   L_x: mean CE of the local model on the labeled views.
//   L_u: mean over the unlabeled batch of gate * CE(pseudo label, local model
//        on the strong view); gate and pseudo label come from the global
//        model and are constants for differentiation.
// The gradient is taken with respect to the local parameters only.
CombinedLoss combined_loss_and_grad(const ModelParams& local_params,
                                    const ModelParams& global_params,
                                    std::span<const LabeledView> labeled,
                                    std::span<const UnlabeledView> unlabeled,
                                    const SslConfig& cfg);

struct LocalTrainOptions {
  SamplingConfig sampling;
  SslConfig ssl;
  OptimizerConfig optimizer;
  // Replace the confidence-proportional data distribution by the uniform one.
  bool uniform_data = false;
  // When false, the unlabeled remainder is dropped entirely.
  bool use_ssl = true;
};

struct LocalUpdateReport {
  ClientId client_id = 0;
  std::size_t epochs_run = 0;
  // Labeled plus unlabeled mini-batches processed.
  std::size_t batches_run = 0;
  std::vector<std::vector<std::size_t>> labeled_indices;  // one set per epoch
  std::size_t pseudo_labels_seen = 0;
  std::size_t pseudo_labels_accepted = 0;
  ModelParams params;

  std::optional<double> pseudo_label_acceptance_rate() const;
};

// One client's update for one round. The local model starts from the global
// parameters with a fresh momentum buffer. Each epoch resamples the labeled
// subset from the fixed confidence distribution and takes one SGD step per
// pair of labeled and unlabeled mini-batches. The shorter of the two sets
// wraps around, so every mini-batch of both is visited once per epoch.
// Throws NumericError if training diverges.
LocalUpdateReport local_update(const ModelParams& global_params,
                               const ClientShard& shard, int epochs,
                               const LocalTrainOptions& options, Rng& rng);

}  // namespace fednoil
