#include "fednoil/localtrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fednoil/errors.hpp"

namespace fednoil {

void SslConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("pseudo-label threshold must lie in (0, 1]");
  }
  if (!(lambda_u >= 0.0)) throw ConfigError("lambda_u must be non-negative");
  if (!(weak_noise_std >= 0.0)) {
    throw ConfigError("weak augmentation std must be non-negative");
  }
  if (!(strong_noise_std >= weak_noise_std)) {
    throw ConfigError("strong augmentation std must be >= the weak one");
  }
  if (!(strong_mask_fraction >= 0.0 && strong_mask_fraction < 1.0)) {
    throw ConfigError("strong mask fraction must lie in [0, 1)");
  }
  if (weak_views < 1) throw ConfigError("weak_views must be at least 1");
}

std::vector<double> weak_augment(std::span<const double> x, double std,
                                 Rng& rng) {
  if (!(std >= 0.0)) throw DomainError("augmentation std must be non-negative");
  std::vector<double> out(x.begin(), x.end());
  if (std == 0.0) return out;
  for (double& v : out) v += std * standard_normal(rng);
  return out;
}

std::vector<double> strong_augment(std::span<const double> x, double std,
                                   double mask_fraction, Rng& rng) {
  std::vector<double> out = weak_augment(x, std, rng);
  const std::size_t d = out.size();
  const std::size_t masked = std::min(
      d, round_half_up(mask_fraction * static_cast<double>(d)));
  if (masked == 0) return out;
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  for (std::size_t i = 0; i < masked; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, d - i)]);
    out[order[i]] = 0.0;
  }
  return out;
}

PseudoLabel pseudo_label_from_views(const ModelParams& global_params,
                                    std::span<const std::vector<double>> views,
                                    double threshold) {
  if (views.empty()) throw DomainError("pseudo-labeling needs at least one view");
  std::vector<double> mean(static_cast<std::size_t>(global_params.arch.num_classes),
                           0.0);
  for (const auto& view : views) {
    const auto q = forward(global_params, view, 1.0);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += q[k];
  }
  for (double& v : mean) v /= static_cast<double>(views.size());
  const auto best = std::max_element(mean.begin(), mean.end());
  PseudoLabel out;
  out.label = static_cast<ClassId>(best - mean.begin());
  out.confidence = *best;
  out.accepted = out.confidence >= threshold;
  return out;
}

PseudoLabel pseudo_label(const ModelParams& global_params,
                         std::span<const double> x, const SslConfig& cfg,
                         Rng& rng) {
  std::vector<std::vector<double>> views;
  for (int v = 0; v < cfg.weak_views; ++v) {
    views.push_back(weak_augment(x, cfg.weak_noise_std, rng));
  }
  return pseudo_label_from_views(global_params, views, cfg.threshold);
}

CombinedLoss combined_loss_and_grad(const ModelParams& local_params,
                                    const ModelParams& global_params,
                                    std::span<const LabeledView> labeled,
                                    std::span<const UnlabeledView> unlabeled,
                                    const SslConfig& cfg) {
  if (labeled.empty()) {
    throw DomainError("combined loss needs a non-empty labeled batch");
  }
  CombinedLoss out;
  out.grad.assign(local_params.values.size(), 0.0);

  std::vector<Example> batch;
  batch.reserve(labeled.size());
  for (const LabeledView& v : labeled) batch.push_back({v.x, v.label, 1.0});
  out.labeled =
      accumulate_loss_and_grad(local_params, batch, 1.0, 1.0, out.grad);

  if (!unlabeled.empty()) {
    batch.clear();
    for (const UnlabeledView& v : unlabeled) {
      const PseudoLabel pl =
          pseudo_label_from_views(global_params, v.weak, cfg.threshold);
      out.accepted += pl.accepted ? 1 : 0;
      batch.push_back({v.strong, pl.label, pl.accepted ? 1.0 : 0.0});
    }
    std::vector<double> grad_u(out.grad.size(), 0.0);
    out.unlabeled =
        accumulate_loss_and_grad(local_params, batch, 1.0, 1.0, grad_u);
    for (std::size_t i = 0; i < grad_u.size(); ++i) {
      out.grad[i] += cfg.lambda_u * grad_u[i];
    }
  }
  out.total = out.labeled + cfg.lambda_u * out.unlabeled;
  if (!std::isfinite(out.total) || !all_finite(out.grad)) {
    throw NumericError("non-finite combined loss");
  }
  return out;
}

std::optional<double> LocalUpdateReport::pseudo_label_acceptance_rate() const {
  if (pseudo_labels_seen == 0) return std::nullopt;
  return static_cast<double>(pseudo_labels_accepted) /
         static_cast<double>(pseudo_labels_seen);
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

std::size_t batches_for(std::size_t n, std::size_t batch) {
  return (n + batch - 1) / batch;
}

}  // namespace

LocalUpdateReport local_update(const ModelParams& global_params,
                               const ClientShard& shard, int epochs,
                               const LocalTrainOptions& options, Rng& rng) {
  if (epochs < 1) throw DomainError("local update needs at least one epoch");
  const SslConfig& ssl = options.ssl;
  const std::size_t batch_size = options.optimizer.batch_size;

  LocalUpdateReport report;
  report.client_id = shard.client_id;
  report.params = global_params;
  OptimizerState state = OptimizerState::zeros_like(report.params);

  // The global model is fixed for the whole round, so the distribution is
  // computed once; only the realized subsets change per epoch.
  std::vector<double> p;
  if (options.uniform_data) {
    p.assign(shard.size(), 1.0 / static_cast<double>(shard.size()));
  } else {
    p = local_data_probabilities(confidence_scores(
        global_params, shard, options.sampling.temperature));
  }

  std::vector<LabeledView> labeled_batch;
  std::vector<UnlabeledView> unlabeled_batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    LabeledSplit split =
        sample_labeled_subset(p, options.sampling.clean_fraction, rng);
    shuffle(split.labeled, rng);
    const bool train_unlabeled = options.use_ssl && !split.unlabeled.empty();
    if (train_unlabeled) shuffle(split.unlabeled, rng);

    const std::size_t labeled_batches =
        batches_for(split.labeled.size(), batch_size);
    const std::size_t unlabeled_batches =
        train_unlabeled ? batches_for(split.unlabeled.size(), batch_size) : 0;
    // Every batch of both sets is visited once per epoch; the shorter set
    // wraps around so each step still sees a labeled and an unlabeled batch.
    const std::size_t steps = std::max(labeled_batches, unlabeled_batches);

    for (std::size_t step = 0; step < steps; ++step) {
      labeled_batch.clear();
      const std::size_t begin = (step % labeled_batches) * batch_size;
      const std::size_t end = std::min(split.labeled.size(), begin + batch_size);
      for (std::size_t j = begin; j < end; ++j) {
        const std::size_t i = split.labeled[j];
        labeled_batch.push_back(
            {weak_augment(shard.features.row(i), ssl.weak_noise_std, rng),
             shard.given_labels[i]});
      }

      unlabeled_batch.clear();
      if (train_unlabeled) {
        const std::size_t ub = step % unlabeled_batches;
        const std::size_t ubegin = ub * batch_size;
        const std::size_t uend =
            std::min(split.unlabeled.size(), ubegin + batch_size);
        for (std::size_t j = ubegin; j < uend; ++j) {
          const auto x = shard.features.row(split.unlabeled[j]);
          UnlabeledView view;
          for (int v = 0; v < ssl.weak_views; ++v) {
            view.weak.push_back(weak_augment(x, ssl.weak_noise_std, rng));
          }
          view.strong = strong_augment(x, ssl.strong_noise_std,
                                       ssl.strong_mask_fraction, rng);
          unlabeled_batch.push_back(std::move(view));
        }
      }

      CombinedLoss loss;
      try {
        loss = combined_loss_and_grad(report.params, global_params,
                                      labeled_batch, unlabeled_batch, ssl);
      } catch (const NumericError& e) {
        throw NumericError("client " + std::to_string(shard.client_id) +
                           " diverged in epoch " + std::to_string(epoch + 1) +
                           ": " + e.what());
      }
      report.pseudo_labels_seen += unlabeled_batch.size();
      report.pseudo_labels_accepted += loss.accepted;
      sgd_step(report.params, state, loss.grad, options.optimizer);
    }
    report.batches_run += labeled_batches + unlabeled_batches;
    if (!all_finite(report.params.values)) {
      throw NumericError("client " + std::to_string(shard.client_id) +
                         " produced non-finite parameters in epoch " +
                         std::to_string(epoch + 1));
    }
    report.labeled_indices.push_back(std::move(split.labeled));
    ++report.epochs_run;
  }
  return report;
}

}  // namespace fednoil
