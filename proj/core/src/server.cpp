#include "fednoil/server.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "fednoil/errors.hpp"
#include "fednoil/rng.hpp"
#include "parallel.hpp"

namespace fednoil {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kFedNoiL:
      return "fednoil";
    case Method::kVanillaFedAvg:
      return "fedavg";
    case Method::kUniformClientSampling:
      return "uniform_client";
    case Method::kUniformLocalDataSampling:
      return "uniform_data";
    case Method::kNoSsl:
      return "no_ssl";
  }
  return "?";
}

std::optional<Method> method_from_string(std::string_view name) {
  for (Method m : {Method::kFedNoiL, Method::kVanillaFedAvg,
                   Method::kUniformClientSampling,
                   Method::kUniformLocalDataSampling, Method::kNoSsl}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  partition.validate();
  noise.validate(partition.num_clients);
  optimizer.validate();
  sampling.validate();
  ssl.validate();
  schedule.validate();
  if (rounds < 0) throw ConfigError("rounds must be non-negative");
  if (schedule.rounds != rounds) {
    throw ConfigError("schedule rounds disagree with the experiment rounds");
  }
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (checkpoint_interval < 0) {
    throw ConfigError("checkpoint interval must be non-negative");
  }
  if (data.source == DataSource::kSynthetic) {
    if (data.synthetic.num_classes < 2) {
      throw ConfigError("synthetic data needs at least 2 classes");
    }
    if (data.synthetic.dim < 2) throw ConfigError("synthetic dim must be >= 2");
    if (data.synthetic.samples_per_class == 0 ||
        data.test_samples_per_class == 0) {
      throw ConfigError("synthetic sample counts must be positive");
    }
    if (!(data.synthetic.cluster_spread >= 0.0)) {
      throw ConfigError("cluster spread must be non-negative");
    }
  } else if (data.train_images.empty() || data.train_labels.empty() ||
             data.test_images.empty() || data.test_labels.empty()) {
    throw ConfigError("idx data source needs train and test image/label paths");
  }
}

Federation build_federation(const ExperimentConfig& config) {
  Dataset train;
  Federation fed;
  if (config.data.source == DataSource::kSynthetic) {
    train = generate_synthetic(config.data.synthetic,
                               derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::kData)}));
    SyntheticSpec test_spec = config.data.synthetic;
    test_spec.samples_per_class = config.data.test_samples_per_class;
    fed.test = generate_synthetic(
        test_spec,
        derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::kTestData)}));
  } else {
    train = load_idx(config.data.train_images, config.data.train_labels);
    fed.test = load_idx(config.data.test_images, config.data.test_labels);
    const int classes = std::max(train.num_classes, fed.test.num_classes);
    train.num_classes = classes;
    fed.test.num_classes = classes;
  }
  auto shards = partition(
      train, config.partition,
      derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::kPartition)}));
  fed.clients = apply_noise(
      std::move(shards), config.noise,
      derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::kNoise)}));
  return fed;
}

Architecture architecture_for(const ExperimentConfig& config,
                              const Federation& federation) {
  Architecture arch;
  arch.input_dim = federation.test.dim();
  arch.hidden = config.model.hidden;
  arch.num_classes = federation.test.num_classes;
  arch.activation = config.model.activation;
  return arch;
}

bool uses_confidence_client_sampling(const ExperimentConfig& config) {
  const Method m = config.method;
  return config.sampling.clients == Selection::kConfidence &&
         m != Method::kVanillaFedAvg && m != Method::kUniformClientSampling;
}

LocalTrainOptions local_options_for(const ExperimentConfig& config) {
  LocalTrainOptions options;
  options.sampling = config.sampling;
  options.ssl = config.ssl;
  options.optimizer = config.optimizer;
  options.uniform_data = config.sampling.data == Selection::kUniform;
  switch (config.method) {
    case Method::kFedNoiL:
    case Method::kUniformClientSampling:
      break;
    case Method::kVanillaFedAvg:
      // Plain CE on every local sample: no selection, no SSL, no jitter.
      options.sampling.clean_fraction = 1.0;
      options.uniform_data = true;
      options.use_ssl = false;
      options.ssl.lambda_u = 0.0;
      options.ssl.weak_noise_std = 0.0;
      options.ssl.strong_noise_std = 0.0;
      options.ssl.strong_mask_fraction = 0.0;
      break;
    case Method::kUniformLocalDataSampling:
      options.uniform_data = true;
      break;
    case Method::kNoSsl:
      options.use_ssl = false;
      options.ssl.lambda_u = 0.0;
      break;
  }
  return options;
}

ModelParams aggregate(std::span<const WeightedModel> models) {
  if (models.empty()) {
    throw ProtocolError("aggregation over an empty client set");
  }
  double total = 0.0;
  for (const WeightedModel& m : models) {
    if (m.params->values.size() != models.front().params->values.size()) {
      throw ShapeError("aggregated models have different shapes");
    }
    total += m.sample_count;
  }
  if (!(total > 0.0)) throw ProtocolError("aggregation weights sum to zero");
  ModelParams out{models.front().params->arch,
                  std::vector<double>(models.front().params->values.size(), 0.0)};
  for (const WeightedModel& m : models) {
    const double w = m.sample_count / total;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values[i] += w * m.params->values[i];
    }
  }
  return out;
}

bool window_converged(const std::deque<double>& window) {
  if (window.size() < 6) return false;
  for (std::size_t i = window.size() - 5; i < window.size(); ++i) {
    if (!(std::abs(window[i] - window[i - 1]) < 2.0)) return false;
  }
  return true;
}

RoundRecord run_round(GlobalState& state, const Federation& federation,
                      const ExperimentConfig& config, RoundDetail* detail) {
  const auto start = std::chrono::steady_clock::now();
  const int round = state.round + 1;
  const std::size_t k = federation.clients.size();
  if (k == 0) throw ProtocolError("no clients");

  // Every client scores the broadcast model; only the scalar sum is used.
  std::vector<double> p;
  if (uses_confidence_client_sampling(config)) {
    state.client_scores.assign(k, {});
    detail::parallel_for(k, config.threads, [&](std::size_t i) {
      state.client_scores[i] = score_client(state.params, federation.clients[i],
                                            config.sampling.temperature);
    });
    p = client_probabilities(state.client_scores);
  } else {
    p.assign(k, 1.0 / static_cast<double>(k));
  }

  Rng server_rng = make_stream(config.seed, Stream::kServer,
                               static_cast<std::uint64_t>(round));
  const std::vector<ClientId> sampled = sample_clients(
      p, clients_per_round(config.sampling.client_fraction, k), server_rng);
  std::vector<ClientId> order = sampled;
  std::sort(order.begin(), order.end());

  const int epochs = epochs_at(round, config.schedule);
  const LocalTrainOptions options = local_options_for(config);

  std::vector<std::optional<LocalUpdateReport>> reports(order.size());
  detail::parallel_for(order.size(), config.threads, [&](std::size_t j) {
    const ClientId id = order[j];
    Rng rng = make_stream(config.seed, Stream::kClient,
                          static_cast<std::uint64_t>(round),
                          static_cast<std::uint64_t>(id));
    try {
      reports[j] = local_update(state.params, federation.clients[id], epochs,
                                options, rng);
    } catch (const NumericError&) {
      reports[j].reset();
    }
  });

  std::vector<ClientId> aggregated;
  std::vector<ClientId> diverged;
  std::vector<WeightedModel> models;
  std::vector<const ClientShard*> shards;
  std::vector<LabeledSelection> selections;
  std::size_t seen = 0;
  std::size_t accepted = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    if (!reports[j]) {
      diverged.push_back(order[j]);
      continue;
    }
    const ClientShard& shard = federation.clients[order[j]];
    aggregated.push_back(order[j]);
    models.push_back({&reports[j]->params, static_cast<double>(shard.size())});
    shards.push_back(&shard);
    selections.push_back({&shard, reports[j]->labeled_indices});
    state.cumulative_batches += reports[j]->batches_run;
    seen += reports[j]->pseudo_labels_seen;
    accepted += reports[j]->pseudo_labels_accepted;
  }
  if (aggregated.empty()) {
    throw ProtocolError("round " + std::to_string(round) +
                        ": every selected client diverged");
  }

  state.params = aggregate(models);
  state.round = round;

  RoundRecord record;
  record.round = round;
  record.selected = aggregated;
  record.epochs = epochs;
  record.test_accuracy = evaluate_accuracy(state.params, federation.test);
  record.avg_selected_noise_ratio = avg_selected_noise_ratio(shards);
  const PrecisionRecall pr = label_precision_recall(selections);
  record.label_precision = pr.precision;
  record.label_recall = pr.recall;
  record.cumulative_batches = state.cumulative_batches;
  if (seen > 0) {
    record.pseudo_label_acceptance_rate =
        static_cast<double>(accepted) / static_cast<double>(seen);
  }

  state.accuracy_window.push_back(100.0 * record.test_accuracy);
  while (state.accuracy_window.size() > 6) state.accuracy_window.pop_front();

  if (config.record_wall_time) {
    record.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  }
  if (detail != nullptr) {
    detail->sampled = sampled;
    detail->diverged = std::move(diverged);
    detail->client_probabilities = std::move(p);
    detail->reports.clear();
    for (auto& r : reports) {
      if (r) detail->reports.push_back(std::move(*r));
    }
  }
  return record;
}

ExperimentSummary summarize(double initial_accuracy,
                            std::span<const RoundRecord> records) {
  ExperimentSummary s;
  s.initial_accuracy = initial_accuracy;
  s.final_accuracy = initial_accuracy;
  s.max_accuracy = initial_accuracy;
  s.reported_accuracy = initial_accuracy;
  if (records.empty()) return s;

  s.max_accuracy = records.front().test_accuracy;
  std::deque<double> window;
  for (const RoundRecord& r : records) {
    s.max_accuracy = std::max(s.max_accuracy, r.test_accuracy);
    s.final_accuracy = r.test_accuracy;
    window.push_back(100.0 * r.test_accuracy);
    if (window.size() > 6) window.pop_front();
    if (!s.first_converged_round && window_converged(window)) {
      s.first_converged_round = r.round;
    }
  }
  s.converged = window_converged(window);
  s.reported_accuracy = s.converged ? s.final_accuracy : s.max_accuracy;
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunHooks& hooks) {
  config.validate();
  const Federation federation = build_federation(config);
  const Architecture arch = architecture_for(config, federation);

  GlobalState state;
  state.params = ModelParams::initialize(
      arch, derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::kInit)}),
      config.model.output_init);

  ExperimentResult result;
  for (const ClientShard& shard : federation.clients) {
    result.client_noise_ratios.push_back(shard.realized_noise_ratio());
    result.client_sizes.push_back(shard.size());
    result.client_clean_counts.push_back(shard.clean_count());
  }
  const double initial = evaluate_accuracy(state.params, federation.test);

  RoundDetail detail;
  for (int r = 1; r <= config.rounds; ++r) {
    result.records.push_back(run_round(state, federation, config, &detail));
    if (hooks.on_round) hooks.on_round(state, result.records.back(), detail);
    if (hooks.checkpoint_dir && config.checkpoint_interval > 0 &&
        r % config.checkpoint_interval == 0) {
      save_params(state.params, *hooks.checkpoint_dir /
                                    ("checkpoint_r" + std::to_string(r) + ".bin"));
    }
  }
  result.summary = summarize(initial, result.records);
  result.final_params = std::move(state.params);
  return result;
}

}  // namespace fednoil
