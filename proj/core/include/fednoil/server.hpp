#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fednoil/data.hpp"
#include "fednoil/localtrain.hpp"
#include "fednoil/model.hpp"
#include "fednoil/sampling.hpp"
#include "fednoil/schedule.hpp"
#include "fednoil/telemetry.hpp"

namespace fednoil {

enum class Method {
  kFedNoiL,
  kVanillaFedAvg,
  kUniformClientSampling,
  kUniformLocalDataSampling,
  kNoSsl,
};

std::string_view to_string(Method method);
std::optional<Method> method_from_string(std::string_view name);

enum class DataSource { kSynthetic, kIdx };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  SyntheticSpec synthetic{4, 10, 500, 0.6};
  std::size_t test_samples_per_class = 250;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  bool operator==(const DataConfig&) const = default;
};

struct ModelConfig {
  std::size_t hidden = 0;
  Activation activation = Activation::kTanh;
  OutputInit output_init = OutputInit::kUniform;
  bool operator==(const ModelConfig&) const = default;
};

// Declarative description of one run.
struct ExperimentConfig {
  DataConfig data;
  PartitionSpec partition;
  NoiseSpec noise;
  ModelConfig model;
  OptimizerConfig optimizer;
  SamplingConfig sampling;
  SslConfig ssl;
  ScheduleSpec schedule;
  // For constant schedules: when set, the epoch count is budget-matched to
  // this decaying schedule (same t_max, t_min, r_min).
  std::optional<ScheduleKind> schedule_match;
  int rounds = 200;
  Method method = Method::kFedNoiL;
  std::uint64_t seed = 0;
  int trials = 1;
  // Worker threads for client scoring and local training within a round.
  int threads = 1;
  // Write a parameter checkpoint every N rounds (0 disables).
  int checkpoint_interval = 0;
  // Wall time is left empty in logs unless enabled, keeping logs
  // byte-reproducible.
  bool record_wall_time = false;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Shards after partitioning and noise injection, plus the clean test set.
struct Federation {
  std::vector<ClientShard> clients;
  Dataset test;
};

Federation build_federation(const ExperimentConfig& config);

Architecture architecture_for(const ExperimentConfig& config,
                              const Federation& federation);

// Local training options after applying the method's substitutions.
LocalTrainOptions local_options_for(const ExperimentConfig& config);

// True when the round draws clients by confidence rather than uniformly,
// after applying the method's substitutions.
bool uses_confidence_client_sampling(const ExperimentConfig& config);

struct WeightedModel {
  const ModelParams* params = nullptr;
  double sample_count = 0.0;
};

// sum_k (n_k / sum_j n_j) * theta_k over the given subset.
ModelParams aggregate(std::span<const WeightedModel> models);

struct GlobalState {
  int round = 0;
  ModelParams params;
  std::vector<ClientScore> client_scores;
  // Last six test accuracies in percentage points.
  std::deque<double> accuracy_window;
  std::uint64_t cumulative_batches = 0;
};

// Five consecutive round-to-round changes below two percentage points.
bool window_converged(const std::deque<double>& window);

// Per-client detail behind a RoundRecord, for diagnostics and tests.
struct RoundDetail {
  std::vector<ClientId> sampled;   // draw order
  std::vector<ClientId> diverged;
  std::vector<double> client_probabilities;
  std::vector<LocalUpdateReport> reports;  // aggregated clients, by id
};

RoundRecord run_round(GlobalState& state, const Federation& federation,
                      const ExperimentConfig& config,
                      RoundDetail* detail = nullptr);

struct ExperimentSummary {
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double max_accuracy = 0.0;
  bool converged = false;
  std::optional<int> first_converged_round;
  // final_accuracy when converged, max_accuracy otherwise.
  double reported_accuracy = 0.0;
};

ExperimentSummary summarize(double initial_accuracy,
                            std::span<const RoundRecord> records);

struct RunHooks {
  std::function<void(const GlobalState&, const RoundRecord&,
                     const RoundDetail&)>
      on_round;
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;
  ExperimentSummary summary;
  ModelParams final_params;
  std::vector<double> client_noise_ratios;
  std::vector<std::size_t> client_sizes;
  std::vector<std::size_t> client_clean_counts;
};

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunHooks& hooks = {});

}  // namespace fednoil
