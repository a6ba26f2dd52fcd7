#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fednoil/data.hpp"

namespace fednoil {

struct RoundRecord {
  int round = 0;
  std::vector<ClientId> selected;
  int epochs = 0;
  double test_accuracy = 0.0;
  std::optional<double> avg_selected_noise_ratio;
  std::optional<double> label_precision;
  std::optional<double> label_recall;
  std::uint64_t cumulative_batches = 0;
  std::optional<double> pseudo_label_acceptance_rate;
  std::optional<double> wall_ms;

  bool operator==(const RoundRecord&) const = default;
};

inline constexpr std::string_view kRunLogHeader =
    "round,selected,epochs,accuracy,noise_ratio,precision,recall,cum_batches,"
    "pl_accept,wall_ms";

// Unweighted mean of the realized noise ratios; nullopt for no selection.
std::optional<double> avg_selected_noise_ratio(
    std::span<const ClientShard* const> selected);

struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
};

// One selected client's labeled subsets for a round (one set per epoch).
struct LabeledSelection {
  const ClientShard* shard = nullptr;
  std::span<const std::vector<std::size_t>> labeled_sets;
};

// Micro-averaged over all selected clients and epochs:
//   precision = truly clean picks / picks
//   recall    = truly clean picks / truly clean samples available
std::optional<double> pooled_precision(std::span<const LabeledSelection> sel);
PrecisionRecall label_precision_recall(std::span<const LabeledSelection> sel);

// Shortest decimal that parses back to the same double.
std::string format_number(double value);

void write_csv(std::ostream& out, std::span<const RoundRecord> records);
std::vector<RoundRecord> parse_csv(std::istream& in);

// Key/value pairs written verbatim as `key=value` lines.
using Metadata = std::vector<std::pair<std::string, std::string>>;

// Writes `path` (CSV) and `path` + ".meta" (metadata sidecar).
void write_run_log(std::span<const RoundRecord> records,
                   const std::filesystem::path& path,
                   const Metadata& metadata = {});

std::vector<RoundRecord> read_run_log(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

// Build identifier baked in at configure time.
std::string_view build_describe();

}  // namespace fednoil
