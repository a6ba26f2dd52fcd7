#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fednoil/server.hpp"
#include "fednoil/telemetry.hpp"

namespace fednoil {

// What to run: every (variant, seed) pair of one base config.
struct RunManifest {
  std::filesystem::path config_path;
  std::vector<std::string> overrides;
  std::filesystem::path output_dir = "runs";
  // Empty: seed, seed + 1, ..., seed + trials - 1 from the config.
  std::vector<std::uint64_t> seeds;
  // Empty: the config's method.
  std::vector<Method> variants;
  bool parallel_trials = false;
};

struct CellResult {
  Method method = Method::kFedNoiL;
  std::uint64_t seed = 0;
  std::optional<ExperimentSummary> summary;
  std::string error;
  std::filesystem::path log_path;
};

struct VariantRow {
  Method method = Method::kFedNoiL;
  std::size_t runs = 0;
  std::size_t failures = 0;
  // Percentage points over successful runs.
  double mean = 0.0;
  std::optional<double> stddev;  // sample std; omitted for a single run
  bool all_converged = true;
};

struct RunSummary {
  std::vector<CellResult> cells;
  std::vector<VariantRow> rows;

  bool any_error() const;
};

std::string run_log_stem(Method method, std::uint64_t seed);

// Sidecar content: run identity, resolved schedule values, build id, and the
// full config echo under `config.` keys.
Metadata run_metadata(const ExperimentConfig& config);

// Recovers the config echo from a metadata sidecar.
ExperimentConfig config_from_metadata(std::string_view metadata_text);

// Runs one cell and writes its CSV log and sidecar into `output_dir`.
CellResult run_cell(const ExperimentConfig& config,
                    const std::filesystem::path& output_dir);

std::vector<VariantRow> summarize_cells(const std::vector<CellResult>& cells,
                                        const std::vector<Method>& variants);

// Fixed-width text table: mean ± std per variant; non-converged variants are
// marked with `*` and report max accuracy.
std::string format_summary_table(const std::vector<VariantRow>& rows);

RunSummary run(const RunManifest& manifest, const ExperimentConfig& base);
RunSummary run(const RunManifest& manifest);

}  // namespace fednoil
