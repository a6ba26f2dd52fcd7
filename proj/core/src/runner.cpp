#include "fednoil/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "fednoil/config.hpp"
#include "fednoil/errors.hpp"
#include "parallel.hpp"

namespace fednoil {

bool RunSummary::any_error() const {
  for (const CellResult& c : cells) {
    if (!c.error.empty()) return true;
  }
  return false;
}

std::string run_log_stem(Method method, std::uint64_t seed) {
  return std::string(to_string(method)) + "_seed" + std::to_string(seed);
}

Metadata run_metadata(const ExperimentConfig& config) {
  Metadata meta;
  meta.emplace_back("meta.method", std::string(to_string(config.method)));
  meta.emplace_back("meta.seed", std::to_string(config.seed));
  meta.emplace_back("meta.build", std::string(build_describe()));
  meta.emplace_back("meta.schedule.kind",
                    std::string(to_string(config.schedule.kind)));
  meta.emplace_back("meta.schedule.psi1", format_real(config.schedule.psi1));
  meta.emplace_back("meta.schedule.psi2", format_real(config.schedule.psi2));
  meta.emplace_back("meta.schedule.epochs_total", [&] {
    long total = 0;
    for (int t : epoch_table(config.schedule)) total += t;
    return std::to_string(total);
  }());
  std::istringstream echo(echo_config(config));
  std::string line;
  while (std::getline(echo, line)) {
    const auto eq = line.find('=');
    meta.emplace_back("config." + line.substr(0, eq), line.substr(eq + 1));
  }
  return meta;
}

ExperimentConfig config_from_metadata(std::string_view metadata_text) {
  std::string echo;
  std::istringstream in{std::string(metadata_text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("config.", 0) == 0) echo += line.substr(7) + '\n';
  }
  return parse_config(echo);
}

CellResult run_cell(const ExperimentConfig& config,
                    const std::filesystem::path& output_dir) {
  CellResult cell;
  cell.method = config.method;
  cell.seed = config.seed;
  cell.log_path = output_dir / (run_log_stem(config.method, config.seed) + ".csv");
  try {
    RunHooks hooks;
    if (config.checkpoint_interval > 0) {
      hooks.checkpoint_dir =
          output_dir / (run_log_stem(config.method, config.seed) + "_ckpt");
      std::filesystem::create_directories(*hooks.checkpoint_dir);
    }
    const ExperimentResult result = run_experiment(config, hooks);
    write_run_log(result.records, cell.log_path, run_metadata(config));
    cell.summary = result.summary;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

std::vector<VariantRow> summarize_cells(const std::vector<CellResult>& cells,
                                        const std::vector<Method>& variants) {
  std::vector<VariantRow> rows;
  for (Method m : variants) {
    VariantRow row;
    row.method = m;
    std::vector<double> values;
    for (const CellResult& c : cells) {
      if (c.method != m) continue;
      ++row.runs;
      if (!c.summary) {
        ++row.failures;
        continue;
      }
      values.push_back(100.0 * c.summary->reported_accuracy);
      row.all_converged = row.all_converged && c.summary->converged;
    }
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      row.mean = sum / static_cast<double>(values.size());
      if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - row.mean) * (v - row.mean);
        row.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_summary_table(const std::vector<VariantRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %-20s %5s %7s\n", "variant",
                "accuracy (%)", "runs", "failed");
  out << line;
  for (const VariantRow& r : rows) {
    std::string acc;
    if (r.failures == r.runs) {
      acc = "error";
    } else {
      char buf[64];
      if (r.stddev) {
        std::snprintf(buf, sizeof buf, "%.2f ± %.2f", r.mean, *r.stddev);
      } else {
        std::snprintf(buf, sizeof buf, "%.2f", r.mean);
      }
      acc = buf;
      if (!r.all_converged) acc += " *";
    }
    std::snprintf(line, sizeof line, "%-16s %-20s %5zu %7zu\n",
                  std::string(to_string(r.method)).c_str(), acc.c_str(), r.runs,
                  r.failures);
    out << line;
  }
  return out.str();
}

RunSummary run(const RunManifest& manifest, const ExperimentConfig& base) {
  std::vector<std::uint64_t> seeds = manifest.seeds;
  if (seeds.empty()) {
    for (int t = 0; t < base.trials; ++t) seeds.push_back(base.seed + t);
  }
  std::vector<Method> variants = manifest.variants;
  if (variants.empty()) variants.push_back(base.method);

  std::filesystem::create_directories(manifest.output_dir);
  {
    std::ofstream resolved(manifest.output_dir / "resolved.cfg");
    resolved << echo_config(base);
  }

  std::vector<ExperimentConfig> configs;
  for (Method m : variants) {
    for (std::uint64_t seed : seeds) {
      ExperimentConfig c = base;
      c.method = m;
      c.seed = seed;
      configs.push_back(c);
    }
  }

  RunSummary summary;
  summary.cells.resize(configs.size());
  const int workers =
      manifest.parallel_trials
          ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
          : 1;
  detail::parallel_for(configs.size(), workers, [&](std::size_t i) {
    summary.cells[i] = run_cell(configs[i], manifest.output_dir);
  });
  summary.rows = summarize_cells(summary.cells, variants);

  const std::string table = format_summary_table(summary.rows);
  std::ofstream out(manifest.output_dir / "summary.txt");
  out << table;
  for (const CellResult& c : summary.cells) {
    if (!c.error.empty()) {
      out << "error: " << to_string(c.method) << " seed " << c.seed << ": "
          << c.error << '\n';
    }
  }
  return summary;
}

RunSummary run(const RunManifest& manifest) {
  return run(manifest, load_config(manifest.config_path, manifest.overrides));
}

}  // namespace fednoil
