// fednoil: experiment runner.
//
//   fednoil run <config> [--set k=v]... [--out dir] [--seeds a,b,c]
//               [--variants v1,v2] [--parallel]
//   fednoil validate <config> [--set k=v]...
//   fednoil schedule-table <config> [--set k=v]...

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fednoil/config.hpp"
#include "fednoil/runner.hpp"
#include "fednoil/schedule.hpp"

namespace {

int cmd_run(const fednoil::RunManifest& manifest) {
  const fednoil::RunSummary summary = fednoil::run(manifest);
  std::cout << fednoil::format_summary_table(summary.rows);
  for (const auto& cell : summary.cells) {
    if (!cell.error.empty()) {
      std::cerr << "error: " << fednoil::to_string(cell.method) << " seed "
                << cell.seed << ": " << cell.error << '\n';
    }
  }
  std::cout << "logs written to " << manifest.output_dir.string() << '\n';
  return summary.any_error() ? 1 : 0;
}

int cmd_validate(const std::string& path,
                 const std::vector<std::string>& overrides) {
  const auto config = fednoil::load_config(path, overrides);
  std::cout << fednoil::echo_config(config);
  return 0;
}

int cmd_schedule_table(const std::string& path,
                       const std::vector<std::string>& overrides) {
  const auto config = fednoil::load_config(path, overrides);
  const auto& s = config.schedule;
  std::cout << "# kind=" << fednoil::to_string(s.kind) << " t_max=" << s.t_max
            << " t_min=" << s.t_min << " r_min=" << s.r_min
            << " psi1=" << fednoil::format_real(s.psi1)
            << " psi2=" << fednoil::format_real(s.psi2) << '\n';
  std::cout << "round,epochs\n";
  const auto table = fednoil::epoch_table(s);
  long total = 0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    std::cout << r + 1 << ',' << table[r] << '\n';
    total += table[r];
  }
  std::cout << "# total_epochs=" << total << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedNoiL federated noisy-label simulator"};
  app.require_subcommand(1);

  fednoil::RunManifest manifest;
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants;
  std::string out_dir = "runs";

  auto* run = app.add_subcommand("run", "Run every (variant, seed) pair");
  run->add_option("config", config_path, "Experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a config key (k=v)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seeds", seeds, "Comma separated seeds")->delimiter(',');
  run->add_option("--variants", variants,
                  "Comma separated variants: fednoil, fedavg, uniform_client, "
                  "uniform_data, no_ssl")
      ->delimiter(',');
  run->add_flag("--parallel", manifest.parallel_trials,
                "Run trials in parallel");

  auto* validate = app.add_subcommand("validate", "Resolve and echo a config");
  validate->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  validate->add_option("--set", overrides, "Override a config key (k=v)");

  auto* schedule =
      app.add_subcommand("schedule-table", "Print local epochs per round");
  schedule->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  schedule->add_option("--set", overrides, "Override a config key (k=v)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      manifest.config_path = config_path;
      manifest.overrides = overrides;
      manifest.output_dir = out_dir;
      manifest.seeds = seeds;
      for (const auto& name : variants) {
        const auto method = fednoil::method_from_string(name);
        if (!method) {
          std::cerr << "unknown variant '" << name << "'\n";
          return 2;
        }
        manifest.variants.push_back(*method);
      }
      return cmd_run(manifest);
    }
    if (*validate) return cmd_validate(config_path, overrides);
    if (*schedule) return cmd_schedule_table(config_path, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
