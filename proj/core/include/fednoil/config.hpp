#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fednoil/server.hpp"

namespace fednoil {

// Parses the flat `key=value` experiment format. `#` starts a comment,
// sections are dotted key prefixes (`noise.flavor=pair`). Overrides use the
// same syntax and are applied after the file, last one wins. Every default is
// resolved (clean fraction from the noise mode, psi from r_min, group ratios
// from flavor and mode, budget-matched epochs) and the result validated.
// Throws ConfigError naming the key and line on any problem.
ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::string>& overrides = {});

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

// Writes every key of the resolved config, one `key=value` per line, in a
// fixed order. parse_config(echo_config(c)) == c.
std::string echo_config(const ExperimentConfig& config);

// All recognized keys in echo order.
const std::vector<std::string_view>& config_keys();

// Shortest round-trip decimal representation.
std::string format_real(double value);

}  // namespace fednoil
