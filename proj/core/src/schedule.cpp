#include "fednoil/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "fednoil/data.hpp"
#include "fednoil/errors.hpp"

namespace fednoil {

void ScheduleSpec::validate() const {
  if (!(1 <= t_min && t_min <= t_max)) {
    throw ConfigError("schedule needs 1 <= t_min <= t_max");
  }
  if (rounds < 0) throw ConfigError("rounds must be non-negative");
  switch (kind) {
    case ScheduleKind::kCosine:
      if (!(psi1 > 0.0)) throw ConfigError("schedule psi1 must be positive");
      break;
    case ScheduleKind::kLogarithm:
      if (!(psi2 > 1.0)) throw ConfigError("schedule psi2 must exceed 1");
      break;
    case ScheduleKind::kConstant:
      if (constant_epochs < 1) {
        throw ConfigError("constant schedule needs at least one epoch");
      }
      break;
  }
}

double solve_psi1(int r_min, int rounds) {
  if (r_min <= 1) {
    throw DomainError("r_min must exceed 1, got " + std::to_string(r_min));
  }
  if (r_min > rounds) {
    throw DomainError("r_min " + std::to_string(r_min) +
                      " exceeds the number of rounds " + std::to_string(rounds));
  }
  return 2.0 * (r_min - 1) / static_cast<double>(rounds);
}

double solve_psi2(int r_min, int t_max, int t_min) {
  if (r_min <= 1) {
    throw DomainError("r_min must exceed 1, got " + std::to_string(r_min));
  }
  if (t_max <= t_min) throw DomainError("t_max must exceed t_min");
  return std::pow(static_cast<double>(r_min), 1.0 / (t_max - t_min));
}

int cosine_epochs(int r, const ScheduleSpec& spec) {
  const double arg = std::min(
      std::numbers::pi,
      (r - 1) * std::numbers::pi / (spec.psi1 * spec.rounds));
  const double raw =
      spec.t_min + (spec.t_max - spec.t_min) * std::cos(arg);
  return std::max(static_cast<int>(round_half_up(std::max(raw, 0.0))),
                  spec.t_min);
}

int log_epochs(int r, const ScheduleSpec& spec) {
  const double raw = spec.t_max - std::log(static_cast<double>(r)) /
                                      std::log(spec.psi2);
  return std::max(static_cast<int>(round_half_up(std::max(raw, 0.0))),
                  spec.t_min);
}

int epochs_at(int r, const ScheduleSpec& spec) {
  if (r < 1) throw DomainError("schedule rounds are 1-based");
  switch (spec.kind) {
    case ScheduleKind::kCosine:
      return cosine_epochs(r, spec);
    case ScheduleKind::kLogarithm:
      return log_epochs(r, spec);
    case ScheduleKind::kConstant:
      return spec.constant_epochs;
  }
  return spec.t_min;
}

std::vector<int> epoch_table(const ScheduleSpec& spec) {
  std::vector<int> table;
  table.reserve(static_cast<std::size_t>(std::max(spec.rounds, 0)));
  for (int r = 1; r <= spec.rounds; ++r) table.push_back(epochs_at(r, spec));
  return table;
}

int budget_matched_constant(const ScheduleSpec& reference) {
  if (reference.rounds < 1) {
    throw DomainError("budget matching needs at least one round");
  }
  const auto table = epoch_table(reference);
  const long total = std::accumulate(table.begin(), table.end(), 0L);
  return static_cast<int>(
      round_half_up(static_cast<double>(total) / reference.rounds));
}

ScheduleSpec make_schedule(ScheduleKind kind, int t_max, int t_min, int rounds,
                           int r_min) {
  ScheduleSpec spec;
  spec.kind = kind;
  spec.t_max = t_max;
  spec.t_min = t_min;
  spec.rounds = rounds;
  spec.r_min = r_min;
  if (kind == ScheduleKind::kCosine) spec.psi1 = solve_psi1(r_min, rounds);
  if (kind == ScheduleKind::kLogarithm) {
    spec.psi2 = solve_psi2(r_min, t_max, t_min);
  }
  spec.validate();
  return spec;
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kCosine:
      return "cosine";
    case ScheduleKind::kLogarithm:
      return "logarithm";
    case ScheduleKind::kConstant:
      return "constant";
  }
  return "?";
}

}  // namespace fednoil
