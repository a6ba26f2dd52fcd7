#pragma once

#include <string_view>
#include <vector>

namespace fednoil {

enum class ScheduleKind { kCosine, kLogarithm, kConstant };

// Local-epoch schedule. psi1/psi2 are normally derived from r_min through
// solve_psi1 / solve_psi2 so that the decay reaches t_min exactly at r_min.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kCosine;
  int t_max = 100;
  int t_min = 20;
  int rounds = 200;
  int r_min = 80;
  double psi1 = 0.79;
  double psi2 = 1.0;
  int constant_epochs = 30;

  void validate() const;
  bool operator==(const ScheduleSpec&) const = default;
};

// psi1 = 2 (r_min - 1) / R puts the cosine zero at round r_min.
double solve_psi1(int r_min, int rounds);

// psi2 = r_min^(1 / (t_max - t_min)) so that log_psi2(r_min) = t_max - t_min.
double solve_psi2(int r_min, int t_max, int t_min);

// max{ round(t_min + (t_max - t_min) cos((r - 1) pi / (psi1 R))), t_min }.
// The cosine argument is capped at pi so the clamped curve never climbs
// back up for rounds far beyond r_min.
int cosine_epochs(int r, const ScheduleSpec& spec);

// max{ round(t_max - ln r / ln psi2), t_min }.
int log_epochs(int r, const ScheduleSpec& spec);

// Epochs for round r (1-based) under spec.kind.
int epochs_at(int r, const ScheduleSpec& spec);

// Full table T_1..T_R.
std::vector<int> epoch_table(const ScheduleSpec& spec);

// round(sum_r T_r / R): the constant epoch count whose R-round total matches
// the reference within R/2 epochs.
int budget_matched_constant(const ScheduleSpec& reference);

// Builds a spec of the given kind with psi1/psi2 solved from r_min.
ScheduleSpec make_schedule(ScheduleKind kind, int t_max, int t_min,
                           int rounds, int r_min);

std::string_view to_string(ScheduleKind kind);

}  // namespace fednoil
