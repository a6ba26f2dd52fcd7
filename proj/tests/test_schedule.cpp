#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fednoil/errors.hpp"
#include "fednoil/schedule.hpp"

namespace fednoil {
namespace {

ScheduleSpec cosine_200() {
  return make_schedule(ScheduleKind::kCosine, 100, 20, 200, 80);
}
ScheduleSpec log_200() {
  return make_schedule(ScheduleKind::kLogarithm, 100, 20, 200, 80);
}

TEST(Psi1, SolvedFromRmin) {
  EXPECT_DOUBLE_EQ(solve_psi1(80, 200), 0.79);
  EXPECT_THROW(solve_psi1(201, 200), DomainError);
  EXPECT_THROW(solve_psi1(1, 200), DomainError);
  EXPECT_NO_THROW(solve_psi1(200, 200));
}

TEST(Psi2, SolvedFromRmin) {
  EXPECT_DOUBLE_EQ(solve_psi2(80, 100, 20), std::pow(80.0, 1.0 / 80.0));
  EXPECT_NEAR(solve_psi2(80, 100, 20), 1.05630, 5e-6);
  EXPECT_DOUBLE_EQ(solve_psi2(2, 21, 20), 2.0);
  EXPECT_THROW(solve_psi2(1, 100, 20), DomainError);
  EXPECT_THROW(solve_psi2(0, 100, 20), DomainError);
}

TEST(Cosine, Endpoints) {
  const ScheduleSpec s = cosine_200();
  EXPECT_EQ(cosine_epochs(1, s), 100);
  EXPECT_EQ(cosine_epochs(80, s), 20);
  for (int r = 80; r <= 200; ++r) EXPECT_EQ(cosine_epochs(r, s), 20) << r;
}

TEST(Cosine, HandEvaluatedRound40) {
  const ScheduleSpec s = cosine_200();
  const double c = std::cos(39.0 * M_PI / 158.0);
  EXPECT_NEAR(c, 0.71410, 5e-6);
  EXPECT_EQ(std::lround(20 + 80 * c), 77);
  EXPECT_EQ(cosine_epochs(40, s), 77);
}

TEST(Cosine, NonIncreasing) {
  const auto table = epoch_table(cosine_200());
  ASSERT_EQ(table.size(), 200u);
  for (std::size_t i = 1; i < table.size(); ++i) {
    EXPECT_LE(table[i], table[i - 1]);
  }
}

TEST(Cosine, StaysAtMinimumForSmallPsi1) {
  ScheduleSpec s = make_schedule(ScheduleKind::kCosine, 50, 10, 100, 5);
  for (int r = 5; r <= 100; ++r) EXPECT_EQ(cosine_epochs(r, s), 10) << r;
}

TEST(Logarithm, Endpoints) {
  const ScheduleSpec s = log_200();
  EXPECT_EQ(log_epochs(1, s), 100);
  EXPECT_EQ(log_epochs(80, s), 20);
  for (int r = 80; r <= 200; ++r) EXPECT_EQ(log_epochs(r, s), 20) << r;
}

TEST(Logarithm, HandEvaluatedRound9) {
  const ScheduleSpec s = log_200();
  const double term = std::log(9.0) / std::log(s.psi2);
  EXPECT_NEAR(term, 40.113, 5e-3);
  EXPECT_EQ(log_epochs(9, s), 60);
}

TEST(Schedules, CosineDominatesLogarithmBeforeRmin) {
  const ScheduleSpec c = cosine_200();
  const ScheduleSpec l = log_200();
  for (int r = 1; r < 80; ++r) {
    EXPECT_GE(cosine_epochs(r, c), log_epochs(r, l)) << r;
  }
}

TEST(Schedules, RoundTripAtRminForManyShapes) {
  for (int r_min : {2, 10, 20, 40, 80}) {
    const auto c = make_schedule(ScheduleKind::kCosine, 100, 20, 200, r_min);
    const auto l = make_schedule(ScheduleKind::kLogarithm, 100, 20, 200, r_min);
    EXPECT_EQ(cosine_epochs(r_min, c), 20) << r_min;
    EXPECT_EQ(log_epochs(r_min, l), 20) << r_min;
  }
}

TEST(Schedules, EpochsAtDispatchesOnKind) {
  ScheduleSpec s = cosine_200();
  EXPECT_EQ(epochs_at(40, s), 77);
  s = log_200();
  EXPECT_EQ(epochs_at(9, s), 60);
  s.kind = ScheduleKind::kConstant;
  s.constant_epochs = 30;
  EXPECT_EQ(epochs_at(1, s), 30);
  EXPECT_EQ(epochs_at(200, s), 30);
}

TEST(BudgetMatch, HandSum) {
  ScheduleSpec s = make_schedule(ScheduleKind::kCosine, 100, 20, 4, 2);
  EXPECT_EQ(epoch_table(s), (std::vector<int>{100, 20, 20, 20}));
  EXPECT_EQ(budget_matched_constant(s), 40);
}

TEST(BudgetMatch, ConstantReferenceIsAFixedPoint) {
  ScheduleSpec s;
  s.kind = ScheduleKind::kConstant;
  s.constant_epochs = 17;
  s.rounds = 33;
  EXPECT_EQ(budget_matched_constant(s), 17);
}

TEST(BudgetMatch, TotalWithinHalfARoundPerRound) {
  for (const ScheduleKind kind :
       {ScheduleKind::kCosine, ScheduleKind::kLogarithm}) {
    for (int r_min : {10, 20, 40, 80}) {
      const auto s = make_schedule(kind, 100, 20, 200, r_min);
      const auto table = epoch_table(s);
      const long total = std::accumulate(table.begin(), table.end(), 0L);
      const long matched = 200L * budget_matched_constant(s);
      EXPECT_LE(std::abs(total - matched), 100) << to_string(kind) << r_min;
    }
  }
}

TEST(ScheduleSpec, Validation) {
  ScheduleSpec s = cosine_200();
  EXPECT_NO_THROW(s.validate());
  s.t_min = 101;
  EXPECT_THROW(s.validate(), ConfigError);
  s = cosine_200();
  s.t_min = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = cosine_200();
  s.rounds = -1;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(epochs_at(0, cosine_200()), DomainError);
}

}  // namespace
}  // namespace fednoil
