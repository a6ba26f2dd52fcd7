#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fednoil/config.hpp"
#include "fednoil/errors.hpp"
#include "support/oracles.hpp"

namespace fednoil {
namespace {

std::string error_of(std::string_view text,
                     const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyFileGivesDocumentedDefaults) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.sampling.temperature, 0.5);
  EXPECT_EQ(c.ssl.threshold, 0.95);
  EXPECT_EQ(c.ssl.lambda_u, 1.0);
  EXPECT_EQ(c.optimizer.batch_size, 32u);
  EXPECT_EQ(c.optimizer.learning_rate, 0.05);
  EXPECT_EQ(c.optimizer.momentum, 0.5);
  EXPECT_EQ(c.optimizer.weight_decay, 1e-4);
  EXPECT_EQ(c.schedule.t_max, 100);
  EXPECT_EQ(c.schedule.t_min, 20);
  EXPECT_EQ(c.sampling.client_fraction, 0.3);
  EXPECT_EQ(c.sampling.clean_fraction, 0.35);
  EXPECT_EQ(c.sampling.clients, Selection::kConfidence);
  EXPECT_EQ(c.partition.num_clients, 20);
  EXPECT_EQ(c.rounds, 200);
  EXPECT_EQ(c.method, Method::kFedNoiL);
  EXPECT_EQ(c.model.output_init, OutputInit::kUniform);
  EXPECT_DOUBLE_EQ(c.schedule.psi1, 0.79);
  EXPECT_EQ(c.noise.group_ratios, (std::vector<double>{0.5, 0.6, 0.7, 0.8}));
}

TEST(Config, LogarithmSolvesPsi2) {
  const ExperimentConfig c = parse_config(
      "schedule.kind=logarithm\nschedule.r_min=80\nrounds=200\n");
  EXPECT_EQ(c.schedule.kind, ScheduleKind::kLogarithm);
  EXPECT_DOUBLE_EQ(c.schedule.psi2, std::pow(80.0, 1.0 / 80.0));
}

TEST(Config, NoiseModeSetsGroupRatiosAndCleanFraction) {
  const auto high = parse_config("noise.mode=high\nnoise.flavor=symmetric\n");
  EXPECT_EQ(high.noise.group_ratios, (std::vector<double>{0.5, 0.6, 0.7, 0.8}));
  const auto pair = parse_config("noise.flavor=pair\n");
  EXPECT_EQ(pair.noise.group_ratios, (std::vector<double>{0.3, 0.5, 0.6, 0.8}));
  const auto low = parse_config("noise.mode=low\n");
  EXPECT_EQ(low.noise.group_ratios, (std::vector<double>{0.3, 0.4, 0.5, 0.6}));
  EXPECT_EQ(low.sampling.clean_fraction, 0.55);
  const auto custom =
      parse_config("noise.mode=custom\nnoise.group_ratios=0.1, 0.2\n");
  EXPECT_EQ(custom.noise.group_ratios, (std::vector<double>{0.1, 0.2}));
}

TEST(Config, CommentsWhitespaceAndLastValueWins) {
  const auto c = parse_config(
      "# scenario\n  rounds = 10  # short\nrounds=12\n\nseed=5\n"
      "schedule.r_min=4\n");
  EXPECT_EQ(c.rounds, 12);
  EXPECT_EQ(c.seed, 5u);
}

TEST(Config, OverridesApplyAfterTheFile) {
  const auto c = parse_config("rounds=12\nseed=1\nschedule.r_min=4\n",
                              {"seed=9", "noise.mode=low", "seed=10"});
  EXPECT_EQ(c.seed, 10u);
  EXPECT_EQ(c.noise.mode, NoiseMode::kLow);
  EXPECT_EQ(c.rounds, 12);
}

TEST(Config, ConstantScheduleMatchedToCosine) {
  const auto c = parse_config(
      "schedule.kind=constant\nschedule.match=cosine\nschedule.r_min=2\n"
      "schedule.t_max=100\nschedule.t_min=20\nrounds=4\n");
  EXPECT_EQ(c.schedule.constant_epochs, 40);
  EXPECT_EQ(c.schedule_match, ScheduleKind::kCosine);
}

TEST(Config, ErrorsNameKeyAndLine) {
  EXPECT_EQ(error_of("rounds=10\nsampling.temperature=-1\n"),
            "line 2: sampling.temperature: must be positive");
  EXPECT_EQ(error_of("\n\nnoise.flavor=sideways\n"),
            "line 3: noise.flavor: expected one of {symmetric, pair}, got "
            "'sideways'");
  EXPECT_EQ(error_of("seed=abc\n"),
            "line 1: seed: expected an integer, got 'abc'");
  EXPECT_EQ(error_of("bogus.key=1\n"), "line 1: unknown key 'bogus.key'");
  EXPECT_EQ(error_of("rounds\n"), "line 1: expected key=value, got 'rounds'");
  EXPECT_EQ(error_of("", {"optim.lr=-0.1"}),
            "--set #1: optim.lr: must be non-negative");
}

TEST(Config, RejectsInvalidCombinations) {
  EXPECT_NE(error_of("schedule.kind=cosine\nschedule.r_min=300\n"), "");
  EXPECT_NE(error_of("schedule.match=cosine\n"), "");
  EXPECT_NE(error_of("schedule.t_min=200\n"), "");
  EXPECT_NE(error_of("sampling.clean_fraction=0\n"), "");
  EXPECT_NE(error_of("ssl.threshold=1.5\n"), "");
  EXPECT_NE(error_of("partition.clients=0\n"), "");
  EXPECT_NE(error_of("noise.client_ratios=0.1,0.2\n"), "");
  EXPECT_NE(error_of("data.source=idx\n"), "");
  EXPECT_NE(error_of("log.wall_time=maybe\n"), "");
  EXPECT_NE(error_of("sampling.clients=random\n"), "");
}

TEST(Config, EchoRoundTrips) {
  const std::vector<std::string> texts = {
      "",
      "schedule.kind=logarithm\nschedule.r_min=24\nschedule.t_max=20\n"
      "schedule.t_min=4\nrounds=60\nmodel.hidden=16\nmodel.output_init=zero\n",
      "noise.mode=custom\nnoise.client_ratios=0.1,0.2,0.3\npartition.clients=3\n"
      "partition.mode=dirichlet_size\npartition.beta=0.3\n"
      "partition.samples_per_client=7\nsampling.temperature=0.1\n",
      "schedule.kind=constant\nschedule.match=logarithm\nmethod=no_ssl\n"
      "log.wall_time=true\nsampling.data=uniform\nssl.weak_views=3\n",
  };
  for (const auto& text : texts) {
    const ExperimentConfig c = parse_config(text);
    const std::string echo = echo_config(c);
    EXPECT_EQ(parse_config(echo), c) << echo;
    EXPECT_EQ(echo_config(parse_config(echo)), echo);
  }
}

TEST(Config, EchoListsEveryKeyOnce) {
  const std::string echo = "\n" + echo_config(parse_config(""));
  for (std::string_view key : config_keys()) {
    EXPECT_NE(echo.find("\n" + std::string(key) + "="), std::string::npos)
        << key;
  }
  std::size_t lines = 0;
  for (char ch : echo) lines += ch == '\n';
  EXPECT_EQ(lines, config_keys().size() + 1);
}

TEST(Config, LoadsFromFileAndReportsThePath) {
  testing::TempDir dir("cfg");
  const auto path = dir.path() / "a.cfg";
  std::ofstream(path) << "rounds=3\nschedule.r_min=2\nnoise.mode=loud\n";
  try {
    load_config(path);
    FAIL() << "bad mode accepted";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("a.cfg"), std::string::npos);
    EXPECT_NE(what.find("line 3: noise.mode"), std::string::npos);
  }
  EXPECT_THROW(load_config(dir.path() / "missing.cfg"), IoError);
}

TEST(Config, FormatRealIsShortest) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(1e-4), "1e-04");
  EXPECT_EQ(std::stod(format_real(0.1 + 0.2)), 0.1 + 0.2);
  EXPECT_EQ(format_real(2.0), "2");
}

}  // namespace
}  // namespace fednoil
