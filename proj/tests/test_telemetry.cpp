#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fednoil/errors.hpp"
#include "fednoil/telemetry.hpp"
#include "support/oracles.hpp"

namespace fednoil {
namespace {

ClientShard shard_with_noise(std::size_t n, std::size_t noisy) {
  ClientShard s;
  s.num_classes = 2;
  s.features = Matrix(n, 1);
  s.true_labels.assign(n, 0);
  s.given_labels.assign(n, 0);
  for (std::size_t i = 0; i < noisy; ++i) s.given_labels[i] = 1;
  return s;
}

TEST(NoiseRatio, MeanOverSelectedClients) {
  const ClientShard a = shard_with_noise(10, 5);
  const ClientShard b = shard_with_noise(10, 8);
  const ClientShard c = shard_with_noise(10, 6);
  const std::vector<const ClientShard*> sel = {&a, &b, &c};
  EXPECT_NEAR(*avg_selected_noise_ratio(sel), 1.9 / 3.0, 1e-15);
  EXPECT_NEAR(*avg_selected_noise_ratio(sel), 0.6333, 1e-4);
}

TEST(NoiseRatio, CleanClientsAndEmptySelection) {
  const ClientShard a = shard_with_noise(10, 0);
  const std::vector<const ClientShard*> sel = {&a, &a};
  EXPECT_EQ(*avg_selected_noise_ratio(sel), 0.0);
  EXPECT_FALSE(avg_selected_noise_ratio({}).has_value());
}

TEST(NoiseRatio, HighSymmetricGroupsAverageTo065) {
  std::vector<ClientShard> shards;
  const std::size_t noisy[] = {50, 60, 70, 80};
  for (int k = 0; k < 20; ++k) shards.push_back(shard_with_noise(100, noisy[k % 4]));
  std::vector<const ClientShard*> sel;
  for (const auto& s : shards) sel.push_back(&s);
  EXPECT_NEAR(*avg_selected_noise_ratio(sel), 0.65, 1e-15);
}

TEST(PrecisionRecall, Counting) {
  // Samples 0..1 are noisy, 2..9 clean.
  const ClientShard s = shard_with_noise(10, 2);
  const std::vector<std::vector<std::size_t>> sets = {{0, 2, 3, 4}};
  const std::vector<LabeledSelection> sel = {{&s, sets}};
  const auto pr = label_precision_recall(sel);
  EXPECT_DOUBLE_EQ(*pr.precision, 0.75);
  EXPECT_DOUBLE_EQ(*pr.recall, 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(*pooled_precision(sel), 0.75);
}

TEST(PrecisionRecall, ExactCleanSelection) {
  const ClientShard s = shard_with_noise(6, 2);
  const std::vector<std::vector<std::size_t>> sets = {{2, 3, 4, 5}};
  const std::vector<LabeledSelection> sel = {{&s, sets}};
  const auto pr = label_precision_recall(sel);
  EXPECT_EQ(*pr.precision, 1.0);
  EXPECT_EQ(*pr.recall, 1.0);
}

TEST(PrecisionRecall, PooledOverClientsAndEpochs) {
  const ClientShard a = shard_with_noise(4, 2);  // clean: 2, 3
  const ClientShard b = shard_with_noise(4, 0);  // all clean
  const std::vector<std::vector<std::size_t>> sa = {{0, 2}, {2, 3}};
  const std::vector<std::vector<std::size_t>> sb = {{0, 1, 2, 3}};
  const std::vector<LabeledSelection> sel = {{&a, sa}, {&b, sb}};
  const auto pr = label_precision_recall(sel);
  EXPECT_DOUBLE_EQ(*pr.precision, 7.0 / 8.0);
  EXPECT_DOUBLE_EQ(*pr.recall, 7.0 / 8.0);
}

TEST(PrecisionRecall, MissingWhenDenominatorIsZero) {
  const ClientShard s = shard_with_noise(3, 3);
  const std::vector<std::vector<std::size_t>> sets = {{0}};
  const std::vector<LabeledSelection> sel = {{&s, sets}};
  const auto pr = label_precision_recall(sel);
  EXPECT_EQ(*pr.precision, 0.0);
  EXPECT_FALSE(pr.recall.has_value());
  EXPECT_FALSE(label_precision_recall({}).precision.has_value());
}

std::vector<RoundRecord> sample_records() {
  RoundRecord a;
  a.round = 1;
  a.selected = {2, 7, 11};
  a.epochs = 20;
  a.test_accuracy = 0.1 + 0.2;
  a.avg_selected_noise_ratio = 0.6333333333333333;
  a.label_precision = 1.0 / 3.0;
  a.label_recall = std::nullopt;
  a.cumulative_batches = 1234;
  a.pseudo_label_acceptance_rate = 0.5;
  RoundRecord b;
  b.round = 2;
  b.epochs = 19;
  b.test_accuracy = 1e-300;
  b.cumulative_batches = 5000000000ull;
  b.wall_ms = 12.25;
  return {a, b};
}

TEST(Csv, HeaderOnlyForZeroRounds) {
  std::ostringstream out;
  write_csv(out, {});
  EXPECT_EQ(out.str(), std::string(kRunLogHeader) + "\n");
  std::istringstream in(out.str());
  EXPECT_TRUE(parse_csv(in).empty());
}

TEST(Csv, RoundTripsExactly) {
  const auto records = sample_records();
  std::ostringstream out;
  write_csv(out, records);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_csv(in), records);
}

TEST(Csv, MissingValuesAreEmptyFields) {
  std::ostringstream out;
  write_csv(out, sample_records());
  const std::string text = out.str();
  EXPECT_EQ(text.find("nan"), std::string::npos);
  EXPECT_EQ(text.find("NaN"), std::string::npos);
  std::istringstream lines(text);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(first, "1,2;7;11,20,0.30000000000000004,0.6333333333333333,"
                   "0.3333333333333333,,1234,0.5,");
  EXPECT_EQ(second, "2,,19,1e-300,,,,5000000000,,12.25");
}

TEST(Csv, RejectsMalformedLines) {
  std::istringstream bad_header("round,selected\n");
  EXPECT_THROW(parse_csv(bad_header), ParseError);
  std::istringstream short_row(std::string(kRunLogHeader) + "\n1,2,3\n");
  try {
    parse_csv(short_row);
    FAIL() << "short row accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream bad_number(std::string(kRunLogHeader) +
                                "\n1,,3,abc,,,,0,,\n");
  EXPECT_THROW(parse_csv(bad_number), ParseError);
}

TEST(RunLog, WritesCsvAndMetadataSidecar) {
  testing::TempDir dir("log");
  const auto path = dir.path() / "run.csv";
  const auto records = sample_records();
  write_run_log(records, path, {{"meta.seed", "3"}, {"config.rounds", "2"}});
  EXPECT_EQ(read_run_log(path), records);
  std::ifstream meta(metadata_path(path));
  std::stringstream text;
  text << meta.rdbuf();
  EXPECT_EQ(text.str(), "meta.seed=3\nconfig.rounds=2\n");
  EXPECT_EQ(metadata_path(path).filename(), "run.csv.meta");
  EXPECT_THROW(read_run_log(dir.path() / "missing.csv"), IoError);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(3.0), "3");
  const double third = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_number(third)), third);
  EXPECT_FALSE(build_describe().empty());
}

}  // namespace
}  // namespace fednoil
