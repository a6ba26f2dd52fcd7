#include "fednoil/telemetry.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fednoil/errors.hpp"

#ifndef FEDNOIL_GIT_DESCRIBE
#define FEDNOIL_GIT_DESCRIBE "unknown"
#endif

namespace fednoil {

std::optional<double> avg_selected_noise_ratio(
    std::span<const ClientShard* const> selected) {
  if (selected.empty()) return std::nullopt;
  double sum = 0.0;
  for (const ClientShard* shard : selected) sum += shard->realized_noise_ratio();
  return sum / static_cast<double>(selected.size());
}

namespace {

struct Counts {
  std::size_t picked = 0;
  std::size_t picked_clean = 0;
  std::size_t available_clean = 0;
};

Counts count(std::span<const LabeledSelection> sel) {
  Counts c;
  for (const LabeledSelection& s : sel) {
    const std::size_t clean = s.shard->clean_count();
    for (const auto& set : s.labeled_sets) {
      c.picked += set.size();
      for (std::size_t i : set) c.picked_clean += s.shard->is_clean(i) ? 1 : 0;
      c.available_clean += clean;
    }
  }
  return c;
}

}  // namespace

std::optional<double> pooled_precision(std::span<const LabeledSelection> sel) {
  return label_precision_recall(sel).precision;
}

PrecisionRecall label_precision_recall(std::span<const LabeledSelection> sel) {
  const Counts c = count(sel);
  PrecisionRecall out;
  if (c.picked > 0) {
    out.precision = static_cast<double>(c.picked_clean) / c.picked;
  }
  if (c.available_clean > 0) {
    out.recall = static_cast<double>(c.picked_clean) / c.available_clean;
  }
  return out;
}

std::string format_number(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

namespace {

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string current;
  for (char ch : line) {
    if (ch == sep) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

template <typename T>
T parse_integer(const std::string& text, std::size_t line, const char* field) {
  T value{};
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("run log line " + std::to_string(line) + ": bad " +
                     field + " '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& text, std::size_t line,
                  const char* field) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw ParseError("run log line " + std::to_string(line) + ": bad " +
                     field + " '" + text + "'");
  }
  return value;
}

std::optional<double> parse_optional(const std::string& text, std::size_t line,
                                     const char* field) {
  if (text.empty()) return std::nullopt;
  return parse_real(text, line, field);
}

}  // namespace

void write_csv(std::ostream& out, std::span<const RoundRecord> records) {
  out << kRunLogHeader << '\n';
  for (const RoundRecord& r : records) {
    out << r.round << ',';
    for (std::size_t i = 0; i < r.selected.size(); ++i) {
      if (i > 0) out << ';';
      out << r.selected[i];
    }
    out << ',' << r.epochs << ',' << format_number(r.test_accuracy) << ','
        << format_optional(r.avg_selected_noise_ratio) << ','
        << format_optional(r.label_precision) << ','
        << format_optional(r.label_recall) << ',' << r.cumulative_batches
        << ',' << format_optional(r.pseudo_label_acceptance_rate) << ','
        << format_optional(r.wall_ms) << '\n';
  }
}

std::vector<RoundRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRunLogHeader) {
    throw ParseError("run log line 1: unexpected header");
  }
  std::vector<RoundRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) {
      throw ParseError("run log line " + std::to_string(line_no) +
                       ": expected 10 fields, found " +
                       std::to_string(f.size()));
    }
    RoundRecord r;
    r.round = parse_integer<int>(f[0], line_no, "round");
    if (!f[1].empty()) {
      for (const auto& id : split(f[1], ';')) {
        r.selected.push_back(parse_integer<ClientId>(id, line_no, "client id"));
      }
    }
    r.epochs = parse_integer<int>(f[2], line_no, "epochs");
    r.test_accuracy = parse_real(f[3], line_no, "accuracy");
    r.avg_selected_noise_ratio = parse_optional(f[4], line_no, "noise_ratio");
    r.label_precision = parse_optional(f[5], line_no, "precision");
    r.label_recall = parse_optional(f[6], line_no, "recall");
    r.cumulative_batches =
        parse_integer<std::uint64_t>(f[7], line_no, "cum_batches");
    r.pseudo_label_acceptance_rate = parse_optional(f[8], line_no, "pl_accept");
    r.wall_ms = parse_optional(f[9], line_no, "wall_ms");
    records.push_back(std::move(r));
  }
  return records;
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  std::filesystem::path meta = csv_path;
  meta += ".meta";
  return meta;
}

void write_run_log(std::span<const RoundRecord> records,
                   const std::filesystem::path& path,
                   const Metadata& metadata) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_csv(out, records);
    if (!out) throw IoError("failed writing " + path.string());
  }
  const auto meta = metadata_path(path);
  std::ofstream out(meta, std::ios::binary);
  if (!out) throw IoError("cannot open " + meta.string() + " for writing");
  for (const auto& [key, value] : metadata) out << key << '=' << value << '\n';
  if (!out) throw IoError("failed writing " + meta.string());
}

std::vector<RoundRecord> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string_view build_describe() { return FEDNOIL_GIT_DESCRIBE; }

}  // namespace fednoil
