#include "fednoil/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <utility>

#include "fednoil/errors.hpp"

namespace fednoil {
namespace {

const std::vector<std::string_view> kKeys = {
    "data.source",
    "data.classes",
    "data.dim",
    "data.samples_per_class",
    "data.test_samples_per_class",
    "data.spread",
    "data.train_images",
    "data.train_labels",
    "data.test_images",
    "data.test_labels",
    "partition.mode",
    "partition.beta",
    "partition.clients",
    "partition.samples_per_client",
    "noise.flavor",
    "noise.mode",
    "noise.group_ratios",
    "noise.client_ratios",
    "model.hidden",
    "model.activation",
    "model.output_init",
    "optim.lr",
    "optim.momentum",
    "optim.weight_decay",
    "optim.batch_size",
    "sampling.temperature",
    "sampling.clean_fraction",
    "sampling.client_fraction",
    "sampling.clients",
    "sampling.data",
    "ssl.threshold",
    "ssl.lambda_u",
    "ssl.weak_std",
    "ssl.strong_std",
    "ssl.strong_mask",
    "ssl.weak_views",
    "schedule.kind",
    "schedule.t_max",
    "schedule.t_min",
    "schedule.r_min",
    "schedule.psi1",
    "schedule.psi2",
    "schedule.epochs",
    "schedule.match",
    "rounds",
    "method",
    "seed",
    "trials",
    "threads",
    "checkpoint.interval",
    "log.wall_time",
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

struct Value {
  std::string text;
  std::string origin;  // "line N" or "--set #N"
};

// Typed access to the raw key/value map with error messages that carry the
// key and where it came from.
class Reader {
 public:
  explicit Reader(std::map<std::string, Value> values)
      : values_(std::move(values)) {}

  bool has(std::string_view key) const {
    return values_.count(std::string(key)) > 0;
  }

  std::string_view raw(std::string_view key) const {
    return values_.at(std::string(key)).text;
  }

  [[noreturn]] void fail(std::string_view key, const std::string& why) const {
    const auto it = values_.find(std::string(key));
    const std::string where =
        it == values_.end() ? std::string("default") : it->second.origin;
    throw ConfigError(where + ": " + std::string(key) + ": " + why);
  }

  std::string string(std::string_view key, std::string fallback) const {
    return has(key) ? std::string(raw(key)) : std::move(fallback);
  }

  double real(std::string_view key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_real(key, raw(key));
  }

  template <typename Int>
  Int integer(std::string_view key, Int fallback) const {
    if (!has(key)) return fallback;
    const std::string_view text = raw(key);
    Int value{};
    const auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail(key, "expected an integer, got '" + std::string(text) + "'");
    }
    return value;
  }

  bool boolean(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string_view text = raw(key);
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    fail(key, "expected true or false, got '" + std::string(text) + "'");
  }

  std::vector<double> reals(std::string_view key,
                            std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    const std::string_view text = raw(key);
    if (text.empty() || text == "none") return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = text.find(',', pos);
      const auto item = trim(text.substr(
          pos, comma == std::string_view::npos ? std::string_view::npos
                                               : comma - pos));
      out.push_back(parse_real(key, item));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return out;
  }

  template <typename Enum, std::size_t N>
  Enum choice(std::string_view key, Enum fallback,
              const std::pair<std::string_view, Enum> (&options)[N]) const {
    if (!has(key)) return fallback;
    const std::string_view text = raw(key);
    std::string names;
    for (const auto& [name, value] : options) {
      if (name == text) return value;
      names += names.empty() ? "" : ", ";
      names += name;
    }
    fail(key, "expected one of {" + names + "}, got '" + std::string(text) +
                  "'");
  }

 private:
  double parse_real(std::string_view key, std::string_view text) const {
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      fail(key, "expected a number, got '" + std::string(text) + "'");
    }
    return value;
  }

  std::map<std::string, Value> values_;
};

constexpr std::pair<std::string_view, DataSource> kSources[] = {
    {"synthetic", DataSource::kSynthetic}, {"idx", DataSource::kIdx}};
constexpr std::pair<std::string_view, PartitionMode> kPartitionModes[] = {
    {"iid", PartitionMode::kIid},
    {"dirichlet_label", PartitionMode::kDirichletLabel},
    {"dirichlet_size", PartitionMode::kDirichletSize}};
constexpr std::pair<std::string_view, NoiseFlavor> kFlavors[] = {
    {"symmetric", NoiseFlavor::kSymmetric}, {"pair", NoiseFlavor::kPair}};
constexpr std::pair<std::string_view, NoiseMode> kNoiseModes[] = {
    {"high", NoiseMode::kHigh},
    {"low", NoiseMode::kLow},
    {"custom", NoiseMode::kCustom}};
constexpr std::pair<std::string_view, Activation> kActivations[] = {
    {"tanh", Activation::kTanh}, {"relu", Activation::kRelu}};
constexpr std::pair<std::string_view, Selection> kSelections[] = {
    {"confidence", Selection::kConfidence}, {"uniform", Selection::kUniform}};
constexpr std::pair<std::string_view, OutputInit> kOutputInits[] = {
    {"uniform", OutputInit::kUniform}, {"zero", OutputInit::kZero}};
constexpr std::pair<std::string_view, ScheduleKind> kScheduleKinds[] = {
    {"cosine", ScheduleKind::kCosine},
    {"logarithm", ScheduleKind::kLogarithm},
    {"constant", ScheduleKind::kConstant}};
constexpr std::pair<std::string_view, int> kMatches[] = {
    {"none", -1},
    {"cosine", static_cast<int>(ScheduleKind::kCosine)},
    {"logarithm", static_cast<int>(ScheduleKind::kLogarithm)}};
constexpr std::pair<std::string_view, Method> kMethods[] = {
    {"fednoil", Method::kFedNoiL},
    {"fedavg", Method::kVanillaFedAvg},
    {"uniform_client", Method::kUniformClientSampling},
    {"uniform_data", Method::kUniformLocalDataSampling},
    {"no_ssl", Method::kNoSsl}};

void collect(std::map<std::string, Value>& values, std::string_view line,
             const std::string& origin) {
  if (const auto hash = line.find('#'); hash != std::string_view::npos) {
    line = line.substr(0, hash);
  }
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(origin + ": expected key=value, got '" +
                      std::string(line) + "'");
  }
  const std::string key(trim(line.substr(0, eq)));
  bool known = false;
  for (std::string_view k : kKeys) known = known || k == key;
  if (!known) throw ConfigError(origin + ": unknown key '" + key + "'");
  values[key] = Value{std::string(trim(line.substr(eq + 1))), origin};
}

ExperimentConfig build(const Reader& in) {
  ExperimentConfig c;

  c.data.source = in.choice("data.source", c.data.source, kSources);
  c.data.synthetic.num_classes =
      in.integer<int>("data.classes", c.data.synthetic.num_classes);
  c.data.synthetic.dim = in.integer<std::size_t>("data.dim", c.data.synthetic.dim);
  c.data.synthetic.samples_per_class = in.integer<std::size_t>(
      "data.samples_per_class", c.data.synthetic.samples_per_class);
  c.data.test_samples_per_class = in.integer<std::size_t>(
      "data.test_samples_per_class", c.data.test_samples_per_class);
  c.data.synthetic.cluster_spread =
      in.real("data.spread", c.data.synthetic.cluster_spread);
  c.data.train_images = in.string("data.train_images", "");
  c.data.train_labels = in.string("data.train_labels", "");
  c.data.test_images = in.string("data.test_images", "");
  c.data.test_labels = in.string("data.test_labels", "");
  if (c.data.synthetic.num_classes < 2) {
    in.fail("data.classes", "need at least 2 classes");
  }
  if (c.data.synthetic.dim < 2) in.fail("data.dim", "must be at least 2");
  if (!(c.data.synthetic.cluster_spread >= 0.0)) {
    in.fail("data.spread", "must be non-negative");
  }

  c.partition.mode = in.choice("partition.mode", c.partition.mode,
                               kPartitionModes);
  c.partition.beta = in.real("partition.beta", c.partition.beta);
  c.partition.num_clients =
      in.integer<int>("partition.clients", c.partition.num_clients);
  if (in.has("partition.samples_per_client") &&
      in.raw("partition.samples_per_client") != "auto") {
    c.partition.samples_per_client =
        in.integer<std::size_t>("partition.samples_per_client", 0);
    if (*c.partition.samples_per_client == 0) {
      in.fail("partition.samples_per_client", "must be positive or auto");
    }
  }
  if (!(c.partition.beta > 0.0)) in.fail("partition.beta", "must be positive");
  if (c.partition.num_clients < 1) {
    in.fail("partition.clients", "must be at least 1");
  }

  c.noise.flavor = in.choice("noise.flavor", c.noise.flavor, kFlavors);
  c.noise.mode = in.choice("noise.mode", c.noise.mode, kNoiseModes);
  c.noise.group_ratios = in.reals(
      "noise.group_ratios",
      NoiseSpec::default_group_ratios(c.noise.flavor, c.noise.mode));
  c.noise.custom_ratios = in.reals("noise.client_ratios", {});
  for (double r : c.noise.group_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) in.fail("noise.group_ratios", "ratios must lie in [0, 1]");
  }
  for (double r : c.noise.custom_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) in.fail("noise.client_ratios", "ratios must lie in [0, 1]");
  }
  if (!c.noise.custom_ratios.empty() &&
      c.noise.custom_ratios.size() !=
          static_cast<std::size_t>(c.partition.num_clients)) {
    in.fail("noise.client_ratios", "needs one ratio per client");
  }
  if (c.noise.mode == NoiseMode::kCustom && c.noise.group_ratios.empty() &&
      c.noise.custom_ratios.empty()) {
    in.fail("noise.mode", "custom mode needs noise.group_ratios or noise.client_ratios");
  }

  c.model.hidden = in.integer<std::size_t>("model.hidden", c.model.hidden);
  c.model.activation =
      in.choice("model.activation", c.model.activation, kActivations);
  c.model.output_init =
      in.choice("model.output_init", c.model.output_init, kOutputInits);

  c.optimizer.learning_rate = in.real("optim.lr", c.optimizer.learning_rate);
  c.optimizer.momentum = in.real("optim.momentum", c.optimizer.momentum);
  c.optimizer.weight_decay =
      in.real("optim.weight_decay", c.optimizer.weight_decay);
  c.optimizer.batch_size =
      in.integer<std::size_t>("optim.batch_size", c.optimizer.batch_size);
  if (!(c.optimizer.learning_rate >= 0.0)) in.fail("optim.lr", "must be non-negative");
  if (!(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0)) {
    in.fail("optim.momentum", "must lie in [0, 1)");
  }
  if (!(c.optimizer.weight_decay >= 0.0)) {
    in.fail("optim.weight_decay", "must be non-negative");
  }
  if (c.optimizer.batch_size == 0) in.fail("optim.batch_size", "must be positive");

  c.sampling.temperature =
      in.real("sampling.temperature", c.sampling.temperature);
  const double default_clean = c.noise.mode == NoiseMode::kLow ? 0.55 : 0.35;
  c.sampling.clean_fraction =
      in.has("sampling.clean_fraction") &&
              in.raw("sampling.clean_fraction") != "auto"
          ? in.real("sampling.clean_fraction", default_clean)
          : default_clean;
  c.sampling.client_fraction =
      in.real("sampling.client_fraction", c.sampling.client_fraction);
  c.sampling.clients = in.choice("sampling.clients", c.sampling.clients, kSelections);
  c.sampling.data = in.choice("sampling.data", c.sampling.data, kSelections);
  if (!(c.sampling.temperature > 0.0)) {
    in.fail("sampling.temperature", "must be positive");
  }
  if (!(c.sampling.clean_fraction > 0.0 && c.sampling.clean_fraction <= 1.0)) {
    in.fail("sampling.clean_fraction", "must lie in (0, 1]");
  }
  if (!(c.sampling.client_fraction > 0.0 && c.sampling.client_fraction <= 1.0)) {
    in.fail("sampling.client_fraction", "must lie in (0, 1]");
  }

  c.ssl.threshold = in.real("ssl.threshold", c.ssl.threshold);
  c.ssl.lambda_u = in.real("ssl.lambda_u", c.ssl.lambda_u);
  c.ssl.weak_noise_std = in.real("ssl.weak_std", c.ssl.weak_noise_std);
  c.ssl.strong_noise_std = in.real("ssl.strong_std", c.ssl.strong_noise_std);
  c.ssl.strong_mask_fraction =
      in.real("ssl.strong_mask", c.ssl.strong_mask_fraction);
  c.ssl.weak_views = in.integer<int>("ssl.weak_views", c.ssl.weak_views);
  if (!(c.ssl.threshold > 0.0 && c.ssl.threshold <= 1.0)) {
    in.fail("ssl.threshold", "must lie in (0, 1]");
  }
  if (!(c.ssl.lambda_u >= 0.0)) in.fail("ssl.lambda_u", "must be non-negative");
  if (!(c.ssl.weak_noise_std >= 0.0)) in.fail("ssl.weak_std", "must be non-negative");
  if (!(c.ssl.strong_noise_std >= c.ssl.weak_noise_std)) {
    in.fail("ssl.strong_std", "must be at least ssl.weak_std");
  }
  if (!(c.ssl.strong_mask_fraction >= 0.0 && c.ssl.strong_mask_fraction < 1.0)) {
    in.fail("ssl.strong_mask", "must lie in [0, 1)");
  }
  if (c.ssl.weak_views < 1) in.fail("ssl.weak_views", "must be at least 1");

  c.rounds = in.integer<int>("rounds", c.rounds);
  if (c.rounds < 0) in.fail("rounds", "must be non-negative");

  ScheduleSpec& s = c.schedule;
  s.kind = in.choice("schedule.kind", s.kind, kScheduleKinds);
  s.t_max = in.integer<int>("schedule.t_max", s.t_max);
  s.t_min = in.integer<int>("schedule.t_min", s.t_min);
  s.r_min = in.integer<int>("schedule.r_min", s.r_min);
  s.rounds = c.rounds;
  s.constant_epochs = in.integer<int>("schedule.epochs", s.constant_epochs);
  const int match = in.choice("schedule.match", -1, kMatches);
  if (!(1 <= s.t_min && s.t_min <= s.t_max)) {
    in.fail("schedule.t_min", "need 1 <= t_min <= t_max");
  }
  if (match >= 0) {
    if (s.kind != ScheduleKind::kConstant) {
      in.fail("schedule.match", "only applies to constant schedules");
    }
    c.schedule_match = static_cast<ScheduleKind>(match);
  }
  const bool needs_cosine = s.kind == ScheduleKind::kCosine ||
                            c.schedule_match == ScheduleKind::kCosine;
  const bool needs_log = s.kind == ScheduleKind::kLogarithm ||
                         c.schedule_match == ScheduleKind::kLogarithm;
  const auto psi = [&](std::string_view key, bool needed, auto solve) {
    if (in.has(key) && in.raw(key) != "auto") {
      return in.real(key, 0.0);
    }
    if (!needed) return 0.0;
    try {
      return solve();
    } catch (const DomainError& e) {
      in.fail("schedule.r_min", e.what());
    }
  };
  s.psi1 = psi("schedule.psi1", needs_cosine,
               [&] { return solve_psi1(s.r_min, c.rounds); });
  s.psi2 = psi("schedule.psi2", needs_log,
               [&] { return solve_psi2(s.r_min, s.t_max, s.t_min); });
  if (needs_cosine && !(s.psi1 > 0.0)) in.fail("schedule.psi1", "must be positive");
  if (needs_log && !(s.psi2 > 1.0)) in.fail("schedule.psi2", "must exceed 1");
  if (c.schedule_match) {
    ScheduleSpec reference = s;
    reference.kind = *c.schedule_match;
    if (c.rounds < 1) in.fail("schedule.match", "needs at least one round");
    s.constant_epochs = budget_matched_constant(reference);
  }
  if (s.constant_epochs < 1) in.fail("schedule.epochs", "must be at least 1");

  c.method = in.choice("method", c.method, kMethods);
  c.seed = in.integer<std::uint64_t>("seed", c.seed);
  c.trials = in.integer<int>("trials", c.trials);
  c.threads = in.integer<int>("threads", c.threads);
  c.checkpoint_interval =
      in.integer<int>("checkpoint.interval", c.checkpoint_interval);
  c.record_wall_time = in.boolean("log.wall_time", c.record_wall_time);
  if (c.trials < 1) in.fail("trials", "must be at least 1");
  if (c.threads < 1) in.fail("threads", "must be at least 1");
  if (c.checkpoint_interval < 0) {
    in.fail("checkpoint.interval", "must be non-negative");
  }
  if (c.data.source == DataSource::kIdx) {
    for (std::string_view key : {"data.train_images", "data.train_labels",
                                 "data.test_images", "data.test_labels"}) {
      if (in.string(key, "").empty()) in.fail(key, "required for idx data");
    }
  }

  c.validate();
  return c;
}

std::string join(const std::vector<double>& values) {
  if (values.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value,
                         const std::pair<std::string_view, Enum> (&options)[N]) {
  for (const auto& [name, v] : options) {
    if (v == value) return name;
  }
  return "?";
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

const std::vector<std::string_view>& config_keys() { return kKeys; }

ExperimentConfig parse_config(std::string_view text,
                              const std::vector<std::string>& overrides) {
  std::map<std::string, Value> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    collect(values, line, "line " + std::to_string(line_no));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    collect(values, overrides[i], "--set #" + std::to_string(i + 1));
  }
  return build(Reader(std::move(values)));
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto put = [&](std::string_view key, const auto& value) {
    out << key << '=' << value << '\n';
  };
  put("data.source", name_of(c.data.source, kSources));
  put("data.classes", c.data.synthetic.num_classes);
  put("data.dim", c.data.synthetic.dim);
  put("data.samples_per_class", c.data.synthetic.samples_per_class);
  put("data.test_samples_per_class", c.data.test_samples_per_class);
  put("data.spread", format_real(c.data.synthetic.cluster_spread));
  put("data.train_images", c.data.train_images);
  put("data.train_labels", c.data.train_labels);
  put("data.test_images", c.data.test_images);
  put("data.test_labels", c.data.test_labels);
  put("partition.mode", name_of(c.partition.mode, kPartitionModes));
  put("partition.beta", format_real(c.partition.beta));
  put("partition.clients", c.partition.num_clients);
  put("partition.samples_per_client",
      c.partition.samples_per_client
          ? std::to_string(*c.partition.samples_per_client)
          : std::string("auto"));
  put("noise.flavor", name_of(c.noise.flavor, kFlavors));
  put("noise.mode", name_of(c.noise.mode, kNoiseModes));
  put("noise.group_ratios", join(c.noise.group_ratios));
  put("noise.client_ratios", join(c.noise.custom_ratios));
  put("model.hidden", c.model.hidden);
  put("model.activation", name_of(c.model.activation, kActivations));
  put("model.output_init", name_of(c.model.output_init, kOutputInits));
  put("optim.lr", format_real(c.optimizer.learning_rate));
  put("optim.momentum", format_real(c.optimizer.momentum));
  put("optim.weight_decay", format_real(c.optimizer.weight_decay));
  put("optim.batch_size", c.optimizer.batch_size);
  put("sampling.temperature", format_real(c.sampling.temperature));
  put("sampling.clean_fraction", format_real(c.sampling.clean_fraction));
  put("sampling.client_fraction", format_real(c.sampling.client_fraction));
  put("sampling.clients", name_of(c.sampling.clients, kSelections));
  put("sampling.data", name_of(c.sampling.data, kSelections));
  put("ssl.threshold", format_real(c.ssl.threshold));
  put("ssl.lambda_u", format_real(c.ssl.lambda_u));
  put("ssl.weak_std", format_real(c.ssl.weak_noise_std));
  put("ssl.strong_std", format_real(c.ssl.strong_noise_std));
  put("ssl.strong_mask", format_real(c.ssl.strong_mask_fraction));
  put("ssl.weak_views", c.ssl.weak_views);
  put("schedule.kind", name_of(c.schedule.kind, kScheduleKinds));
  put("schedule.t_max", c.schedule.t_max);
  put("schedule.t_min", c.schedule.t_min);
  put("schedule.r_min", c.schedule.r_min);
  put("schedule.psi1",
      c.schedule.psi1 > 0.0 ? format_real(c.schedule.psi1) : "auto");
  put("schedule.psi2",
      c.schedule.psi2 > 0.0 ? format_real(c.schedule.psi2) : "auto");
  put("schedule.epochs", c.schedule.constant_epochs);
  put("schedule.match",
      c.schedule_match ? name_of(static_cast<int>(*c.schedule_match), kMatches)
                       : std::string_view("none"));
  put("rounds", c.rounds);
  put("method", name_of(c.method, kMethods));
  put("seed", c.seed);
  put("trials", c.trials);
  put("threads", c.threads);
  put("checkpoint.interval", c.checkpoint_interval);
  put("log.wall_time", c.record_wall_time ? "true" : "false");
  return out.str();
}

}  // namespace fednoil
