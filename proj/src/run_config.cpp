#include "zzd/run_config.hpp"

#include "zzd/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace zzd {

namespace {

constexpr std::string_view kKeys[] = {
    "train.batch_size",      "train.epochs",          "train.seed",        "train.early_stop_patience",
    "train.schedule",        "sgd.lr",                "sgd.momentum",      "sgd.weight_decay",
    "sgd.nesterov",          "scheduler.mode",        "scheduler.up_factor", "scheduler.down_factor",
    "scheduler.up_patience", "scheduler.down_patience", "scheduler.restart_after", "model.arch",
    "model.stem_channels",   "model.block_channels",  "model.downsample_blocks", "model.dropout_rate",
    "model.normalize_input"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "' (expected " +
                    std::string(expected) + ")");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, value, "true or false");
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  std::string_view rest = trim(value);
  if (rest.empty()) return out;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_number<int>(key, rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

}  // namespace

std::vector<std::string_view> known_setting_keys() { return {std::begin(kKeys), std::end(kKeys)}; }

void apply_setting(TrainConfig& c, std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (key == "train.batch_size") c.batch_size = parse_number<int>(key, v);
  else if (key == "train.epochs") c.epochs = parse_number<int>(key, v);
  else if (key == "train.seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "train.early_stop_patience") {
    if (v == "none") c.early_stop_patience.reset();
    else c.early_stop_patience = parse_number<int>(key, v);
  } else if (key == "train.schedule") {
    auto kind = parse_schedule_kind(v);
    if (!kind) bad_value(key, v, "zigzag or none");
    c.schedule = *kind;
  } else if (key == "sgd.lr") c.sgd.lr = parse_number<double>(key, v);
  else if (key == "sgd.momentum") c.sgd.momentum = parse_number<double>(key, v);
  else if (key == "sgd.weight_decay") c.sgd.weight_decay = parse_number<double>(key, v);
  else if (key == "sgd.nesterov") c.sgd.nesterov = parse_bool(key, v);
  else if (key == "scheduler.mode") {
    auto mode = parse_metric_mode(v);
    if (!mode) bad_value(key, v, "max or min");
    c.scheduler.mode = *mode;
  } else if (key == "scheduler.up_factor") c.scheduler.up_factor = parse_number<double>(key, v);
  else if (key == "scheduler.down_factor") c.scheduler.down_factor = parse_number<double>(key, v);
  else if (key == "scheduler.up_patience") c.scheduler.up_patience = parse_number<int>(key, v);
  else if (key == "scheduler.down_patience") c.scheduler.down_patience = parse_number<int>(key, v);
  else if (key == "scheduler.restart_after") c.scheduler.restart_after = parse_number<int>(key, v);
  else if (key == "model.arch") {
    auto arch = parse_architecture(v);
    if (!arch) bad_value(key, v, "zigzag or vanilla");
    NetConfig preset = *arch == Architecture::zigzag ? zigzag_config() : vanilla_config();
    preset.dropout_rate = c.model.dropout_rate;
    preset.normalize_input = c.model.normalize_input;
    c.model = preset;
  } else if (key == "model.stem_channels") c.model.stem_channels = parse_number<int>(key, v);
  else if (key == "model.block_channels") c.model.block_channels = parse_int_list(key, v);
  else if (key == "model.downsample_blocks") c.model.downsample_blocks = parse_int_list(key, v);
  else if (key == "model.dropout_rate") c.model.dropout_rate = parse_number<double>(key, v);
  else if (key == "model.normalize_input") c.model.normalize_input = parse_bool(key, v);
  else throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void apply_settings(TrainConfig& config, const std::vector<Setting>& settings) {
  for (const auto& [k, v] : settings)
    if (k == "model.arch") apply_setting(config, k, v);
  for (const auto& [k, v] : settings)
    if (k != "model.arch") apply_setting(config, k, v);
}

std::vector<Setting> read_settings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::vector<Setting> settings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key=value");
    const std::string key(trim(text.substr(0, eq)));
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ConfigError(where + "unknown configuration key '" + key + "'");
    }
    settings.emplace_back(key, std::string(trim(text.substr(eq + 1))));
  }
  return settings;
}

std::string dump_settings(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "train.batch_size=" << c.batch_size << '\n'
     << "train.epochs=" << c.epochs << '\n'
     << "train.seed=" << c.seed << '\n'
     << "train.early_stop_patience="
     << (c.early_stop_patience ? std::to_string(*c.early_stop_patience) : std::string("none")) << '\n'
     << "train.schedule=" << to_string(c.schedule) << '\n'
     << "sgd.lr=" << c.sgd.lr << '\n'
     << "sgd.momentum=" << c.sgd.momentum << '\n'
     << "sgd.weight_decay=" << c.sgd.weight_decay << '\n'
     << "sgd.nesterov=" << (c.sgd.nesterov ? "true" : "false") << '\n'
     << "scheduler.mode=" << to_string(c.scheduler.mode) << '\n'
     << "scheduler.up_factor=" << c.scheduler.up_factor << '\n'
     << "scheduler.down_factor=" << c.scheduler.down_factor << '\n'
     << "scheduler.up_patience=" << c.scheduler.up_patience << '\n'
     << "scheduler.down_patience=" << c.scheduler.down_patience << '\n'
     << "scheduler.restart_after=" << c.scheduler.restart_after << '\n'
     << "model.arch=" << to_string(c.model.arch) << '\n'
     << "model.stem_channels=" << c.model.stem_channels << '\n'
     << "model.block_channels=" << join(c.model.block_channels) << '\n'
     << "model.downsample_blocks=" << join(c.model.downsample_blocks) << '\n'
     << "model.dropout_rate=" << c.model.dropout_rate << '\n'
     << "model.normalize_input=" << (c.model.normalize_input ? "true" : "false") << '\n';
  return os.str();
}

}  // namespace zzd
