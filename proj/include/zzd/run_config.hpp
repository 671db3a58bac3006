#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zzd/train.hpp"

namespace zzd {

// Flat "section.key=value" settings, one per line; '#' starts a comment.
//
//   train.batch_size  train.epochs  train.seed  train.early_stop_patience
//   train.schedule (zigzag|none)
//   sgd.lr  sgd.momentum  sgd.weight_decay  sgd.nesterov
//   scheduler.mode (max|min)  scheduler.up_factor  scheduler.down_factor
//   scheduler.up_patience  scheduler.down_patience  scheduler.restart_after
//   model.arch (zigzag|vanilla)  model.stem_channels  model.block_channels
//   model.downsample_blocks  model.dropout_rate  model.normalize_input
//
// model.arch resets the architecture preset and is applied before every
// other key, wherever it appears.

using Setting = std::pair<std::string, std::string>;

std::vector<std::string_view> known_setting_keys();

/// Throws ConfigError naming the key for unknown keys or unparsable values.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

/// Applies `settings` in order, model.arch first.
void apply_settings(TrainConfig& config, const std::vector<Setting>& settings);

/// Parses a settings file; errors name the file and line.
std::vector<Setting> read_settings_file(const std::filesystem::path& path);

/// Canonical settings text for `config`; read back it reproduces the config.
std::string dump_settings(const TrainConfig& config);

}  // namespace zzd
