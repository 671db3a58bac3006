#pragma once

#include <filesystem>
#include <optional>

#include "zzd/model.hpp"
#include "zzd/optim.hpp"

namespace zzd {

// "ZZCK" checkpoint, little-endian:
//   "ZZCK" | u16 version | config | u8 has_scheduler [| scheduler state]
//   | u32 tensor count | per tensor: u16 name length | name | u8 rank (2)
//   | u64 rows | u64 cols | rows * cols f32, column-major
// Tensors are the trainable parameters followed by the normalization running
// statistics, in for_each_parameter / for_each_buffer order.
inline constexpr char kCheckpointMagic[4] = {'Z', 'Z', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  Parameters<float> params;
  std::optional<SchedulerState> scheduler;
};

/// Writes atomically (temporary file, then rename).
void save_checkpoint(const Parameters<float>& params, const std::filesystem::path& path,
                     const std::optional<SchedulerState>& scheduler = std::nullopt);

/// Throws FormatError: bad_magic, unsupported_version, truncated, corrupt
/// (invalid embedded config or tensor names) or shape_mismatch (a tensor does
/// not fit the embedded config).
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and throws FormatError(config_mismatch) unless the embedded
/// config equals `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetConfig& expected);

}  // namespace zzd
