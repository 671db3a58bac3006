#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zzd/embedding.hpp"
#include "zzd/model.hpp"
#include "zzd/optim.hpp"

namespace zzd {

enum class ScheduleKind { none, zigzag };

std::string_view to_string(ScheduleKind kind);
std::optional<ScheduleKind> parse_schedule_kind(std::string_view text);

struct TrainConfig {
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  SgdConfig sgd;
  ScheduleKind schedule = ScheduleKind::zigzag;  // none keeps sgd.lr constant
  SchedulerConfig scheduler;
  NetConfig model;
  std::optional<int> early_stop_patience;
  std::optional<std::filesystem::path> checkpoint_dir;  // best.zzck on improvement, last.zzck at the end

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // rate used during this epoch

  bool operator==(const EpochRecord&) const = default;
};

struct FitResult {
  Parameters<float> params;  // weights of the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  std::optional<SchedulerState> scheduler;
};

/// Labeled model input assembled from embedding records.
struct LabeledBatch {
  Mat<float> inputs;  // 512 x N scaled pixels
  std::vector<Label> labels;
};

/// Scales every record to pixels. Throws DataError naming the first
/// unlabeled record.
LabeledBatch make_labeled_batch(std::span<const EmbeddingRecord> records);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode loss and argmax accuracy (ties count as human).
EvalResult evaluate(const Parameters<float>& params, std::span<const EmbeddingRecord> records, int batch_size = 128);
EvalResult evaluate(const Parameters<float>& params, const LabeledBatch& data, int batch_size = 128);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD with the configured schedule. Each epoch shuffles with
/// derive_seed(seed, epoch), trains on every batch (the last one may be
/// short), evaluates on `val`, then steps the scheduler on validation
/// accuracy. Parameters are initialized from `seed`, so runs sharing an
/// architecture and seed start identical. Single-threaded and bitwise
/// reproducible for a fixed config.
FitResult fit(std::span<const EmbeddingRecord> train, std::span<const EmbeddingRecord> val,
              const TrainConfig& config, const EpochCallback& on_epoch = {});

std::string to_json_line(const EpochRecord& record);
void write_history(std::span<const EpochRecord> history, const std::filesystem::path& path);

}  // namespace zzd
