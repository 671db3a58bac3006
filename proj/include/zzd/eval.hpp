#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "zzd/embedding.hpp"
#include "zzd/model.hpp"
#include "zzd/train.hpp"

namespace zzd {

/// Percentage of records predicted ai (argmax, ties to human). Every record
/// must be labeled ai; pure-AI test sets make the rate a recall.
double detection_rate(const Parameters<float>& params, std::span<const EmbeddingRecord> ai_only_records);

struct NamedModel {
  std::string name;
  std::shared_ptr<const Parameters<float>> params;
};

struct NamedTestSet {
  std::string name;
  std::vector<EmbeddingRecord> records;
};

/// Detection rates of each training source (row) on each test source (column).
struct EvalReport {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Eigen::MatrixXd rates;     // percentages, rows x cols
  Eigen::VectorXd averages;  // arithmetic row means

  double rate(std::string_view row, std::string_view col) const;
};

/// Throws DataError naming any test set without records.
EvalReport cross_matrix(std::span<const NamedModel> models, std::span<const NamedTestSet> testsets);

/// Mean of the models' AI probabilities per record, predicted ai iff the mean
/// exceeds 0.5; returns the resulting detection rate.
double ensemble_rate(std::span<const NamedModel> models, std::span<const EmbeddingRecord> ai_only_records);

/// Appends a row (e.g. "ensemble") computed over every column of `report`.
void append_row(EvalReport& report, std::string name, std::span<const double> rates);

/// Aligned plain-text table.
std::string format_table(const EvalReport& report);

/// Header "train,<test sources...>,average"; rates with two decimals.
std::string to_csv(const EvalReport& report);

struct AblationRun {
  Architecture arch = Architecture::zigzag;
  ScheduleKind schedule = ScheduleKind::zigzag;
  FitResult fit;
};

/// Four rows: vanilla+none, vanilla+zigzag, zigzag+none, zigzag+zigzag.
struct AblationReport {
  EvalReport table;
  std::vector<AblationRun> runs;
};

/// `base` with the architecture and schedule of one ablation cell; the data
/// order, seeds and optimizer settings are shared by all four cells.
TrainConfig ablation_config(const TrainConfig& base, Architecture arch, ScheduleKind schedule);

std::string ablation_row_name(Architecture arch, ScheduleKind schedule);

AblationReport run_ablation(std::span<const EmbeddingRecord> train, std::span<const EmbeddingRecord> val,
                            std::span<const NamedTestSet> testsets, const TrainConfig& base,
                            const EpochCallback& on_epoch = {});

}  // namespace zzd
