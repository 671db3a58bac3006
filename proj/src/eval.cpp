#include "zzd/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "zzd/infer.hpp"

namespace zzd {

namespace {

void require_ai_only(std::span<const EmbeddingRecord> records) {
  if (records.empty()) throw DataError("detection rate needs at least one record");
  for (const auto& r : records) {
    if (r.label != Label::ai) {
      throw DataError("test record '" + r.chunk_id + "' is not labeled ai; test sets must be pure AI");
    }
  }
}

}  // namespace

double detection_rate(const Parameters<float>& params, std::span<const EmbeddingRecord> ai_only_records) {
  require_ai_only(ai_only_records);
  const Mat<float> logits = batched_logits(params, inputs_from_records(ai_only_records), 128);
  std::size_t detected = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    if (predicted_label(logit_pair(logits, j)) == Label::ai) ++detected;
  }
  return 100.0 * static_cast<double>(detected) / static_cast<double>(ai_only_records.size());
}

double EvalReport::rate(std::string_view row, std::string_view col) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(cols.begin(), cols.end(), col);
  if (r == rows.end() || c == cols.end()) {
    throw DataError("no cell (" + std::string(row) + ", " + std::string(col) + ") in report");
  }
  return rates(r - rows.begin(), c - cols.begin());
}

EvalReport cross_matrix(std::span<const NamedModel> models, std::span<const NamedTestSet> testsets) {
  if (models.empty()) throw DataError("cross_matrix needs at least one model");
  if (testsets.empty()) throw DataError("cross_matrix needs at least one test set");
  for (const auto& t : testsets) {
    if (t.records.empty()) throw DataError("test set '" + t.name + "' has no embeddings");
  }
  EvalReport report;
  report.rates.resize(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(testsets.size()));
  for (const auto& t : testsets) report.cols.push_back(t.name);
  for (std::size_t i = 0; i < models.size(); ++i) {
    report.rows.push_back(models[i].name);
    for (std::size_t j = 0; j < testsets.size(); ++j) {
      try {
        report.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            detection_rate(*models[i].params, testsets[j].records);
      } catch (const DataError& e) {
        throw DataError("test set '" + testsets[j].name + "': " + e.what());
      }
    }
  }
  report.averages = report.rates.rowwise().mean();
  return report;
}

double ensemble_rate(std::span<const NamedModel> models, std::span<const EmbeddingRecord> ai_only_records) {
  if (models.empty()) throw DataError("ensemble needs at least one model");
  require_ai_only(ai_only_records);
  const Mat<float> inputs = inputs_from_records(ai_only_records);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(inputs.cols());
  for (const auto& m : models) {
    const Mat<float> logits = batched_logits(*m.params, inputs, 128);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) mean[j] += ai_probability(logit_pair(logits, j));
  }
  mean /= static_cast<double>(models.size());
  const auto detected = (mean.array() > 0.5).count();
  return 100.0 * static_cast<double>(detected) / static_cast<double>(ai_only_records.size());
}

void append_row(EvalReport& report, std::string name, std::span<const double> rates) {
  if (rates.size() != report.cols.size()) throw DataError("row '" + name + "' has the wrong number of cells");
  const Eigen::Index r = report.rates.rows();
  report.rates.conservativeResize(r + 1, report.rates.cols());
  for (std::size_t j = 0; j < rates.size(); ++j) report.rates(r, static_cast<Eigen::Index>(j)) = rates[j];
  report.rows.push_back(std::move(name));
  report.averages = report.rates.rowwise().mean();
}

std::string format_table(const EvalReport& report) {
  std::size_t first = std::string("Train/Test").size();
  for (const auto& r : report.rows) first = std::max(first, r.size());
  std::vector<std::size_t> width;
  for (const auto& c : report.cols) width.push_back(std::max<std::size_t>(c.size(), 6));
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(first)) << "Train/Test";
  for (std::size_t j = 0; j < report.cols.size(); ++j) os << "  " << std::right << std::setw(static_cast<int>(width[j])) << report.cols[j];
  os << "  " << std::setw(7) << "Average" << '\n';
  os << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    os << std::left << std::setw(static_cast<int>(first)) << report.rows[i] << std::right;
    for (std::size_t j = 0; j < report.cols.size(); ++j)
      os << "  " << std::setw(static_cast<int>(width[j])) << report.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    os << "  " << std::setw(7) << report.averages[static_cast<Eigen::Index>(i)] << '\n';
  }
  return os.str();
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "train";
  for (const auto& c : report.cols) os << ',' << c;
  os << ",average\n" << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    os << report.rows[i];
    for (std::size_t j = 0; j < report.cols.size(); ++j) os << ',' << report.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    os << ',' << report.averages[static_cast<Eigen::Index>(i)] << '\n';
  }
  return os.str();
}

TrainConfig ablation_config(const TrainConfig& base, Architecture arch, ScheduleKind schedule) {
  TrainConfig c = base;
  if (arch != base.model.arch) {
    NetConfig model = arch == Architecture::zigzag ? zigzag_config() : vanilla_config();
    model.dropout_rate = base.model.dropout_rate;
    model.normalize_input = base.model.normalize_input;
    c.model = model;
  }
  c.schedule = schedule;
  if (base.checkpoint_dir) c.checkpoint_dir = *base.checkpoint_dir / ablation_row_name(arch, schedule);
  return c;
}

std::string ablation_row_name(Architecture arch, ScheduleKind schedule) {
  return std::string(to_string(arch)) + "+" + std::string(to_string(schedule));
}

AblationReport run_ablation(std::span<const EmbeddingRecord> train, std::span<const EmbeddingRecord> val,
                            std::span<const NamedTestSet> testsets, const TrainConfig& base,
                            const EpochCallback& on_epoch) {
  AblationReport report;
  std::vector<NamedModel> models;
  for (Architecture arch : {Architecture::vanilla, Architecture::zigzag}) {
    for (ScheduleKind schedule : {ScheduleKind::none, ScheduleKind::zigzag}) {
      AblationRun run{arch, schedule, fit(train, val, ablation_config(base, arch, schedule), on_epoch)};
      models.push_back({ablation_row_name(arch, schedule), std::make_shared<Parameters<float>>(run.fit.params)});
      report.runs.push_back(std::move(run));
    }
  }
  report.table = cross_matrix(models, testsets);
  return report;
}

}  // namespace zzd
