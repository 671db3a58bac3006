#include "zzd/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "zzd/checkpoint.hpp"
#include "zzd/random.hpp"

namespace zzd {

std::string_view to_string(ScheduleKind kind) { return kind == ScheduleKind::zigzag ? "zigzag" : "none"; }

std::optional<ScheduleKind> parse_schedule_kind(std::string_view text) {
  if (text == "zigzag") return ScheduleKind::zigzag;
  if (text == "none") return ScheduleKind::none;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (early_stop_patience && *early_stop_patience < 0) throw ConfigError("train.early_stop_patience must be >= 0");
  sgd.validate();
  scheduler.validate();
  model.validate();
}

LabeledBatch make_labeled_batch(std::span<const EmbeddingRecord> records) {
  LabeledBatch batch;
  batch.inputs.resize(kEmbedDim, static_cast<Eigen::Index>(records.size()));
  batch.labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.label) throw DataError("record '" + r.chunk_id + "' has no label");
    batch.inputs.col(static_cast<Eigen::Index>(i)) = scale_to_pixels(r.vector).values;
    batch.labels.push_back(*r.label);
  }
  return batch;
}

EvalResult evaluate(const Parameters<float>& params, const LabeledBatch& data, int batch_size) {
  const Eigen::Index n = data.inputs.cols();
  if (n == 0) throw DataError("evaluate: no records");
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (Eigen::Index begin = 0; begin < n; begin += batch_size) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - begin);
    const Mat<float> logits = forward(params, Mat<float>(data.inputs.middleCols(begin, len)));
    std::span<const Label> labels(data.labels.data() + begin, static_cast<std::size_t>(len));
    const Mat<double> logits64 = logits.cast<double>();
    loss_sum += cross_entropy(logits64, labels) * static_cast<double>(len);
    for (Eigen::Index j = 0; j < len; ++j) {
      if (predicted_label(logit_pair(logits, j)) == labels[static_cast<std::size_t>(j)]) ++correct;
    }
  }
  return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

EvalResult evaluate(const Parameters<float>& params, std::span<const EmbeddingRecord> records, int batch_size) {
  return evaluate(params, make_labeled_batch(records), batch_size);
}

FitResult fit(std::span<const EmbeddingRecord> train, std::span<const EmbeddingRecord> val,
              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw DataError("fit: training set is empty");
  if (val.empty()) throw DataError("fit: validation set is empty");
  const LabeledBatch train_data = make_labeled_batch(train);
  const LabeledBatch val_data = make_labeled_batch(val);
  if (config.checkpoint_dir) std::filesystem::create_directories(*config.checkpoint_dir);

  FitResult result;
  Parameters<float> params = build<float>(config.model, config.seed);
  Parameters<float> velocity = zeros_like(params);
  std::optional<SchedulerState> scheduler;
  if (config.schedule == ScheduleKind::zigzag) scheduler = initial_scheduler_state(config.sgd.lr, config.scheduler);
  double lr = config.sgd.lr;

  result.params = params;
  result.best_val_acc = -1.0;
  const auto n = static_cast<std::size_t>(train_data.inputs.cols());
  std::vector<Eigen::Index> order(n);
  Mat<float> x;
  std::vector<Label> y;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    SplitMix64 rng(epoch_seed);
    shuffle(order, rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t len = std::min(static_cast<std::size_t>(config.batch_size), n - begin);
      x.resize(kEmbedDim, static_cast<Eigen::Index>(len));
      y.resize(len);
      for (std::size_t j = 0; j < len; ++j) {
        x.col(static_cast<Eigen::Index>(j)) = train_data.inputs.col(order[begin + j]);
        y[j] = train_data.labels[static_cast<std::size_t>(order[begin + j])];
      }
      const auto context = [&] {
        return "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      };
      GradientResult<float> step;
      try {
        step = gradients(params, x, y, {Mode::train, derive_seed(epoch_seed, batch_index + 1)});
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (" + context() + ")");
      }
      if (!std::isfinite(step.loss)) throw NumericError("non-finite training loss (" + context() + ")");
      sgd_step(params, step.grads, velocity, config.sgd, lr);
      update_running_statistics(params, step.statistics);

      loss_sum += static_cast<double>(step.loss) * static_cast<double>(len);
      for (std::size_t j = 0; j < len; ++j) {
        if (predicted_label(logit_pair(step.logits, static_cast<Eigen::Index>(j))) == y[j]) ++correct;
      }
    }

    const EvalResult v = evaluate(params, val_data);
    EpochRecord record{epoch, loss_sum / static_cast<double>(n),
                       static_cast<double>(correct) / static_cast<double>(n), v.loss, v.accuracy, lr};
    result.history.push_back(record);

    if (v.accuracy > result.best_val_acc) {
      result.best_val_acc = v.accuracy;
      result.best_epoch = epoch;
      result.params = params;
      if (config.checkpoint_dir) save_checkpoint(params, *config.checkpoint_dir / "best.zzck", scheduler);
    }
    if (scheduler) {
      scheduler = scheduler_step(*scheduler, v.accuracy, config.scheduler);
      lr = scheduler->lr;
    }
    if (on_epoch) on_epoch(record);
    if (config.early_stop_patience && epoch - result.best_epoch > *config.early_stop_patience) break;
  }
  result.scheduler = scheduler;
  if (config.checkpoint_dir) save_checkpoint(params, *config.checkpoint_dir / "last.zzck", scheduler);
  return result;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["train_acc"] = r.train_acc;
  j["val_loss"] = r.val_loss;
  j["val_acc"] = r.val_acc;
  j["lr"] = r.lr;
  return j.dump();
}

void write_history(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history file '" + path.string() + "'");
  for (const auto& r : history) out << to_json_line(r) << '\n';
}

}  // namespace zzd
