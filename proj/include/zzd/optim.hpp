#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zzd/loss.hpp"
#include "zzd/model.hpp"

namespace zzd {

struct SgdConfig {
  double lr = 0.001;
  double momentum = 0.8;
  double weight_decay = 0.005;
  bool nesterov = true;

  void validate() const;
  bool operator==(const SgdConfig&) const = default;
};

/// One SGD update of a single tensor:
///   g' = g + weight_decay * w
///   v  = momentum * v + g'
///   w -= lr * (nesterov ? g' + momentum * v : v)
template <typename Scalar>
void sgd_update(Mat<Scalar>& weight, const Mat<Scalar>& grad, Mat<Scalar>& velocity, const SgdConfig& config,
                double lr) {
  const auto wd = static_cast<Scalar>(config.weight_decay);
  const auto mu = static_cast<Scalar>(config.momentum);
  const auto step = static_cast<Scalar>(lr);
  const Mat<Scalar> effective = grad + wd * weight;
  velocity = mu * velocity + effective;
  if (config.nesterov) {
    weight -= step * (effective + mu * velocity);
  } else {
    weight -= step * velocity;
  }
}

/// Applies sgd_update to every trainable tensor. `velocity` must mirror
/// `params` (start from zeros_like(params)). Throws DataError on any shape
/// mismatch before touching the parameters.
template <typename Scalar>
void sgd_step(Parameters<Scalar>& params, const Parameters<Scalar>& grads, Parameters<Scalar>& velocity,
              const SgdConfig& config, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  std::vector<std::pair<std::string, Mat<Scalar>*>> w;
  std::vector<const Mat<Scalar>*> g;
  std::vector<Mat<Scalar>*> v;
  for_each_parameter(params, [&](const std::string& name, Mat<Scalar>& m) { w.emplace_back(name, &m); });
  for_each_parameter(grads, [&](const std::string&, const Mat<Scalar>& m) { g.push_back(&m); });
  for_each_parameter(velocity, [&](const std::string&, Mat<Scalar>& m) { v.push_back(&m); });
  if (g.size() != w.size() || v.size() != w.size()) throw DataError("sgd_step: gradient set does not match parameters");
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& m = *w[i].second;
    if (g[i]->rows() != m.rows() || g[i]->cols() != m.cols() || v[i]->rows() != m.rows() ||
        v[i]->cols() != m.cols()) {
      throw DataError("sgd_step: shape mismatch for '" + w[i].first + "'");
    }
  }
  for (std::size_t i = 0; i < w.size(); ++i) sgd_update(*w[i].second, *g[i], *v[i], config, lr);
}

enum class MetricMode { min, max };

std::string_view to_string(MetricMode mode);
std::optional<MetricMode> parse_metric_mode(std::string_view text);

struct SchedulerConfig {
  MetricMode mode = MetricMode::max;
  double up_factor = 0.3;
  double down_factor = 0.5;
  int up_patience = 1;
  int down_patience = 1;
  int restart_after = 30;

  void validate() const;
  bool operator==(const SchedulerConfig&) const = default;
};

/// State of the zigzag plateau scheduler between epochs.
struct SchedulerState {
  double lr = 0.0;
  double best_lr = 0.0;
  double prev_metric = 0.0;
  std::int64_t num_good_epochs = 0;
  std::int64_t num_bad_epochs = 0;
  std::int64_t num_epochs = 0;

  bool operator==(const SchedulerState&) const = default;
};

/// best_lr starts at `lr`; prev_metric starts at -inf (max) or +inf (min) so
/// the first observed metric always counts as an improvement.
SchedulerState initial_scheduler_state(double lr, const SchedulerConfig& config);

/// One epoch of ZigZagLROnPlateauRestarts. A strict improvement over the
/// previous metric records best_lr = lr and, after more than up_patience
/// consecutive improvements, multiplies lr by (1 + up_factor); otherwise,
/// after more than down_patience consecutive non-improvements, lr is
/// multiplied by (1 - down_factor). Every restart_after epochs lr resets to
/// best_lr. The returned lr applies to the next epoch.
SchedulerState scheduler_step(SchedulerState state, double metric, const SchedulerConfig& config);

/// Replays scheduler_step over a metric sequence; element k is the lr in
/// effect after observing metrics[0..k].
std::vector<double> replay_schedule(double initial_lr, const std::vector<double>& metrics,
                                    const SchedulerConfig& config);

}  // namespace zzd
