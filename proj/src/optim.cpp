#include "zzd/optim.hpp"

#include <cmath>
#include <limits>

namespace zzd {

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("sgd.lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("sgd.weight_decay must be non-negative");
}

std::string_view to_string(MetricMode mode) { return mode == MetricMode::max ? "max" : "min"; }

std::optional<MetricMode> parse_metric_mode(std::string_view text) {
  if (text == "max") return MetricMode::max;
  if (text == "min") return MetricMode::min;
  return std::nullopt;
}

void SchedulerConfig::validate() const {
  if (!(down_factor > 0.0 && down_factor < 1.0)) throw ConfigError("scheduler.down_factor must be in (0, 1)");
  if (!(up_factor > 0.0)) throw ConfigError("scheduler.up_factor must be positive");
  if (up_patience < 0 || down_patience < 0) throw ConfigError("scheduler patience must be non-negative");
  if (restart_after < 1) throw ConfigError("scheduler.restart_after must be at least 1");
}

SchedulerState initial_scheduler_state(double lr, const SchedulerConfig& config) {
  config.validate();
  if (!(lr > 0.0)) throw ConfigError("initial learning rate must be positive");
  SchedulerState s;
  s.lr = lr;
  s.best_lr = lr;
  s.prev_metric = config.mode == MetricMode::max ? -std::numeric_limits<double>::infinity()
                                                 : std::numeric_limits<double>::infinity();
  return s;
}

SchedulerState scheduler_step(SchedulerState state, double metric, const SchedulerConfig& config) {
  if (!std::isfinite(metric)) throw NumericError("scheduler metric is not finite");
  ++state.num_epochs;
  const bool improved = config.mode == MetricMode::min ? metric < state.prev_metric : metric > state.prev_metric;
  if (improved) {
    state.best_lr = state.lr;
    state.num_bad_epochs = 0;
    ++state.num_good_epochs;
    if (state.num_good_epochs > config.up_patience) {
      state.lr *= 1.0 + config.up_factor;
      state.num_good_epochs = 0;
    }
  } else {
    ++state.num_bad_epochs;
    state.num_good_epochs = 0;
    if (state.num_bad_epochs > config.down_patience) {
      state.lr *= 1.0 - config.down_factor;
      state.num_bad_epochs = 0;
    }
  }
  state.prev_metric = metric;
  if (state.num_epochs % config.restart_after == 0) state.lr = state.best_lr;
  return state;
}

std::vector<double> replay_schedule(double initial_lr, const std::vector<double>& metrics,
                                    const SchedulerConfig& config) {
  auto state = initial_scheduler_state(initial_lr, config);
  std::vector<double> lrs;
  lrs.reserve(metrics.size());
  for (double m : metrics) {
    state = scheduler_step(state, m, config);
    lrs.push_back(state.lr);
  }
  return lrs;
}

}  // namespace zzd
