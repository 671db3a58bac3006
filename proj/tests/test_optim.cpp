#include <cmath>
#include <limits>

#include "doctest.h"
#include "zzd/error.hpp"
#include "zzd/optim.hpp"
#include "zzd/random.hpp"

using namespace zzd;

namespace {

Mat<double> scalar(double v) { return Mat<double>::Constant(1, 1, v); }

void check_trace(const std::vector<double>& got, const std::vector<double>& expect) {
  REQUIRE(got.size() == expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    INFO("step " << i);
    CHECK(std::abs(got[i] - expect[i]) <= 1e-12);
  }
}

}  // namespace

TEST_CASE("sgd update examples") {
  SgdConfig c;
  c.weight_decay = 0;
  c.momentum = 0;
  auto w = scalar(1), v = scalar(0);
  sgd_update(w, scalar(0), v, c, 0.1);
  CHECK(w(0, 0) == 1.0);

  c.momentum = 0.8;
  c.nesterov = true;
  w = scalar(0);
  v = scalar(0);
  sgd_update(w, scalar(1), v, c, 0.1);
  CHECK(v(0, 0) == doctest::Approx(1.0));
  CHECK(w(0, 0) == doctest::Approx(-0.18));

  c.nesterov = false;
  w = scalar(0);
  v = scalar(0);
  sgd_update(w, scalar(1), v, c, 0.1);
  sgd_update(w, scalar(1), v, c, 0.1);
  CHECK(v(0, 0) == doctest::Approx(1.8));
  CHECK(w(0, 0) == doctest::Approx(-0.1 - 0.18));

  c.weight_decay = 0.005;
  c.momentum = 0;
  w = scalar(1);
  v = scalar(0);
  sgd_update(w, scalar(0), v, c, 1.0);
  CHECK(w(0, 0) == doctest::Approx(0.995));
}

TEST_CASE("sgd with no momentum or decay is plain gradient descent") {
  SgdConfig c;
  c.weight_decay = 0;
  c.momentum = 0;
  SplitMix64 rng(1);
  Mat<double> w(3, 4), g(3, 4);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w.data()[i] = rng.normal();
    g.data()[i] = rng.normal();
  }
  const Mat<double> expect = w - 0.05 * g;
  Mat<double> v = Mat<double>::Zero(3, 4);
  sgd_update(w, g, v, c, 0.05);
  CHECK(w == expect);
}

TEST_CASE("sgd_step checks shapes before updating") {
  NetConfig cfg;
  cfg.block_channels = {64};
  cfg.downsample_blocks = {};
  auto p = build<double>(cfg, 1);
  auto grads = zeros_like(p);
  auto vel = zeros_like(p);
  const auto before = p.embed.weight;
  grads.head.weight.resize(3, 3);
  CHECK_THROWS_AS(sgd_step(p, grads, vel, SgdConfig{}, 0.1), DataError);
  CHECK(p.embed.weight == before);
  grads = zeros_like(p);
  CHECK_THROWS_AS(sgd_step(p, grads, vel, SgdConfig{}, 0.0), ConfigError);
  sgd_step(p, grads, vel, SgdConfig{}, 0.1);
  CHECK(p.embed.weight.isApprox(before * (1 - 0.1 * 0.005 * 1.8)));
}

TEST_CASE("config validation") {
  SgdConfig s;
  CHECK_NOTHROW(s.validate());
  s.momentum = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.lr = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.weight_decay = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  SchedulerConfig c;
  CHECK_NOTHROW(c.validate());
  c.down_factor = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.up_factor = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.restart_after = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.up_patience = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("scheduler hand trace") {
  check_trace(replay_schedule(0.001, {0.5, 0.6, 0.7, 0.65, 0.6, 0.55}, {}),
              {0.001, 0.0013, 0.0013, 0.0013, 0.00065, 0.00065});
}

TEST_CASE("scheduler initial state") {
  const auto s = initial_scheduler_state(0.01, {});
  CHECK(s.lr == 0.01);
  CHECK(s.best_lr == 0.01);
  CHECK(s.prev_metric == -std::numeric_limits<double>::infinity());
  SchedulerConfig min;
  min.mode = MetricMode::min;
  CHECK(initial_scheduler_state(0.01, min).prev_metric == std::numeric_limits<double>::infinity());
}

TEST_CASE("restart returns to the best lr") {
  SchedulerConfig c;
  c.restart_after = 4;
  // improve, improve (lr up), worse, worse (lr down), then restart to the
  // lr recorded at the last improvement
  check_trace(replay_schedule(0.001, {0.5, 0.6, 0.4, 0.3}, c), {0.001, 0.0013, 0.0013, 0.001});

  c.restart_after = 30;
  SchedulerState s = initial_scheduler_state(0.001, c);
  SplitMix64 rng(8);
  for (int epoch = 1; epoch <= 95; ++epoch) {
    const double best_before = s.best_lr;
    const bool will_improve = rng.uniform() < 0.5;
    const double metric = will_improve ? s.prev_metric + 0.01 : s.prev_metric - 0.01;
    s = scheduler_step(s, std::isfinite(metric) ? metric : 0.5, c);
    if (epoch % 30 == 0) {
      const double best = will_improve || epoch == 1 ? s.best_lr : best_before;
      CHECK(s.lr == best);
      CHECK(s.best_lr == best);
    }
  }
}

TEST_CASE("scheduler invariants over random metrics") {
  SchedulerConfig c;
  c.restart_after = 7;
  SchedulerState s = initial_scheduler_state(0.001, c);
  SplitMix64 rng(21);
  for (int epoch = 1; epoch <= 500; ++epoch) {
    const double old_lr = s.lr;
    const double metric = std::round(rng.uniform() * 10) / 10;  // ties happen
    const double prev = s.prev_metric;
    s = scheduler_step(s, metric, c);
    CHECK(s.lr > 0);
    CHECK_FALSE((s.num_good_epochs > 0 && s.num_bad_epochs > 0));
    CHECK(s.num_epochs == epoch);
    if (metric == prev) CHECK(s.num_good_epochs == 0);
    if (epoch % c.restart_after != 0) {
      const double r = s.lr / old_lr;
      CHECK((r == 1.0 || std::abs(r - 1.3) < 1e-12 || std::abs(r - 0.5) < 1e-12));
    }
  }
}

TEST_CASE("min mode mirrors max mode") {
  std::vector<double> up, down;
  SplitMix64 rng(4);
  for (int i = 0; i < 60; ++i) {
    const double m = std::round(rng.uniform() * 20);
    up.push_back(m);
    down.push_back(-m);
  }
  SchedulerConfig max_cfg, min_cfg;
  min_cfg.mode = MetricMode::min;
  check_trace(replay_schedule(0.002, up, max_cfg), replay_schedule(0.002, down, min_cfg));

  std::vector<double> increasing, decreasing;
  for (int i = 0; i < 10; ++i) {
    increasing.push_back(i);
    decreasing.push_back(-i);
  }
  check_trace(replay_schedule(0.001, increasing, min_cfg), replay_schedule(0.001, decreasing, max_cfg));
}

TEST_CASE("scheduler rejects non-finite metrics") {
  const auto s = initial_scheduler_state(0.001, {});
  CHECK_THROWS_AS(scheduler_step(s, std::nan(""), {}), NumericError);
  CHECK_THROWS_AS(scheduler_step(s, INFINITY, {}), NumericError);
}

TEST_CASE("metric mode names") {
  CHECK(to_string(MetricMode::max) == "max");
  CHECK(parse_metric_mode("min") == MetricMode::min);
  CHECK_FALSE(parse_metric_mode("avg").has_value());
}
