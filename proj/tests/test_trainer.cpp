#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "sanet/baselines.hpp"
#include "sanet/errors.hpp"
#include "sanet/trainer.hpp"

using namespace sanet;

namespace {

bool same_tensor(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.block_count() != b.block_count()) return false;
  for (std::size_t i = 0; i < a.block_count(); ++i) {
    if (a.block(i).first != b.block(i).first) return false;
    if (!same_tensor(a.block(i).second, b.block(i).second)) return false;
  }
  return true;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.step_size = 1e-5;
  cfg.max_epochs = 2;
  cfg.look_back = 2;
  cfg.runs = 1;
  cfg.channels = 4;
  cfg.temporal_hidden = 4;
  cfg.seed = 17;
  cfg.train_frac = 0.6;
  cfg.val_frac = 0.2;
  cfg.attribute = "pct_minority";
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("window_targets respects day boundaries") {
  Dataset ds = synthesize(31, 2, 2, 3);
  auto t6 = window_targets(ds.demand, 6, 0, ds.demand.size());
  CHECK(t6.size() == 3u * 10u);  // slots 6..15 of each day
  for (std::size_t t : t6) {
    CHECK(ds.demand.timestamps[t].hour >= 12);
    CHECK(ds.demand.timestamps[t - 6].day == ds.demand.timestamps[t].day);
  }
  auto t2 = window_targets(ds.demand, 2, 16, 32);  // second day only
  CHECK(t2.size() == 14u);
  CHECK(t2.front() == 18u);
  CHECK_THROWS_AS((void)window_targets(ds.demand, 0, 0, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)window_targets(ds.demand, 2, 0, 1000),
                  std::invalid_argument);
}

TEST_CASE("build_windows stages normalized inputs and raw targets") {
  Dataset ds = synthesize(32, 2, 3, 4);
  NormalizationStats stats = compute_stats(ds.demand, 0, 32);
  const int d = 3;
  auto windows = build_windows(ds, stats, d, 0, ds.demand.size());
  REQUIRE(!windows.empty());
  auto targets = window_targets(ds.demand, d, 0, ds.demand.size());
  REQUIRE(windows.size() == targets.size());
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const Window& w = windows[k];
    const std::size_t t = targets[k];
    CHECK(w.target_index == t);
    CHECK(same_tensor(w.target, ds.demand.grids[t]));
    REQUIRE(w.input.demand.shape() == (Shape{d, 2, 3}));
    for (int s = 0; s < d; ++s) {
      Tensor z = zscore(ds.demand.grids[t - d + s], stats);
      CHECK(std::memcmp(w.input.demand.data() + s * 6, z.data(),
                        6 * sizeof(double)) == 0);
    }
    REQUIRE(w.input.calendar.shape() == (Shape{d + 1, 3}));
    for (int s = 0; s <= d; ++s) {
      for (int j = 0; j < 3; ++j) {
        CHECK(w.input.calendar.at2(s, j) ==
              ds.calendar.values.at2(static_cast<int>(t) - d + s, j));
      }
    }
    REQUIRE(w.input.precip.shape() == (Shape{d}));
    for (int s = 0; s < d; ++s) {
      CHECK(w.input.precip[static_cast<std::size_t>(s)] ==
            ds.weather.precip_mm[t - d + s]);
    }
  }
}

TEST_CASE("sgd_step applies blockwise updates") {
  ParamStore params;
  params.add("a", Tensor(Shape{2}, {2.0, 4.0}));
  params.add("b", Tensor(Shape{1}, {1.0}));
  std::vector<std::pair<std::string, Tensor>> grads;
  grads.emplace_back("a", Tensor(Shape{2}, {1.0, -2.0}));
  grads.emplace_back("b", Tensor(Shape{1}, {0.5}));
  sgd_step(params, grads, 0.5);
  CHECK(params.get("a")[0] == 1.5);
  CHECK(params.get("a")[1] == 5.0);
  CHECK(params.get("b")[0] == 0.75);

  std::vector<std::pair<std::string, Tensor>> bad;
  bad.emplace_back("a", Tensor(Shape{3}, {1.0, 1.0, 1.0}));
  CHECK_THROWS_AS(sgd_step(params, bad, 0.1), std::invalid_argument);
  std::vector<std::pair<std::string, Tensor>> missing;
  missing.emplace_back("zz", Tensor(Shape{1}, {1.0}));
  CHECK_THROWS_AS(sgd_step(params, missing, 0.1), std::invalid_argument);

  std::vector<std::pair<std::string, Tensor>> nan_grad;
  nan_grad.emplace_back("a", Tensor(Shape{2}, {std::nan(""), 0.0}));
  try {
    sgd_step(params, nan_grad, 0.1);
    FAIL("expected domain_error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bitwise") {
  TempDir dir("sanet_test_ckpt");
  std::mt19937_64 gen(71);
  ModelConfig mc;
  mc.rows = 3;
  mc.cols = 3;
  mc.look_back = 2;
  mc.channels = 2;
  mc.temporal_hidden = 2;
  mc.raster_vars = 2;
  Model m = build_model(ModelKind::kSaNet, mc, gen);

  Checkpoint c;
  c.kind = ModelKind::kSaNet;
  c.config = mc;
  c.stats = NormalizationStats{3.25, 1.75};
  c.best_val_loss = 0.1234567890123456789;
  c.best_epoch = 7;
  c.params = m.params();
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(c, path);
  Checkpoint back = load_checkpoint(path);

  CHECK(back.kind == c.kind);
  CHECK(back.config.rows == mc.rows);
  CHECK(back.config.cols == mc.cols);
  CHECK(back.config.look_back == mc.look_back);
  CHECK(back.config.layers == mc.layers);
  CHECK(back.config.channels == mc.channels);
  CHECK(back.config.temporal_hidden == mc.temporal_hidden);
  CHECK(back.config.kernel_size == mc.kernel_size);
  CHECK(back.config.raster_vars == mc.raster_vars);
  CHECK(back.config.frozen_feature_weights == mc.frozen_feature_weights);
  CHECK(std::memcmp(&back.stats.mean, &c.stats.mean, sizeof(double)) == 0);
  CHECK(std::memcmp(&back.stats.std, &c.stats.std, sizeof(double)) == 0);
  CHECK(std::memcmp(&back.best_val_loss, &c.best_val_loss, sizeof(double)) == 0);
  CHECK(back.best_epoch == 7);
  CHECK(same_params(back.params, c.params));

  // restored model forwards bitwise
  Model restored = model_from_checkpoint(back);
  std::vector<Tensor> rasters = {Tensor::full(Shape{3, 3}, 0.25),
                                 Tensor::full(Shape{3, 3}, 0.5)};
  Tensor r2 = rasters[1];
  for (std::size_t i = 0; i < 9; ++i) r2[i] = 0.1 * static_cast<double>(i);
  rasters[1] = r2;
  m.set_rasters(rasters);
  restored.set_rasters(rasters);
  ModelInput in;
  in.demand = Tensor::full(Shape{2, 3, 3}, 0.3);
  in.calendar = Tensor(Shape{3, 3}, {2, 1, 0, 1, 1, 0, 0, 1, 1});
  in.precip = Tensor(Shape{2}, {0.0, 0.7});
  CHECK(same_tensor(m.forward(in), restored.forward(in)));
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  TempDir dir("sanet_test_ckpt_bad");
  std::mt19937_64 gen(72);
  ModelConfig mc;
  mc.rows = 2;
  mc.cols = 2;
  mc.look_back = 2;
  mc.channels = 2;
  Model m = build_model(ModelKind::kConvLstm, mc, gen);
  Checkpoint c;
  c.kind = ModelKind::kConvLstm;
  c.config = mc;
  c.params = m.params();
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(c, path);

  std::ifstream in(path, std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  in.close();

  const std::string trunc_path = dir.file("trunc.ckpt");
  std::ofstream(trunc_path, std::ios::binary)
      << buf.substr(0, buf.size() - 11);
  CHECK_THROWS_AS((void)load_checkpoint(trunc_path), DataError);

  const std::string magic_path = dir.file("magic.ckpt");
  std::string wrong = buf;
  wrong[0] = 'X';
  std::ofstream(magic_path, std::ios::binary) << wrong;
  CHECK_THROWS_AS((void)load_checkpoint(magic_path), DataError);

  CHECK_THROWS_AS((void)load_checkpoint(dir.file("nope.ckpt")), DataError);
}

TEST_CASE("forecast_series clamps and aligns targets") {
  Dataset ds = synthesize(33, 2, 2, 6);
  NormalizationStats stats = compute_stats(ds.demand, 0, 64);
  std::mt19937_64 gen(73);
  ModelConfig mc;
  mc.rows = 2;
  mc.cols = 2;
  mc.look_back = 2;
  mc.channels = 3;
  Model m = build_model(ModelKind::kConvLstm, mc, gen);

  ForecastResult fc = forecast_series(m, ds, stats, 64, ds.demand.size());
  auto targets = window_targets(ds.demand, 2, 64, ds.demand.size());
  CHECK(fc.target_index == targets);
  REQUIRE(fc.y.size() == targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    CHECK(same_tensor(fc.y[k], ds.demand.grids[targets[k]]));
    for (std::size_t i = 0; i < fc.yhat[k].size(); ++i)
      CHECK(fc.yhat[k][i] >= 0.0);
  }
}

TEST_CASE("evaluate_model composes forecasts, mask and hours") {
  Dataset ds = synthesize(34, 2, 2, 6);
  NormalizationStats stats = compute_stats(ds.demand, 0, 64);
  std::mt19937_64 gen(74);
  ModelConfig mc;
  mc.rows = 2;
  mc.cols = 2;
  mc.look_back = 2;
  mc.channels = 3;
  Model m = build_model(ModelKind::kConvLstm, mc, gen);

  EvalOptions opt;
  opt.label = "unit";
  opt.attribute = "pct_minority";
  MetricsReport r = evaluate_model(m, ds, stats, 64, ds.demand.size(), opt);

  ForecastResult fc = forecast_series(m, ds, stats, 64, ds.demand.size());
  std::vector<int> hours;
  for (std::size_t t : fc.target_index)
    hours.push_back(ds.demand.timestamps[t].hour);
  GroupMask mask = build_group_mask(ds.sociodemo.rasters[0], 0.5,
                                    "pct_minority");
  MetricsReport manual = point_metrics(fc.y, fc.yhat, &mask, &hours);
  CHECK(r.label == "unit");
  CHECK(r.mae == manual.mae);
  CHECK(r.mape == manual.mape);
  CHECK(r.mpe == manual.mpe);
  CHECK(r.mpe_gap == manual.mpe_gap);
  CHECK(r.has_groups);
  CHECK(r.per_hour.size() == manual.per_hour.size());
  CHECK(r.has_morans == manual.has_morans);

  EvalOptions bad = opt;
  bad.attribute = "nope";
  CHECK_THROWS_AS(
      (void)evaluate_model(m, ds, stats, 64, ds.demand.size(), bad),
      std::invalid_argument);
}

TEST_CASE("evaluate_baseline uses the neural window-target set") {
  Dataset ds = synthesize(35, 2, 2, 8);
  const std::size_t train_end = 6 * 16, begin = 6 * 16,
                    end = ds.demand.size();
  ForecastResult fc = baseline_forecast_series(ModelKind::kMovingAverage, ds,
                                               train_end, begin, end, false, 6);
  auto targets = window_targets(ds.demand, 6, begin, end);
  CHECK(fc.target_index == targets);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    Tensor direct = moving_average_predict(ds.demand, targets[k], false);
    for (std::size_t i = 0; i < direct.size(); ++i)
      direct[i] = direct[i] > 0.0 ? direct[i] : 0.0;
    CHECK(same_tensor(fc.yhat[k], direct));
    CHECK(same_tensor(fc.y[k], ds.demand.grids[targets[k]]));
  }

  EvalOptions opt;
  opt.label = "ma";
  MetricsReport r = evaluate_baseline(ModelKind::kMovingAverage, ds, train_end,
                                      begin, end, false, opt, 6);
  MetricsReport manual = point_metrics(fc.y, fc.yhat, nullptr, nullptr);
  CHECK(r.mae == manual.mae);
  CHECK(r.mpe == manual.mpe);
}

TEST_CASE("train_single runs the protocol deterministically") {
  Dataset ds = synthesize(36, 2, 2, 16);
  TrainConfig cfg = tiny_config();
  RunResult a = train_single(ModelKind::kLstm, ds, cfg, 1, cfg.seed, "lstm");
  REQUIRE(a.log.size() == 2);
  CHECK(a.log[0].epoch == 1);
  CHECK(a.log[1].epoch == 2);
  for (const EpochLog& e : a.log) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(std::isfinite(e.val_loss));
    CHECK(std::isfinite(e.val_mae));
  }
  const double min_val = std::min(a.log[0].val_loss, a.log[1].val_loss);
  CHECK(a.checkpoint.best_val_loss == min_val);
  const int expect_epoch = a.log[1].val_loss < a.log[0].val_loss ? 2 : 1;
  CHECK(a.checkpoint.best_epoch == expect_epoch);
  CHECK(a.test_report.label == "lstm");
  CHECK(std::isfinite(a.test_report.mae));

  RunResult b = train_single(ModelKind::kLstm, ds, cfg, 1, cfg.seed, "lstm");
  CHECK(same_params(a.checkpoint.params, b.checkpoint.params));
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
    CHECK(a.log[i].val_loss == b.log[i].val_loss);
  }
  CHECK(a.test_report.mae == b.test_report.mae);
}

TEST_CASE("train averages runs and picks the best") {
  Dataset ds = synthesize(37, 2, 2, 16);
  TrainConfig cfg = tiny_config();
  cfg.runs = 2;
  TrainResult tr = train(ModelKind::kLstm, ds, cfg, "lstm");
  REQUIRE(tr.runs.size() == 2);
  const std::size_t argmin =
      tr.runs[0].checkpoint.best_val_loss <= tr.runs[1].checkpoint.best_val_loss
          ? 0
          : 1;
  CHECK(tr.best_run == argmin);
  CHECK(tr.averaged_test.mae ==
        (tr.runs[0].test_report.mae + tr.runs[1].test_report.mae) / 2.0);

  // distinct run seeds give distinct fits
  CHECK(!same_params(tr.runs[0].checkpoint.params,
                     tr.runs[1].checkpoint.params));
}

TEST_CASE("training log file shape") {
  TempDir dir("sanet_test_trainlog");
  std::vector<EpochLog> log(3);
  for (int i = 0; i < 3; ++i) {
    log[static_cast<std::size_t>(i)].epoch = i + 1;
    log[static_cast<std::size_t>(i)].train_loss = 1.0 / (i + 1);
    log[static_cast<std::size_t>(i)].val_loss = 2.0 / (i + 1);
  }
  const std::string path = dir.file("log.csv");
  write_training_log(log, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(static_cast<bool>(std::getline(in, line)));
  CHECK(line == "epoch,train_loss,val_loss,val_mae,val_mpe_gap");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("train config validation") {
  TrainConfig cfg = tiny_config();
  cfg.validate();
  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.kernel_size = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.layers = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.train_frac = 0.9;
  bad.val_frac = 0.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.gamma = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_SUITE_END();
