#include "sanet/runconfig.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "sanet/baselines.hpp"
#include "sanet/errors.hpp"
#include "sanet/metrics.hpp"

namespace sanet {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("bad integer for key '" + key + "': " + value);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("bad integer for key '" + key + "': " + value);
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("bad number for key '" + key + "': " + value);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad boolean for key '" + key + "': " + value);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir), ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_exists(const std::string& path, const std::string& what) {
  if (!fs::exists(fs::path(path))) {
    throw ConfigError(what + " does not exist: " + path);
  }
}

Dataset load_dataset_cfg(const RunConfig& cfg) {
  require_exists(cfg.demand_path, "demand_path");
  require_exists(cfg.sociodemo_path, "sociodemo_path");
  require_exists(cfg.weather_path, "weather_path");
  require_exists(cfg.holidays_path, "holidays_path");
  return load_dataset(cfg.demand_path, cfg.sociodemo_path, cfg.weather_path,
                      cfg.holidays_path, cfg.grid_rows, cfg.grid_cols,
                      service_window(cfg));
}

struct EvalRange {
  SplitIndices split;
  std::size_t begin = 0;
  std::size_t end = 0;
};

EvalRange eval_range(const RunConfig& cfg, const DemandSeries& demand) {
  EvalRange r;
  r.split = split_by_days(demand, cfg.split_train, cfg.split_val);
  if (cfg.eval_split == "train") {
    r.begin = 0;
    r.end = r.split.train_end;
  } else if (cfg.eval_split == "val") {
    r.begin = r.split.train_end;
    r.end = r.split.val_end;
  } else if (cfg.eval_split == "test") {
    r.begin = r.split.val_end;
    r.end = demand.size();
  } else {
    throw ConfigError("eval_split must be train, val or test, got " +
                      cfg.eval_split);
  }
  return r;
}

bool ma_same_hour_mode(const RunConfig& cfg) {
  if (cfg.ma_mode == "same_hour") return true;
  if (cfg.ma_mode == "trailing") return false;
  throw ConfigError("ma_mode must be same_hour or trailing, got " +
                    cfg.ma_mode);
}

std::string run_label(const RunConfig& cfg) {
  return cfg.label.empty() ? cfg.model : cfg.label;
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions opt;
  opt.label = run_label(cfg);
  opt.attribute = cfg.attribute;
  opt.threshold = cfg.threshold;
  return opt;
}

// Look-back block, calendar and precipitation for an arbitrary in-service
// target whose same-day history is fully observed.
ModelInput build_forecast_input(const Dataset& data,
                                const NormalizationStats& stats, int d,
                                Timestamp target) {
  const DemandSeries& demand = data.demand;
  if (!demand.service.contains(target.hour)) {
    throw DataError("predict target " + format_timestamp(target) +
                    " is outside service hours");
  }
  if (target.hour - demand.service.start_hour < d) {
    throw DataError("predict target " + format_timestamp(target) +
                    " has fewer than look_back in-service hours before it");
  }
  const std::size_t cells = static_cast<std::size_t>(demand.rows) *
                            static_cast<std::size_t>(demand.cols);
  ModelInput in;
  Tensor block = Tensor::zeros(Shape{d, demand.rows, demand.cols});
  Tensor pr = Tensor::zeros(Shape{d});
  std::vector<Timestamp> stamps;
  for (int k = 0; k < d; ++k) {
    const Timestamp ts{target.day, target.hour - d + k};
    const auto it = std::lower_bound(demand.timestamps.begin(),
                                     demand.timestamps.end(), ts);
    if (it == demand.timestamps.end() || !(*it == ts)) {
      throw DataError("look-back observation missing for " +
                      format_timestamp(ts));
    }
    const std::size_t idx =
        static_cast<std::size_t>(it - demand.timestamps.begin());
    const Tensor z = zscore(demand.grids[idx], stats);
    for (std::size_t i = 0; i < cells; ++i) {
      block[static_cast<std::size_t>(k) * cells + i] = z[i];
    }
    pr[static_cast<std::size_t>(k)] = data.weather.precip_mm[idx];
    stamps.push_back(ts);
  }
  stamps.push_back(target);
  in.demand = std::move(block);
  in.precip = std::move(pr);
  in.calendar = build_calendar(stamps, data.holidays).values;
  return in;
}

Timestamp next_service_hour(const DemandSeries& demand) {
  Timestamp last = demand.timestamps.back();
  if (last.hour + 1 < demand.service.end_hour) {
    return Timestamp{last.day, last.hour + 1};
  }
  return Timestamp{last.day + 1, demand.service.start_hour};
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "model") cfg.model = value;
  else if (key == "grid_rows") cfg.grid_rows = static_cast<int>(parse_int(key, value));
  else if (key == "grid_cols") cfg.grid_cols = static_cast<int>(parse_int(key, value));
  else if (key == "look_back") cfg.look_back = static_cast<int>(parse_int(key, value));
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "step_size") cfg.step_size = parse_double(key, value);
  else if (key == "max_epochs") cfg.max_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "gamma") cfg.gamma = parse_double(key, value);
  else if (key == "lambda") cfg.lambda = parse_double(key, value);
  else if (key == "attribute") cfg.attribute = value;
  else if (key == "threshold") cfg.threshold = parse_double(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "runs") cfg.runs = static_cast<int>(parse_int(key, value));
  else if (key == "layer_sweep") cfg.layer_sweep = parse_bool(key, value);
  else if (key == "layers") cfg.layers = static_cast<int>(parse_int(key, value));
  else if (key == "channels") cfg.channels = static_cast<int>(parse_int(key, value));
  else if (key == "temporal_hidden") cfg.temporal_hidden = static_cast<int>(parse_int(key, value));
  else if (key == "kernel_size") cfg.kernel_size = static_cast<int>(parse_int(key, value));
  else if (key == "clip_norm") cfg.clip_norm = parse_double(key, value);
  else if (key == "demand_path") cfg.demand_path = value;
  else if (key == "sociodemo_path") cfg.sociodemo_path = value;
  else if (key == "weather_path") cfg.weather_path = value;
  else if (key == "holidays_path") cfg.holidays_path = value;
  else if (key == "output_dir") cfg.output_dir = value;
  else if (key == "checkpoint_path") cfg.checkpoint_path = value;
  else if (key == "synth_days") cfg.synth_days = static_cast<int>(parse_int(key, value));
  else if (key == "split_train") cfg.split_train = parse_double(key, value);
  else if (key == "split_val") cfg.split_val = parse_double(key, value);
  else if (key == "ma_mode") cfg.ma_mode = value;
  else if (key == "service_start_hour") cfg.service_start_hour = static_cast<int>(parse_int(key, value));
  else if (key == "service_end_hour") cfg.service_end_hour = static_cast<int>(parse_int(key, value));
  else if (key == "eval_split") cfg.eval_split = value;
  else if (key == "label") cfg.label = value;
  else if (key == "predict_target") cfg.predict_target = value;
  else throw ConfigError("unknown config key: " + key);
}

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    require_exists(path, "config file");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          " is not key = value: " + line);
      }
      apply_config_entry(cfg, trim(line.substr(0, eq)),
                         trim(line.substr(eq + 1)));
    }
  }
  for (const std::string& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got: " + kv);
    }
    apply_config_entry(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return cfg;
}

ServiceWindow service_window(const RunConfig& cfg) {
  if (cfg.service_start_hour < 0 || cfg.service_end_hour > 24 ||
      cfg.service_start_hour >= cfg.service_end_hour) {
    throw ConfigError("service hours must satisfy 0 <= start < end <= 24");
  }
  return ServiceWindow{cfg.service_start_hour, cfg.service_end_hour};
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.batch_size = cfg.batch_size;
  t.step_size = cfg.step_size;
  t.max_epochs = cfg.max_epochs;
  t.look_back = cfg.look_back;
  t.runs = cfg.runs;
  t.layer_sweep = cfg.layer_sweep;
  t.layers = cfg.layers;
  t.channels = cfg.channels;
  t.temporal_hidden = cfg.temporal_hidden;
  t.kernel_size = cfg.kernel_size;
  t.seed = cfg.seed;
  t.lambda = cfg.lambda;
  t.gamma = cfg.gamma;
  t.attribute = cfg.attribute;
  t.threshold = cfg.threshold;
  t.clip_norm = cfg.clip_norm;
  t.train_frac = cfg.split_train;
  t.val_frac = cfg.split_val;
  return t;
}

std::string resolved_checkpoint_path(const RunConfig& cfg) {
  if (!cfg.checkpoint_path.empty()) return cfg.checkpoint_path;
  return join_path(cfg.output_dir, "checkpoint.bin");
}

void cmd_synth(const RunConfig& cfg) {
  if (cfg.grid_rows < 1 || cfg.grid_cols < 1) {
    throw ConfigError("grid dimensions must be >= 1");
  }
  if (cfg.synth_days < 1) throw ConfigError("synth_days must be >= 1");
  const Dataset ds = synthesize(cfg.seed, cfg.grid_rows, cfg.grid_cols,
                                cfg.synth_days, service_window(cfg));
  ensure_dir(cfg.output_dir);
  write_demand_csv(ds.demand, join_path(cfg.output_dir, "demand.csv"));
  write_sociodemo_csv(ds.sociodemo, join_path(cfg.output_dir, "sociodemo.csv"));
  write_weather_csv(ds.weather, join_path(cfg.output_dir, "weather.csv"));
  write_holidays_file(ds.holidays, join_path(cfg.output_dir, "holidays.txt"));
  std::cout << "synthesized " << cfg.synth_days << " days on "
            << cfg.grid_rows << "x" << cfg.grid_cols << " into "
            << cfg.output_dir << "\n";
}

void cmd_train(const RunConfig& cfg) {
  const ModelKind kind = model_kind_from_string(cfg.model);
  if (!is_neural(kind)) {
    throw ConfigError("train requires a neural model, got " + cfg.model);
  }
  const Dataset data = load_dataset_cfg(cfg);
  const TrainResult result = train(kind, data, to_train_config(cfg),
                                   run_label(cfg));
  ensure_dir(cfg.output_dir);
  const std::string ckpt = resolved_checkpoint_path(cfg);
  const fs::path parent = fs::path(ckpt).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  save_checkpoint(result.runs[result.best_run].checkpoint, ckpt);
  write_training_log(result.runs[result.best_run].log,
                     join_path(cfg.output_dir, "training_log.csv"));
  if (result.runs.size() > 1) {
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
      write_training_log(result.runs[i].log,
                         join_path(cfg.output_dir,
                                   "run" + std::to_string(i + 1) +
                                       "_training_log.csv"));
    }
  }
  write_metrics_csv(result.averaged_test,
                    join_path(cfg.output_dir, "metrics.csv"));
  std::cout << format_metrics_table({result.averaged_test});
  std::cout << "best run " << (result.best_run + 1) << "/"
            << result.runs.size() << ", val loss "
            << fmt_double(
                   result.runs[result.best_run].checkpoint.best_val_loss)
            << " at epoch "
            << result.runs[result.best_run].checkpoint.best_epoch << "\n";
}

void cmd_evaluate(const RunConfig& cfg) {
  const ModelKind kind = model_kind_from_string(cfg.model);
  const Dataset data = load_dataset_cfg(cfg);
  const EvalRange range = eval_range(cfg, data.demand);
  MetricsReport report;
  if (is_neural(kind)) {
    const std::string ckpt = resolved_checkpoint_path(cfg);
    require_exists(ckpt, "checkpoint_path");
    const Checkpoint c = load_checkpoint(ckpt);
    if (c.kind != kind) {
      throw ConfigError("checkpoint holds " + to_string(c.kind) +
                        " but config asks for " + cfg.model);
    }
    report = evaluate_checkpoint(c, data, range.begin, range.end,
                                 eval_options(cfg));
  } else {
    report = evaluate_baseline(kind, data, range.split.train_end, range.begin,
                               range.end, ma_same_hour_mode(cfg),
                               eval_options(cfg), cfg.look_back);
  }
  ensure_dir(cfg.output_dir);
  write_metrics_csv(report, join_path(cfg.output_dir, "metrics.csv"));
  std::cout << format_metrics_table({report});
}

void cmd_predict(const RunConfig& cfg) {
  const ModelKind kind = model_kind_from_string(cfg.model);
  const Dataset data = load_dataset_cfg(cfg);
  const Timestamp target = cfg.predict_target.empty()
                               ? next_service_hour(data.demand)
                               : parse_timestamp(cfg.predict_target);
  if (!data.demand.service.contains(target.hour)) {
    throw DataError("predict target " + format_timestamp(target) +
                    " is outside service hours");
  }
  Tensor pred;
  if (is_neural(kind)) {
    const std::string ckpt = resolved_checkpoint_path(cfg);
    require_exists(ckpt, "checkpoint_path");
    const Checkpoint c = load_checkpoint(ckpt);
    if (c.kind != kind) {
      throw ConfigError("checkpoint holds " + to_string(c.kind) +
                        " but config asks for " + cfg.model);
    }
    Model model = model_from_checkpoint(c);
    if (uses_feature_map(c.kind)) model.set_rasters(data.sociodemo.rasters);
    const ModelInput in =
        build_forecast_input(data, c.stats, c.config.look_back, target);
    pred = denormalize(model.forward(in), c.stats);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = pred[i] > 0.0 ? pred[i] : 0.0;
    }
  } else if (kind == ModelKind::kHistoricalAverage) {
    pred = fit_historical_average(data.demand, 0, data.demand.size())
               .predict(target);
  } else if (kind == ModelKind::kMovingAverage) {
    pred = moving_average_forecast(data.demand, target, ma_same_hour_mode(cfg));
  } else {
    pred = fit_seasonal_ar(data.demand, 0, data.demand.size())
               .forecast(data.demand, target);
  }
  ensure_dir(cfg.output_dir);
  const std::string path = join_path(cfg.output_dir, "prediction.csv");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "row,col,predicted\n";
  for (int r = 0; r < data.demand.rows; ++r) {
    for (int c = 0; c < data.demand.cols; ++c) {
      out << r << ',' << c << ',' << fmt_double(pred.at2(r, c)) << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path);
  std::cout << "predicted " << format_timestamp(target) << " -> " << path
            << "\n";
}

void cmd_map(const RunConfig& cfg) {
  const ModelKind kind = model_kind_from_string(cfg.model);
  const Dataset data = load_dataset_cfg(cfg);
  const EvalRange range = eval_range(cfg, data.demand);
  ForecastResult fc;
  if (is_neural(kind)) {
    const std::string ckpt = resolved_checkpoint_path(cfg);
    require_exists(ckpt, "checkpoint_path");
    const Checkpoint c = load_checkpoint(ckpt);
    if (c.kind != kind) {
      throw ConfigError("checkpoint holds " + to_string(c.kind) +
                        " but config asks for " + cfg.model);
    }
    Model model = model_from_checkpoint(c);
    if (uses_feature_map(c.kind)) model.set_rasters(data.sociodemo.rasters);
    fc = forecast_series(model, data, c.stats, range.begin, range.end);
  } else {
    fc = baseline_forecast_series(kind, data, range.split.train_end,
                                  range.begin, range.end,
                                  ma_same_hour_mode(cfg), cfg.look_back);
  }
  const Tensor field = mpe_field(fc.y, fc.yhat);
  std::string morans = "undefined";
  try {
    morans = fmt_double(morans_i(field));
  } catch (const std::domain_error&) {
  }
  ensure_dir(cfg.output_dir);
  const std::string path = join_path(cfg.output_dir, "mpe_map.csv");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "row,col,mpe\n";
  for (int r = 0; r < data.demand.rows; ++r) {
    for (int c = 0; c < data.demand.cols; ++c) {
      out << r << ',' << c << ',' << fmt_double(field.at2(r, c)) << '\n';
    }
  }
  out << "morans_i,," << morans << '\n';
  if (!out) throw DataError("failed writing " + path);
  std::cout << "morans_i " << morans << "\n";
}

void cmd_report(const RunConfig& cfg, const std::vector<std::string>& inputs) {
  if (inputs.empty()) {
    throw ConfigError("report needs at least one metrics CSV");
  }
  std::vector<MetricsReport> rows;
  for (const std::string& path : inputs) {
    require_exists(path, "metrics csv");
    rows.push_back(read_metrics_csv(path));
  }
  const std::string table = format_metrics_table(rows);
  ensure_dir(cfg.output_dir);
  const std::string path = join_path(cfg.output_dir, "report.csv");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << table;
  if (!out) throw DataError("failed writing " + path);
  std::cout << table;
}

}  // namespace sanet
