#include "sanet/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

#include "sanet/baselines.hpp"
#include "sanet/errors.hpp"
#include "sanet/rng.hpp"

namespace sanet {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double clamp0(double v) { return v > 0.0 ? v : 0.0; }

Tensor clamp_grid(const Tensor& g) {
  Tensor out = g;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clamp0(out[i]);
  return out;
}

double unfiltered_mae(const std::vector<Tensor>& y,
                      const std::vector<Tensor>& yhat) {
  double abs_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (std::size_t i = 0; i < y[t].size(); ++i) {
      abs_sum += std::fabs(y[t][i] - yhat[t][i]);
      ++n;
    }
  }
  return n > 0 ? abs_sum / static_cast<double>(n) : 0.0;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (look_back < 1) throw ConfigError("look_back must be >= 1");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (layers < 1 || layers > 3) throw ConfigError("layers must be in {1,2,3}");
  if (sweep_layers.empty()) throw ConfigError("sweep_layers must be non-empty");
  for (int l : sweep_layers) {
    if (l < 1 || l > 3) throw ConfigError("sweep layer counts must be in {1,2,3}");
  }
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (temporal_hidden < 1) throw ConfigError("temporal_hidden must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("kernel_size must be odd and >= 1");
  }
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("threshold must be in [0,1]");
  }
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || train_frac + val_frac >= 1.0) {
    throw ConfigError("split fractions must be positive and sum below 1");
  }
}

std::vector<std::size_t> window_targets(const DemandSeries& demand, int d,
                                        std::size_t begin, std::size_t end) {
  if (begin > end || end > demand.size()) {
    throw std::invalid_argument("window_targets: range out of bounds");
  }
  if (d < 1) throw std::invalid_argument("window_targets: d must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t t = begin; t < end; ++t) {
    if (t < static_cast<std::size_t>(d)) continue;
    const int slot = demand.timestamps[t].hour - demand.service.start_hour;
    if (slot < d) continue;
    if (demand.timestamps[t - static_cast<std::size_t>(d)].day !=
        demand.timestamps[t].day) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

std::vector<Window> build_windows(const Dataset& data,
                                  const NormalizationStats& stats, int d,
                                  std::size_t begin, std::size_t end) {
  const DemandSeries& demand = data.demand;
  const std::size_t ud = static_cast<std::size_t>(d);
  const std::size_t cells =
      static_cast<std::size_t>(demand.rows) * static_cast<std::size_t>(demand.cols);
  std::vector<Window> out;
  for (std::size_t t : window_targets(demand, d, begin, end)) {
    Window w;
    w.target_index = t;
    w.target = demand.grids[t];
    Tensor block = Tensor::zeros(Shape{d, demand.rows, demand.cols});
    for (std::size_t k = 0; k < ud; ++k) {
      const Tensor z = zscore(demand.grids[t - ud + k], stats);
      for (std::size_t i = 0; i < cells; ++i) block[k * cells + i] = z[i];
    }
    w.input.demand = std::move(block);
    Tensor cal = Tensor::zeros(Shape{d + 1, 3});
    for (std::size_t k = 0; k <= ud; ++k) {
      for (int j = 0; j < 3; ++j) {
        cal[k * 3 + static_cast<std::size_t>(j)] =
            data.calendar.values.at2(static_cast<int>(t - ud + k), j);
      }
    }
    w.input.calendar = std::move(cal);
    Tensor pr = Tensor::zeros(Shape{d});
    for (std::size_t k = 0; k < ud; ++k) {
      pr[k] = data.weather.precip_mm[t - ud + k];
    }
    w.input.precip = std::move(pr);
    out.push_back(std::move(w));
  }
  return out;
}

void sgd_step(ParamStore& params,
              const std::vector<std::pair<std::string, Tensor>>& grads,
              double step_size) {
  for (const auto& [name, g] : grads) {
    Tensor& p = params.get(name);
    if (!(p.shape() == g.shape())) {
      throw std::invalid_argument("sgd_step: shape mismatch for block '" +
                                  name + "'");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw std::domain_error("non-finite gradient in parameter block '" +
                                name + "'");
      }
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step_size * g[i];
  }
}

void write_training_log(const std::vector<EpochLog>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open training log for writing: " + path);
  out << "epoch,train_loss,val_loss,val_mae,val_mpe_gap\n";
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << fmt_double(e.train_loss) << ','
        << fmt_double(e.val_loss) << ',' << fmt_double(e.val_mae) << ','
        << fmt_double(e.val_mpe_gap) << '\n';
  }
  if (!out) throw DataError("failed writing training log: " + path);
}

namespace {

constexpr char kMagic[6] = {'S', 'A', 'N', 'E', 'T', '\x01'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw DataError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    }
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i]))
           << (8 * i);
    }
    pos += 8;
    return std::bit_cast<double>(v);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::vector<std::pair<std::string, std::string>> checkpoint_metadata(
    const Checkpoint& c) {
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("kind", to_string(c.kind));
  meta.emplace_back("rows", std::to_string(c.config.rows));
  meta.emplace_back("cols", std::to_string(c.config.cols));
  meta.emplace_back("look_back", std::to_string(c.config.look_back));
  meta.emplace_back("layers", std::to_string(c.config.layers));
  meta.emplace_back("channels", std::to_string(c.config.channels));
  meta.emplace_back("temporal_hidden",
                    std::to_string(c.config.temporal_hidden));
  meta.emplace_back("kernel_size", std::to_string(c.config.kernel_size));
  meta.emplace_back("raster_vars", std::to_string(c.config.raster_vars));
  meta.emplace_back("frozen_feature_weights",
                    c.config.frozen_feature_weights ? "1" : "0");
  meta.emplace_back("norm_mean", fmt_hex(c.stats.mean));
  meta.emplace_back("norm_std", fmt_hex(c.stats.std));
  meta.emplace_back("best_val_loss", fmt_hex(c.best_val_loss));
  meta.emplace_back("best_epoch", std::to_string(c.best_epoch));
  return meta;
}

long meta_int(const std::map<std::string, std::string>& meta,
              const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint missing key: " + key);
  char* end = nullptr;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw DataError("checkpoint: bad integer for key " + key);
  }
  return v;
}

double meta_double(const std::map<std::string, std::string>& meta,
                   const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint missing key: " + key);
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw DataError("checkpoint: bad number for key " + key);
  }
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, c.version);
  const auto meta = checkpoint_metadata(c);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) put_str(out, k + "=" + v);
  put_u32(out, static_cast<std::uint32_t>(c.params.block_count()));
  for (std::size_t i = 0; i < c.params.block_count(); ++i) {
    const auto& [name, value] = c.params.block(i);
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(value.shape().rank()));
    for (int r = 0; r < value.shape().rank(); ++r) {
      put_u32(out, static_cast<std::uint32_t>(value.shape().extent(r)));
    }
    for (std::size_t j = 0; j < value.size(); ++j) put_f64(out, value[j]);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  ByteReader r{buf};
  r.need(sizeof(kMagic));
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) {
    if (buf[i] != kMagic[i]) throw DataError("not a checkpoint file: " + path);
  }
  r.pos = sizeof(kMagic);
  Checkpoint c;
  c.version = r.u32();
  if (c.version != 1) throw DataError("unsupported checkpoint version");
  std::map<std::string, std::string> meta;
  const std::uint32_t lines = r.u32();
  for (std::uint32_t i = 0; i < lines; ++i) {
    const std::string line = r.str();
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: bad metadata line");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  try {
    auto it = meta.find("kind");
    if (it == meta.end()) throw DataError("checkpoint missing key: kind");
    c.kind = model_kind_from_string(it->second);
    c.config.rows = static_cast<int>(meta_int(meta, "rows"));
    c.config.cols = static_cast<int>(meta_int(meta, "cols"));
    c.config.look_back = static_cast<int>(meta_int(meta, "look_back"));
    c.config.layers = static_cast<int>(meta_int(meta, "layers"));
    c.config.channels = static_cast<int>(meta_int(meta, "channels"));
    c.config.temporal_hidden =
        static_cast<int>(meta_int(meta, "temporal_hidden"));
    c.config.kernel_size = static_cast<int>(meta_int(meta, "kernel_size"));
    c.config.raster_vars = static_cast<int>(meta_int(meta, "raster_vars"));
    c.config.frozen_feature_weights =
        meta_int(meta, "frozen_feature_weights") != 0;
    c.stats.mean = meta_double(meta, "norm_mean");
    c.stats.std = meta_double(meta, "norm_std");
    c.best_val_loss = meta_double(meta, "best_val_loss");
    c.best_epoch = static_cast<int>(meta_int(meta, "best_epoch"));
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint parse: ") + e.what());
  }
  const std::uint32_t blocks = r.u32();
  for (std::uint32_t i = 0; i < blocks; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 4) throw DataError("checkpoint: bad tensor rank");
    std::vector<int> extents;
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t e = r.u32();
      if (e == 0 || e > (1u << 20)) throw DataError("checkpoint: bad extent");
      extents.push_back(static_cast<int>(e));
      count *= e;
    }
    std::vector<double> values(count);
    for (std::size_t j = 0; j < count; ++j) values[j] = r.f64();
    Shape shape = [&extents]() {
      switch (extents.size()) {
        case 1: return Shape{extents[0]};
        case 2: return Shape{extents[0], extents[1]};
        case 3: return Shape{extents[0], extents[1], extents[2]};
        default: return Shape{extents[0], extents[1], extents[2], extents[3]};
      }
    }();
    c.params.add(name, Tensor(shape, std::move(values)));
  }
  if (r.pos != buf.size()) throw DataError("checkpoint: trailing bytes");
  return c;
}

Model model_from_checkpoint(const Checkpoint& c) {
  std::mt19937_64 rng(0);
  Model m = build_model(c.kind, c.config, rng);
  ParamStore& dst = m.params();
  if (dst.block_count() != c.params.block_count()) {
    throw DataError("checkpoint parameter blocks do not match the model");
  }
  for (std::size_t i = 0; i < dst.block_count(); ++i) {
    auto& [name, value] = dst.block(i);
    const auto& [sname, svalue] = c.params.block(i);
    if (name != sname || !(value.shape() == svalue.shape())) {
      throw DataError("checkpoint block mismatch at '" + sname + "'");
    }
    value = svalue;
  }
  return m;
}

ForecastResult forecast_series(const Model& model, const Dataset& data,
                               const NormalizationStats& stats,
                               std::size_t begin, std::size_t end) {
  const int d = model.config().look_back;
  ForecastResult out;
  const std::vector<Window> windows = build_windows(data, stats, d, begin, end);
  if (windows.empty()) throw DataError("no forecast windows in range");
  for (const Window& w : windows) {
    Tensor pred = model.forward(w.input);
    out.yhat.push_back(clamp_grid(denormalize(pred, stats)));
    out.y.push_back(w.target);
    out.target_index.push_back(w.target_index);
  }
  return out;
}

namespace {

MetricsReport report_from_forecast(const ForecastResult& fc,
                                   const Dataset& data,
                                   const EvalOptions& opt) {
  std::vector<int> hours;
  hours.reserve(fc.target_index.size());
  for (std::size_t t : fc.target_index) {
    hours.push_back(data.demand.timestamps[t].hour);
  }
  MetricsReport r;
  if (!opt.attribute.empty()) {
    const GroupMask mask = build_group_mask(
        data.sociodemo.raster(opt.attribute), opt.threshold, opt.attribute);
    r = point_metrics(fc.y, fc.yhat, &mask, &hours);
  } else {
    r = point_metrics(fc.y, fc.yhat, nullptr, &hours);
  }
  r.label = opt.label;
  return r;
}

}  // namespace

MetricsReport evaluate_model(const Model& model, const Dataset& data,
                             const NormalizationStats& stats,
                             std::size_t begin, std::size_t end,
                             const EvalOptions& opt) {
  return report_from_forecast(forecast_series(model, data, stats, begin, end),
                              data, opt);
}

MetricsReport evaluate_checkpoint(const Checkpoint& c, const Dataset& data,
                                  std::size_t begin, std::size_t end,
                                  const EvalOptions& opt) {
  Model model = model_from_checkpoint(c);
  if (uses_feature_map(c.kind)) model.set_rasters(data.sociodemo.rasters);
  return evaluate_model(model, data, c.stats, begin, end, opt);
}

ForecastResult baseline_forecast_series(ModelKind kind, const Dataset& data,
                                        std::size_t train_end,
                                        std::size_t begin, std::size_t end,
                                        bool ma_same_hour, int look_back) {
  const DemandSeries& demand = data.demand;
  const std::vector<std::size_t> targets =
      window_targets(demand, look_back, begin, end);
  if (targets.empty()) throw DataError("no forecast windows in range");
  ForecastResult out;
  if (kind == ModelKind::kHistoricalAverage) {
    const HistoricalAverageModel model =
        fit_historical_average(demand, 0, train_end);
    for (std::size_t t : targets) {
      out.yhat.push_back(model.predict(demand.timestamps[t]));
    }
  } else if (kind == ModelKind::kMovingAverage) {
    for (std::size_t t : targets) {
      out.yhat.push_back(moving_average_predict(demand, t, ma_same_hour));
    }
  } else if (kind == ModelKind::kSeasonalAr) {
    const SeasonalArModel model = fit_seasonal_ar(demand, 0, train_end);
    for (std::size_t t : targets) out.yhat.push_back(model.predict(demand, t));
  } else {
    throw std::invalid_argument("baseline evaluation expects a classical kind");
  }
  for (std::size_t t : targets) {
    out.y.push_back(demand.grids[t]);
    out.target_index.push_back(t);
  }
  return out;
}

MetricsReport evaluate_baseline(ModelKind kind, const Dataset& data,
                                std::size_t train_end, std::size_t begin,
                                std::size_t end, bool ma_same_hour,
                                const EvalOptions& opt, int look_back) {
  return report_from_forecast(
      baseline_forecast_series(kind, data, train_end, begin, end, ma_same_hour,
                               look_back),
      data, opt);
}

namespace {

struct ValScore {
  double loss = 0.0;
  double mae = 0.0;
  double mpe_gap = 0.0;
};

ValScore validation_pass(const Model& model,
                         const std::vector<Window>& windows,
                         const NormalizationStats& stats, const Tensor& zt,
                         const LossConfig& lc, const GroupMask* mask) {
  std::vector<Tensor> y, yhat_raw, yhat_clamped;
  y.reserve(windows.size());
  for (const Window& w : windows) {
    Tensor pred = denormalize(model.forward(w.input), stats);
    yhat_clamped.push_back(clamp_grid(pred));
    yhat_raw.push_back(std::move(pred));
    y.push_back(w.target);
  }
  ValScore s;
  s.loss = total_loss(y, yhat_raw, zt, lc) / static_cast<double>(windows.size());
  s.mae = unfiltered_mae(y, yhat_clamped);
  if (mask != nullptr) s.mpe_gap = mpe_gap(y, yhat_clamped, *mask);
  return s;
}

}  // namespace

RunResult train_single(ModelKind kind, const Dataset& data,
                       const TrainConfig& cfg, int layers, std::uint64_t seed,
                       const std::string& label) {
  cfg.validate();
  if (!is_neural(kind)) {
    throw ConfigError("train expects a neural model kind, got " +
                      to_string(kind));
  }
  const DemandSeries& demand = data.demand;
  const SplitIndices split =
      split_by_days(demand, cfg.train_frac, cfg.val_frac);
  const NormalizationStats stats = compute_stats(demand, 0, split.train_end);
  const int d = cfg.look_back;
  if (d >= demand.service.slots()) {
    throw DataError("look-back window does not fit inside the service day");
  }
  std::vector<Window> train_w = build_windows(data, stats, d, 0, split.train_end);
  std::vector<Window> val_w =
      build_windows(data, stats, d, split.train_end, split.val_end);
  if (train_w.empty() || val_w.empty()) {
    throw DataError("empty train or validation window set");
  }

  ModelConfig mc;
  mc.rows = demand.rows;
  mc.cols = demand.cols;
  mc.look_back = d;
  mc.layers = layers;
  mc.channels = cfg.channels;
  mc.temporal_hidden = cfg.temporal_hidden;
  mc.kernel_size = cfg.kernel_size;
  mc.raster_vars = uses_feature_map(kind) ? data.sociodemo.var_count() : 0;

  std::mt19937_64 gen(seed);
  Model model = build_model(kind, mc, gen);
  if (uses_feature_map(kind)) model.set_rasters(data.sociodemo.rasters);

  LossConfig lc;
  lc.lambda = cfg.lambda;
  lc.gamma = cfg.gamma;
  Tensor zt = Tensor::zeros(Shape{demand.rows, demand.cols});
  if (cfg.gamma != 0.0) {
    if (cfg.attribute.empty()) {
      throw ConfigError("gamma > 0 requires an attribute");
    }
    zt = normalize_attribute(data.sociodemo.raster(cfg.attribute)).z_tilde;
  }
  GroupMask mask;
  bool have_mask = false;
  if (!cfg.attribute.empty()) {
    mask = build_group_mask(data.sociodemo.raster(cfg.attribute),
                            cfg.threshold, cfg.attribute);
    have_mask = true;
  }

  RunResult result;
  double best_val = 0.0;
  ParamStore best_params = model.params();
  int best_epoch = 0;

  std::vector<std::size_t> order(train_w.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng::shuffle(order, gen);
    double train_sum = 0.0;
    for (std::size_t base = 0; base < order.size();
         base += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), base + static_cast<std::size_t>(cfg.batch_size));
      Tape tape;
      StagedModel staged = model.stage(tape, true);
      std::vector<Var> preds;
      std::vector<Tensor> targets;
      preds.reserve(stop - base);
      for (std::size_t k = base; k < stop; ++k) {
        const Window& w = train_w[order[k]];
        preds.push_back(
            affine(staged.forward(w.input), stats.std, stats.mean));
        targets.push_back(w.target);
      }
      Var loss = total_loss_op(preds, targets, zt, lc);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        throw std::domain_error("non-finite training loss at epoch " +
                                std::to_string(epoch));
      }
      tape.backward(loss);
      std::vector<std::pair<std::string, Tensor>> grads;
      grads.reserve(staged.leaves.size());
      for (const auto& [name, var] : staged.leaves) {
        grads.emplace_back(name, tape.grad(var));
      }
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& [name, g] : grads) {
          for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          const double f = cfg.clip_norm / norm;
          for (auto& [name, g] : grads) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= f;
          }
        }
      }
      sgd_step(model.params(), grads, cfg.step_size);
      train_sum += lv;
    }
    const ValScore vs = validation_pass(model, val_w, stats, zt, lc,
                                        have_mask ? &mask : nullptr);
    if (!std::isfinite(vs.loss)) {
      throw std::domain_error("non-finite validation loss at epoch " +
                              std::to_string(epoch));
    }
    EpochLog el;
    el.epoch = epoch;
    el.train_loss = train_sum / static_cast<double>(train_w.size());
    el.val_loss = vs.loss;
    el.val_mae = vs.mae;
    el.val_mpe_gap = vs.mpe_gap;
    result.log.push_back(el);
    if (epoch == 1 || vs.loss < best_val) {
      best_val = vs.loss;
      best_epoch = epoch;
      best_params = model.params();
    }
  }

  result.checkpoint.kind = kind;
  result.checkpoint.config = mc;
  result.checkpoint.stats = stats;
  result.checkpoint.best_val_loss = best_val;
  result.checkpoint.best_epoch = best_epoch;
  result.checkpoint.params = std::move(best_params);

  EvalOptions opt;
  opt.label = label;
  opt.attribute = cfg.attribute;
  opt.threshold = cfg.threshold;
  result.test_report = evaluate_checkpoint(result.checkpoint, data,
                                           split.val_end, demand.size(), opt);
  return result;
}

TrainResult train(ModelKind kind, const Dataset& data, const TrainConfig& cfg,
                  const std::string& label) {
  cfg.validate();
  TrainResult result;
  for (int run = 0; run < cfg.runs; ++run) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(run);
    RunResult best;
    if (cfg.layer_sweep) {
      bool first = true;
      for (int layers : cfg.sweep_layers) {
        RunResult r = train_single(kind, data, cfg, layers, seed, label);
        if (first || r.checkpoint.best_val_loss < best.checkpoint.best_val_loss) {
          best = std::move(r);
          first = false;
        }
      }
    } else {
      best = train_single(kind, data, cfg, cfg.layers, seed, label);
    }
    result.runs.push_back(std::move(best));
  }
  result.best_run = 0;
  std::vector<MetricsReport> reports;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    reports.push_back(result.runs[i].test_report);
    if (result.runs[i].checkpoint.best_val_loss <
        result.runs[result.best_run].checkpoint.best_val_loss) {
      result.best_run = i;
    }
  }
  result.averaged_test = average_reports(reports);
  result.averaged_test.label = label;
  return result;
}

}  // namespace sanet
