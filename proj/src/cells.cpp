#include "sanet/cells.hpp"

#include <cmath>
#include <stdexcept>

#include "sanet/rng.hpp"

namespace sanet {

namespace {

Tensor tadd(const Tensor& a, const Tensor& b) {
  detail::require(a.shape() == b.shape(), "add: shape mismatch");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

Tensor linear_any(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape().rank() == 1) return dense(x, w, b);
  detail::require(x.shape().rank() == 2, "dense: x must be rank 1 or 2");
  Tensor y = Tensor::zeros(Shape{x.shape().extent(0), w.shape().extent(0)});
  detail::linear_rows_forward(y, x, w, b);
  return y;
}

}  // namespace

std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x,
                                    const Tensor& h, const Tensor& c) {
  detail::require(h.shape() == c.shape(), "lstm_step: state shape mismatch");
  Tensor zb = Tensor::zeros(Shape{p.w_hi.shape().extent(0)});
  Tensor i = activate(tadd(linear_any(x, p.w_xi, p.b_i),
                           linear_any(h, p.w_hi, zb)),
                      Act::kSigmoid);
  Tensor f = activate(tadd(linear_any(x, p.w_xf, p.b_f),
                           linear_any(h, p.w_hf, zb)),
                      Act::kSigmoid);
  Tensor g = activate(tadd(linear_any(x, p.w_xc, p.b_c),
                           linear_any(h, p.w_hc, zb)),
                      Act::kTanh);
  Tensor cn = tadd(hadamard(f, c), hadamard(i, g));
  Tensor o = activate(tadd(linear_any(x, p.w_xo, p.b_o),
                           linear_any(h, p.w_ho, zb)),
                      Act::kSigmoid);
  Tensor hn = hadamard(o, activate(cn, Act::kTanh));
  return {std::move(hn), std::move(cn)};
}

namespace {

SpatialState recurrent_step_impl(const ConvRecurrentParams& p, const Tensor& x,
                                 const SpatialState& s, const Tensor* field) {
  detail::require(s.h.shape() == s.c.shape(),
                  "recurrent step: state shape mismatch");
  const int o = p.w_hi.shape().extent(0);
  const double* fptr = field != nullptr ? field->data() : nullptr;
  auto cv = [&](const Tensor& in, const Tensor& w, const Tensor& b) {
    Tensor y = Tensor::zeros(
        Shape{w.shape().extent(0), in.shape().extent(1), in.shape().extent(2)});
    detail::conv2d_forward(y, in, w, b, fptr);
    return y;
  };
  Tensor zb = Tensor::zeros(Shape{o});
  Tensor i = activate(tadd(tadd(cv(x, p.w_xi, p.b_i), cv(s.h, p.w_hi, zb)),
                           hadamard(p.w_ci, s.c)),
                      Act::kSigmoid);
  Tensor f = activate(tadd(tadd(cv(x, p.w_xf, p.b_f), cv(s.h, p.w_hf, zb)),
                           hadamard(p.w_cf, s.c)),
                      Act::kSigmoid);
  Tensor g = activate(tadd(cv(x, p.w_xc, p.b_c), cv(s.h, p.w_hc, zb)),
                      Act::kTanh);
  Tensor cn = tadd(hadamard(f, s.c), hadamard(i, g));
  Tensor og = activate(tadd(tadd(cv(x, p.w_xo, p.b_o), cv(s.h, p.w_ho, zb)),
                            hadamard(p.w_co, cn)),
                       Act::kSigmoid);
  Tensor hn = hadamard(og, activate(cn, Act::kTanh));
  return {std::move(hn), std::move(cn)};
}

}  // namespace

SpatialState conv_lstm_step(const ConvRecurrentParams& p, const Tensor& x,
                            const SpatialState& s) {
  return recurrent_step_impl(p, x, s, nullptr);
}

SpatialState sac_lstm_step(const ConvRecurrentParams& p, const Tensor& x,
                           const SpatialState& s, const Tensor& field) {
  detail::require(field.shape() == (Shape{x.shape().extent(1),
                                          x.shape().extent(2),
                                          p.w_xi.shape().extent(2),
                                          p.w_xi.shape().extent(3)}),
                  "sac_lstm_step: field/grid mismatch");
  return recurrent_step_impl(p, x, s, &field);
}

Tensor replicate_spatial(double x, int rows, int cols) {
  detail::require(std::isfinite(x), "replicate_spatial: non-finite input");
  return Tensor::full(Shape{rows, cols}, x);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kHistoricalAverage: return "ha";
    case ModelKind::kMovingAverage: return "ma";
    case ModelKind::kSeasonalAr: return "seasonal_ar";
    case ModelKind::kLstm: return "lstm";
    case ModelKind::kLstmSocial: return "lstm_social";
    case ModelKind::kConvLstm: return "conv_lstm";
    case ModelKind::kConvLstmSocial: return "conv_lstm_social";
    case ModelKind::kSaNet: return "sa_net";
  }
  throw std::invalid_argument("to_string: bad model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "ha") return ModelKind::kHistoricalAverage;
  if (name == "ma") return ModelKind::kMovingAverage;
  if (name == "seasonal_ar") return ModelKind::kSeasonalAr;
  if (name == "lstm") return ModelKind::kLstm;
  if (name == "lstm_social") return ModelKind::kLstmSocial;
  if (name == "conv_lstm") return ModelKind::kConvLstm;
  if (name == "conv_lstm_social") return ModelKind::kConvLstmSocial;
  if (name == "sa_net") return ModelKind::kSaNet;
  throw std::invalid_argument(
      "unknown model kind '" + name +
      "' (expected ha, ma, seasonal_ar, lstm, lstm_social, conv_lstm, "
      "conv_lstm_social, sa_net)");
}

bool is_neural(ModelKind kind) {
  return kind == ModelKind::kLstm || kind == ModelKind::kLstmSocial ||
         kind == ModelKind::kConvLstm || kind == ModelKind::kConvLstmSocial ||
         kind == ModelKind::kSaNet;
}

bool uses_social_fusion(ModelKind kind) {
  return kind == ModelKind::kLstmSocial || kind == ModelKind::kConvLstmSocial;
}

bool uses_feature_map(ModelKind kind) {
  return uses_social_fusion(kind) || kind == ModelKind::kSaNet;
}

Tensor& ParamStore::add(std::string name, Tensor value) {
  detail::require(!has(name), "param block already present: " + name);
  blocks_.emplace_back(std::move(name), std::move(value));
  return blocks_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
  for (auto& [n, t] : blocks_)
    if (n == name) return t;
  throw std::invalid_argument("unknown param block: " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : blocks_)
    if (n == name) return t;
  throw std::invalid_argument("unknown param block: " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& [n, t] : blocks_)
    if (n == name) return true;
  return false;
}

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : blocks_) n += t.size();
  return n;
}

namespace {

Tensor xavier(Shape shape, double fan_in, double fan_out,
              std::mt19937_64& rng) {
  double lim = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = rng::uniform(rng, -lim, lim);
  return t;
}

// Gate blocks of a vanilla LSTM for input dim k, hidden dim h.
void add_lstm_blocks(ParamStore& ps, const std::string& prefix, int k, int h,
                     std::mt19937_64& rng) {
  const char* gates[4] = {"i", "f", "c", "o"};
  for (const char* g : gates) {
    ps.add(prefix + ".w_x" + g, xavier(Shape{h, k}, k, h, rng));
    ps.add(prefix + ".w_h" + g, xavier(Shape{h, h}, h, h, rng));
    double b0 = std::string(g) == "f" ? 1.0 : 0.0;
    ps.add(prefix + ".b_" + g, Tensor::full(Shape{h}, b0));
  }
}

// Gate blocks of the convolutional recurrence for input channels in_ch.
void add_conv_blocks(ParamStore& ps, const std::string& prefix, int in_ch,
                     int o, int v, int rows, int cols, std::mt19937_64& rng) {
  const double cell_fan = static_cast<double>(rows) * cols;
  const char* gates[4] = {"i", "f", "c", "o"};
  for (const char* g : gates) {
    std::string gs(g);
    ps.add(prefix + ".w_x" + gs,
           xavier(Shape{o, in_ch, v, v}, in_ch * v * v, o * v * v, rng));
    ps.add(prefix + ".w_h" + gs,
           xavier(Shape{o, o, v, v}, o * v * v, o * v * v, rng));
    if (gs != "c")
      ps.add(prefix + ".w_c" + gs,
             xavier(Shape{o, rows, cols}, cell_fan, cell_fan, rng));
    ps.add(prefix + ".b_" + gs,
           Tensor::full(Shape{o}, gs == "f" ? 1.0 : 0.0));
  }
}

void validate_config(ModelKind kind, const ModelConfig& c) {
  detail::require(c.rows > 0 && c.cols > 0, "model config: bad grid extents");
  detail::require(c.look_back >= 1, "model config: look_back must be >= 1");
  detail::require(c.layers >= 1 && c.layers <= 3,
                  "model config: layers must be in {1,2,3}");
  detail::require(c.channels > 0, "model config: channels must be positive");
  detail::require(c.temporal_hidden > 0,
                  "model config: temporal_hidden must be positive");
  detail::require(c.kernel_size >= 1 && c.kernel_size % 2 == 1,
                  "model config: kernel_size must be odd");
  if (uses_feature_map(kind))
    detail::require(c.raster_vars > 0,
                    "model config: raster_vars required for this kind");
}

}  // namespace

Model build_model(ModelKind kind, const ModelConfig& config,
                  std::mt19937_64& rng) {
  detail::require(is_neural(kind),
                  "build_model: '" + to_string(kind) + "' is not a neural kind");
  validate_config(kind, config);
  Model m;
  m.kind_ = kind;
  m.config_ = config;
  ParamStore& ps = m.params_;
  const int rows = config.rows, cols = config.cols;
  const int o = config.channels, v = config.kernel_size;
  const int ht = config.temporal_hidden;

  if (uses_feature_map(kind))
    ps.add("feature.w",
           Tensor::full(Shape{config.raster_vars},
                        1.0 / std::sqrt(static_cast<double>(config.raster_vars))));

  if (kind == ModelKind::kLstm || kind == ModelKind::kLstmSocial) {
    for (int l = 0; l < config.layers; ++l)
      add_lstm_blocks(ps, "cell.l" + std::to_string(l), l == 0 ? 1 : o, o, rng);
    ps.add("readout.w", xavier(Shape{1, o}, o, 1, rng));
    ps.add("readout.b", Tensor::zeros(Shape{1}));
  } else {
    for (int l = 0; l < config.layers; ++l)
      add_conv_blocks(ps, "cell.l" + std::to_string(l), l == 0 ? 1 : o, o, v,
                      rows, cols, rng);
    ps.add("readout.w",
           xavier(Shape{1, o, v, v}, o * v * v, 1 * v * v, rng));
    ps.add("readout.b", Tensor::zeros(Shape{1}));
  }

  if (kind == ModelKind::kSaNet) {
    add_lstm_blocks(ps, "vbranch", 3, ht, rng);
    ps.add("vbranch.readout.w", xavier(Shape{1, ht}, ht, 1, rng));
    ps.add("vbranch.readout.b", Tensor::zeros(Shape{1}));
    add_lstm_blocks(ps, "pbranch", 1, ht, rng);
    ps.add("pbranch.readout.w", xavier(Shape{1, ht}, ht, 1, rng));
    ps.add("pbranch.readout.b", Tensor::zeros(Shape{1}));
    ps.add("fusion.w_u", Tensor::full(Shape{rows, cols}, 1.0));
    ps.add("fusion.w_v", Tensor::zeros(Shape{rows, cols}));
    ps.add("fusion.w_p", Tensor::zeros(Shape{rows, cols}));
  }
  if (uses_social_fusion(kind))
    ps.add("fusion.w_s", Tensor::zeros(Shape{rows, cols}));
  return m;
}

void Model::set_rasters(const std::vector<Tensor>& raw) {
  detail::require(uses_feature_map(kind_),
                  "set_rasters: kind does not use rasters");
  detail::require(static_cast<int>(raw.size()) == config_.raster_vars,
                  "set_rasters: raster count mismatch");
  for (const Tensor& r : raw)
    detail::require(r.shape() == (Shape{config_.rows, config_.cols}),
                    "set_rasters: raster shape mismatch");
  rasters_ = standardize_rasters(raw);
}

Var StagedModel::leaf(const std::string& name) const {
  for (const auto& [n, v] : leaves)
    if (n == name) return v;
  throw std::invalid_argument("staged model: no leaf named " + name);
}

StagedModel Model::stage(Tape& tape, bool trainable) const {
  StagedModel s;
  s.tape = &tape;
  s.model = this;
  for (std::size_t i = 0; i < params_.block_count(); ++i) {
    const auto& [name, value] = params_.block(i);
    bool rg = trainable &&
              !(name == "feature.w" && config_.frozen_feature_weights);
    s.leaves.emplace_back(name, tape.leaf(value, rg));
  }
  if (uses_feature_map(kind_)) {
    detail::require(!rasters_.empty(), "model: rasters not set");
    s.feature = feature_map_op(s.leaf("feature.w"), rasters_);
    if (kind_ == ModelKind::kSaNet)
      s.field = adapting_field_op(s.feature, config_.kernel_size);
  }
  return s;
}

namespace {

// Demand step `s` as channel-major [1,M,N] or cell-major rows [M*N,1].
Tensor demand_step_plane(const Tensor& demand, int s, int rows, int cols) {
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  std::vector<double> vals(demand.data() + s * plane,
                           demand.data() + (s + 1) * plane);
  return Tensor(Shape{1, rows, cols}, std::move(vals));
}

Tensor demand_step_rows(const Tensor& demand, int s, int rows, int cols) {
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  std::vector<double> vals(demand.data() + s * plane,
                           demand.data() + (s + 1) * plane);
  return Tensor(Shape{rows * cols, 1}, std::move(vals));
}

// Runs the v/p temporal branch and returns its replicated spatial grid.
Var temporal_branch(const StagedModel& sm, const std::string& prefix,
                    const std::vector<Tensor>& inputs, int rows, int cols) {
  Tape& t = *sm.tape;
  const int h = sm.model->config().temporal_hidden;
  Var zb = t.leaf(Tensor::zeros(Shape{h}));
  Var hv = t.leaf(Tensor::zeros(Shape{h}));
  Var cv = t.leaf(Tensor::zeros(Shape{h}));
  Var w_xi = sm.leaf(prefix + ".w_xi"), w_hi = sm.leaf(prefix + ".w_hi");
  Var w_xf = sm.leaf(prefix + ".w_xf"), w_hf = sm.leaf(prefix + ".w_hf");
  Var w_xc = sm.leaf(prefix + ".w_xc"), w_hc = sm.leaf(prefix + ".w_hc");
  Var w_xo = sm.leaf(prefix + ".w_xo"), w_ho = sm.leaf(prefix + ".w_ho");
  Var b_i = sm.leaf(prefix + ".b_i"), b_f = sm.leaf(prefix + ".b_f");
  Var b_c = sm.leaf(prefix + ".b_c"), b_o = sm.leaf(prefix + ".b_o");
  for (const Tensor& in : inputs) {
    Var x = t.leaf(in);
    Var i = activate(add(linear(x, w_xi, b_i), linear(hv, w_hi, zb)),
                     Act::kSigmoid);
    Var f = activate(add(linear(x, w_xf, b_f), linear(hv, w_hf, zb)),
                     Act::kSigmoid);
    Var g = activate(add(linear(x, w_xc, b_c), linear(hv, w_hc, zb)),
                     Act::kTanh);
    cv = add(mul(f, cv), mul(i, g));
    Var o = activate(add(linear(x, w_xo, b_o), linear(hv, w_ho, zb)),
                     Act::kSigmoid);
    hv = mul(o, activate(cv, Act::kTanh));
  }
  Var scalar = linear(hv, sm.leaf(prefix + ".readout.w"),
                      sm.leaf(prefix + ".readout.b"));
  return replicate_spatial(scalar, rows, cols);
}

}  // namespace

Var StagedModel::forward(const ModelInput& in) const {
  const Model& m = *model;
  const ModelConfig& cfg = m.config();
  const ModelKind kind = m.kind();
  Tape& t = *tape;
  const int d = cfg.look_back, rows = cfg.rows, cols = cfg.cols;
  detail::require(in.demand.shape() == (Shape{d, rows, cols}),
                  "forward: demand window shape mismatch");
  if (kind == ModelKind::kSaNet) {
    detail::require(in.calendar.shape() == (Shape{d + 1, 3}),
                    "forward: calendar window must have d+1 rows of (tod, dow, holiday)");
    detail::require(in.precip.shape() == (Shape{d}),
                    "forward: precipitation window length mismatch");
  }

  Var pred;
  if (kind == ModelKind::kLstm || kind == ModelKind::kLstmSocial) {
    const int cells = rows * cols, h = cfg.channels;
    Var zb = t.leaf(Tensor::zeros(Shape{h}));
    std::vector<Var> seq(d);
    for (int s = 0; s < d; ++s)
      seq[s] = t.leaf(demand_step_rows(in.demand, s, rows, cols));
    Var last;
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = "cell.l" + std::to_string(l);
      Var w_xi = leaf(p + ".w_xi"), w_hi = leaf(p + ".w_hi");
      Var w_xf = leaf(p + ".w_xf"), w_hf = leaf(p + ".w_hf");
      Var w_xc = leaf(p + ".w_xc"), w_hc = leaf(p + ".w_hc");
      Var w_xo = leaf(p + ".w_xo"), w_ho = leaf(p + ".w_ho");
      Var b_i = leaf(p + ".b_i"), b_f = leaf(p + ".b_f");
      Var b_c = leaf(p + ".b_c"), b_o = leaf(p + ".b_o");
      Var hv = t.leaf(Tensor::zeros(Shape{cells, h}));
      Var cv = t.leaf(Tensor::zeros(Shape{cells, h}));
      for (int s = 0; s < d; ++s) {
        Var x = seq[s];
        Var i = activate(add(linear(x, w_xi, b_i), linear(hv, w_hi, zb)),
                         Act::kSigmoid);
        Var f = activate(add(linear(x, w_xf, b_f), linear(hv, w_hf, zb)),
                         Act::kSigmoid);
        Var g = activate(add(linear(x, w_xc, b_c), linear(hv, w_hc, zb)),
                         Act::kTanh);
        cv = add(mul(f, cv), mul(i, g));
        Var o = activate(add(linear(x, w_xo, b_o), linear(hv, w_ho, zb)),
                         Act::kSigmoid);
        hv = mul(o, activate(cv, Act::kTanh));
        seq[s] = hv;
      }
      last = hv;
    }
    pred = reshape(linear(last, leaf("readout.w"), leaf("readout.b")),
                   Shape{rows, cols});
  } else {
    const int o = cfg.channels;
    const bool adapting = kind == ModelKind::kSaNet;
    auto cv_op = [&](Var x, Var w, Var b) {
      return adapting ? sac_conv2d(x, w, b, field) : conv2d(x, w, b);
    };
    Var zb = t.leaf(Tensor::zeros(Shape{o}));
    std::vector<Var> seq(d);
    for (int s = 0; s < d; ++s)
      seq[s] = t.leaf(demand_step_plane(in.demand, s, rows, cols));
    Var last;
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = "cell.l" + std::to_string(l);
      Var w_xi = leaf(p + ".w_xi"), w_hi = leaf(p + ".w_hi");
      Var w_ci = leaf(p + ".w_ci");
      Var w_xf = leaf(p + ".w_xf"), w_hf = leaf(p + ".w_hf");
      Var w_cf = leaf(p + ".w_cf");
      Var w_xc = leaf(p + ".w_xc"), w_hc = leaf(p + ".w_hc");
      Var w_xo = leaf(p + ".w_xo"), w_ho = leaf(p + ".w_ho");
      Var w_co = leaf(p + ".w_co");
      Var b_i = leaf(p + ".b_i"), b_f = leaf(p + ".b_f");
      Var b_c = leaf(p + ".b_c"), b_o = leaf(p + ".b_o");
      Var hv = t.leaf(Tensor::zeros(Shape{o, rows, cols}));
      Var cs = t.leaf(Tensor::zeros(Shape{o, rows, cols}));
      for (int s = 0; s < d; ++s) {
        Var x = seq[s];
        Var i = activate(add(add(cv_op(x, w_xi, b_i), cv_op(hv, w_hi, zb)),
                             mul(w_ci, cs)),
                         Act::kSigmoid);
        Var f = activate(add(add(cv_op(x, w_xf, b_f), cv_op(hv, w_hf, zb)),
                             mul(w_cf, cs)),
                         Act::kSigmoid);
        Var g = activate(add(cv_op(x, w_xc, b_c), cv_op(hv, w_hc, zb)),
                         Act::kTanh);
        cs = add(mul(f, cs), mul(i, g));
        Var og = activate(add(add(cv_op(x, w_xo, b_o), cv_op(hv, w_ho, zb)),
                              mul(w_co, cs)),
                          Act::kSigmoid);
        hv = mul(og, activate(cs, Act::kTanh));
        seq[s] = hv;
      }
      last = hv;
    }
    Var xu = reshape(cv_op(last, leaf("readout.w"), leaf("readout.b")),
                     Shape{rows, cols});
    if (kind == ModelKind::kSaNet) {
      std::vector<Tensor> vrows;
      for (int s = 0; s <= d; ++s)
        vrows.push_back(Tensor(
            Shape{3}, {in.calendar[3 * s], in.calendar[3 * s + 1],
                       in.calendar[3 * s + 2]}));
      std::vector<Tensor> prows;
      for (int s = 0; s < d; ++s)
        prows.push_back(Tensor(Shape{1}, {in.precip[s]}));
      Var xv = temporal_branch(*this, "vbranch", vrows, rows, cols);
      Var xp = temporal_branch(*this, "pbranch", prows, rows, cols);
      pred = add(add(mul(leaf("fusion.w_u"), xu), mul(leaf("fusion.w_v"), xv)),
                 mul(leaf("fusion.w_p"), xp));
    } else {
      pred = xu;
    }
  }
  if (uses_social_fusion(kind))
    pred = add(pred, mul(leaf("fusion.w_s"), feature));
  return pred;
}

Tensor Model::forward(const ModelInput& in) const {
  Tape t;
  StagedModel s = stage(t, false);
  Var y = s.forward(in);
  return t.value(y);
}

}  // namespace sanet
