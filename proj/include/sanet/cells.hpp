#ifndef SANET_CELLS_HPP_
#define SANET_CELLS_HPP_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sanet/geo.hpp"
#include "sanet/tape.hpp"
#include "sanet/tensor.hpp"

namespace sanet {

// Vanilla LSTM parameters for input dim K and hidden dim H (no peepholes).
struct LstmParams {
  Tensor w_xi, w_hi, b_i;  // [H,K], [H,H], [H]
  Tensor w_xf, w_hf, b_f;
  Tensor w_xc, w_hc, b_c;
  Tensor w_xo, w_ho, b_o;
};

// Convolutional recurrence parameters for hidden channels O on an MxN grid.
// Every gate weight is a convolution kernel; peepholes are full OxMxN tensors
// applied elementwise.
struct ConvRecurrentParams {
  Tensor w_xi, w_hi, w_ci, b_i;  // [O,I,V,V], [O,O,V,V], [O,M,N], [O]
  Tensor w_xf, w_hf, w_cf, b_f;
  Tensor w_xc, w_hc, b_c;
  Tensor w_xo, w_ho, w_co, b_o;
};

struct SpatialState {
  Tensor h;  // [O,M,N], every entry in (-1,1) after a step
  Tensor c;  // [O,M,N]
};

// One step of a vanilla LSTM. x is a K-vector or an RxK matrix of rows
// stepped independently; h and c match ([H] or [R,H]). Returns (h', c').
std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x,
                                    const Tensor& h, const Tensor& c);

// One step of the convolutional recurrence with spatially-invariant kernels.
SpatialState conv_lstm_step(const ConvRecurrentParams& p, const Tensor& x,
                            const SpatialState& s);

// Same recurrence with every convolution modulated by the adapting-kernel
// field. A field of all ones (in bounds) reproduces conv_lstm_step bitwise.
SpatialState sac_lstm_step(const ConvRecurrentParams& p, const Tensor& x,
                           const SpatialState& s, const Tensor& field);

Tensor replicate_spatial(double x, int rows, int cols);

enum class ModelKind {
  kHistoricalAverage,
  kMovingAverage,
  kSeasonalAr,
  kLstm,
  kLstmSocial,
  kConvLstm,
  kConvLstmSocial,
  kSaNet,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool is_neural(ModelKind kind);
// Kinds with the additive social fusion term at the output.
bool uses_social_fusion(ModelKind kind);
// Kinds needing socio-demographic rasters at all (feature map or fusion).
bool uses_feature_map(ModelKind kind);

struct ModelConfig {
  int rows = 0;
  int cols = 0;
  int look_back = 6;       // d
  int layers = 1;          // stacked recurrent layers, in {1,2,3}
  int channels = 64;       // hidden channels O; hidden width of the grid LSTM
  int temporal_hidden = 32;  // hidden width of the calendar/precip branches
  int kernel_size = 3;     // V, odd
  int raster_vars = 0;     // P; required > 0 when the kind uses rasters
  bool frozen_feature_weights = false;
};

// One forward-pass input. demand is the normalized look-back block [d,M,N];
// calendar holds d+1 rows (tod, dow, holiday) ending at the target step;
// precip holds the d look-back precipitation values.
struct ModelInput {
  Tensor demand;
  Tensor calendar;
  Tensor precip;
};

// Named parameter blocks in fixed insertion order.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor value);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t value_count() const;
  const std::pair<std::string, Tensor>& block(std::size_t i) const {
    return blocks_[i];
  }
  std::pair<std::string, Tensor>& block(std::size_t i) { return blocks_[i]; }

 private:
  std::vector<std::pair<std::string, Tensor>> blocks_;
};

class Model;

// Parameters staged onto a tape as named leaves, plus the per-tape feature
// map / adapting field nodes shared by every window in a batch.
struct StagedModel {
  Tape* tape = nullptr;
  const Model* model = nullptr;
  std::vector<std::pair<std::string, Var>> leaves;
  Var feature;  // valid when the kind uses the feature map
  Var field;    // valid for the adapting-kernel model

  Var leaf(const std::string& name) const;
  Var forward(const ModelInput& in) const;
};

class Model {
 public:
  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const std::vector<Tensor>& standardized_rasters() const { return rasters_; }

  // Raw rasters; standardized internally. Required for kinds using them.
  void set_rasters(const std::vector<Tensor>& raw);

  Tensor forward(const ModelInput& in) const;

  StagedModel stage(Tape& tape, bool trainable) const;

  friend Model build_model(ModelKind kind, const ModelConfig& config,
                           std::mt19937_64& rng);

 private:
  ModelKind kind_ = ModelKind::kSaNet;
  ModelConfig config_;
  ParamStore params_;
  std::vector<Tensor> rasters_;
};

// Constructs and initializes a neural model. Throws on classical kinds.
Model build_model(ModelKind kind, const ModelConfig& config,
                  std::mt19937_64& rng);

}  // namespace sanet

#endif  // SANET_CELLS_HPP_
