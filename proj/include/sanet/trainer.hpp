#ifndef SANET_TRAINER_HPP_
#define SANET_TRAINER_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sanet/cells.hpp"
#include "sanet/data.hpp"
#include "sanet/metrics.hpp"
#include "sanet/objective.hpp"
#include "sanet/tensor.hpp"

namespace sanet {

struct TrainConfig {
  int batch_size = 64;
  double step_size = 0.001;
  int max_epochs = 300;
  int look_back = 6;  // d
  int runs = 3;
  bool layer_sweep = false;
  std::vector<int> sweep_layers = {1, 2, 3};
  int layers = 1;  // used when layer_sweep is off
  int channels = 64;
  int temporal_hidden = 32;
  int kernel_size = 3;
  std::uint64_t seed = 0;
  double lambda = 10.0;
  double gamma = 0.0;
  std::string attribute;  // sociodemo raster name; empty = no group metrics
  double threshold = 0.5;
  double clip_norm = 0.0;  // global-norm gradient clip; 0 disables
  double train_frac = 265.0 / 418.0;
  double val_frac = 29.0 / 418.0;

  void validate() const;
};

// One training sample: normalized look-back inputs and the raw target grid at
// demand index target_index. Windows never cross a day boundary.
struct Window {
  ModelInput input;
  Tensor target;  // raw counts [M, N]
  std::size_t target_index = 0;
};

// Demand indices usable as window targets in [begin, end): slots at least d
// hours past the day's first in-service hour.
std::vector<std::size_t> window_targets(const DemandSeries& demand, int d,
                                        std::size_t begin, std::size_t end);

std::vector<Window> build_windows(const Dataset& data,
                                  const NormalizationStats& stats, int d,
                                  std::size_t begin, std::size_t end);

// theta <- theta - step_size * g, blockwise by name. Throws
// std::invalid_argument on shape/name mismatch and std::domain_error on a
// non-finite gradient, naming the parameter block.
void sgd_step(ParamStore& params,
              const std::vector<std::pair<std::string, Tensor>>& grads,
              double step_size);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;
  double val_mpe_gap = 0.0;
};

void write_training_log(const std::vector<EpochLog>& log,
                        const std::string& path);

struct Checkpoint {
  std::uint32_t version = 1;
  ModelKind kind = ModelKind::kSaNet;
  ModelConfig config;
  NormalizationStats stats;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  ParamStore params;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model and overwrites its parameters with the stored blocks.
// Rasters must be attached afterwards for kinds that use them.
Model model_from_checkpoint(const Checkpoint& c);

struct EvalOptions {
  std::string label;
  std::string attribute;  // empty = skip group breakdown
  double threshold = 0.5;
};

// Aligned raw targets and clamped raw predictions over the window targets of
// [begin, end), plus each target's demand index.
struct ForecastResult {
  std::vector<Tensor> y;
  std::vector<Tensor> yhat;
  std::vector<std::size_t> target_index;
};

ForecastResult forecast_series(const Model& model, const Dataset& data,
                               const NormalizationStats& stats,
                               std::size_t begin, std::size_t end);

MetricsReport evaluate_model(const Model& model, const Dataset& data,
                             const NormalizationStats& stats,
                             std::size_t begin, std::size_t end,
                             const EvalOptions& opt);

MetricsReport evaluate_checkpoint(const Checkpoint& c, const Dataset& data,
                                  std::size_t begin, std::size_t end,
                                  const EvalOptions& opt);

// Classical baselines evaluated on the same window-target set as the neural
// models (targets at least look_back slots into the day); fit on
// [0, train_end), one-step-ahead over [begin, end).
ForecastResult baseline_forecast_series(ModelKind kind, const Dataset& data,
                                        std::size_t train_end,
                                        std::size_t begin, std::size_t end,
                                        bool ma_same_hour, int look_back = 6);
MetricsReport evaluate_baseline(ModelKind kind, const Dataset& data,
                                std::size_t train_end, std::size_t begin,
                                std::size_t end, bool ma_same_hour,
                                const EvalOptions& opt, int look_back = 6);

struct RunResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  MetricsReport test_report;
};

struct TrainResult {
  std::vector<RunResult> runs;
  std::size_t best_run = 0;  // argmin best_val_loss across runs
  MetricsReport averaged_test;
};

// Full protocol: per run (seed + run index), optionally sweep layer counts
// keeping the sweep winner by validation loss; test metrics averaged across
// runs.
TrainResult train(ModelKind kind, const Dataset& data, const TrainConfig& cfg,
                  const std::string& label);

// One fitted run at a fixed layer count.
RunResult train_single(ModelKind kind, const Dataset& data,
                       const TrainConfig& cfg, int layers, std::uint64_t seed,
                       const std::string& label);

}  // namespace sanet

#endif  // SANET_TRAINER_HPP_
