#ifndef SANET_RUNCONFIG_HPP_
#define SANET_RUNCONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sanet/data.hpp"
#include "sanet/trainer.hpp"

namespace sanet {

// Flat key = value run configuration shared by every subcommand. Unknown
// keys are errors.
struct RunConfig {
  std::string model = "sa_net";
  int grid_rows = 8;
  int grid_cols = 8;
  int look_back = 6;
  int batch_size = 64;
  double step_size = 0.001;
  int max_epochs = 300;
  double gamma = 0.0;
  double lambda = 10.0;
  std::string attribute;  // empty = no group breakdown / fairness term
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int runs = 3;
  bool layer_sweep = false;
  int layers = 1;
  int channels = 64;
  int temporal_hidden = 32;
  int kernel_size = 3;
  double clip_norm = 0.0;
  std::string demand_path = "demand.csv";
  std::string sociodemo_path = "sociodemo.csv";
  std::string weather_path = "weather.csv";
  std::string holidays_path = "holidays.txt";
  std::string output_dir = ".";
  std::string checkpoint_path;  // default: <output_dir>/checkpoint.bin
  int synth_days = 120;
  double split_train = 265.0 / 418.0;
  double split_val = 29.0 / 418.0;
  std::string ma_mode = "same_hour";  // or "trailing"
  int service_start_hour = 6;
  int service_end_hour = 22;
  std::string eval_split = "test";  // train | val | test
  std::string label;                // default: model name
  std::string predict_target;      // empty = one hour past the last record
};

// Applies one key=value pair; unknown key or malformed value -> ConfigError.
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

// Loads `path` (empty = defaults only), then applies `overrides`, each of the
// form key=value.
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides);

ServiceWindow service_window(const RunConfig& cfg);
TrainConfig to_train_config(const RunConfig& cfg);
std::string resolved_checkpoint_path(const RunConfig& cfg);

// Subcommand bodies. Each throws ConfigError / DataError / std::domain_error
// on failure; the CLI maps those to exit codes 1 / 2 / 3.
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_predict(const RunConfig& cfg);
void cmd_map(const RunConfig& cfg);
void cmd_report(const RunConfig& cfg, const std::vector<std::string>& inputs);

}  // namespace sanet

#endif  // SANET_RUNCONFIG_HPP_
