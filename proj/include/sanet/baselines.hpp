#ifndef SANET_BASELINES_HPP_
#define SANET_BASELINES_HPP_

#include <array>
#include <cstddef>
#include <vector>

#include "sanet/cells.hpp"
#include "sanet/data.hpp"
#include "sanet/tensor.hpp"

namespace sanet {

// Mean demand per (day-of-week, hour) key, per cell, with a per-cell grand
// mean fallback for unseen keys.
struct HistoricalAverageModel {
  int rows = 0;
  int cols = 0;
  ServiceWindow service;
  std::vector<Tensor> key_sum;  // 7 * slots tensors [rows, cols]
  std::vector<long> key_count;  // observations per key (same for all cells)
  Tensor grand_mean;

  double predict_cell(int dow, int hour, int row, int col) const;
  Tensor predict(Timestamp ts) const;
};

HistoricalAverageModel fit_historical_average(const DemandSeries& demand,
                                              std::size_t begin,
                                              std::size_t end);

// Contract form: mean of training observations at (dow, hour, cell).
double historical_average(const DemandSeries& train, int dow, int hour,
                          int row, int col);

// Mean of the supplied window (at most the 6 most recent observations).
double moving_average(const std::vector<double>& history);

// MA forecast for an arbitrary in-service target using observations strictly
// before it. same_hour mode reads the same hour on up to 6 previous days;
// trailing mode reads the previous 6 in-service observations.
Tensor moving_average_forecast(const DemandSeries& series, Timestamp target,
                               bool same_hour, int window = 6);

// One-step-ahead MA prediction at series index t.
Tensor moving_average_predict(const DemandSeries& series, std::size_t t,
                              bool same_hour, int window = 6);

// AR(6) with intercept on a daily subseries: y_t = c + sum a_k y_{t-k},
// least squares with ridge 1e-6 on the normal equations. Needs >= 14
// observations. Returns [c, a_1..a_6].
std::array<double, 7> seasonal_ar_fit(const std::vector<double>& series);
std::array<double, 7> seasonal_ar_fit(const DemandSeries& train,
                                      std::size_t begin, std::size_t end,
                                      int row, int col, int hour);

// Per-(cell, hour) AR coefficients fitted on the training range, falling back
// seasonal AR -> HA key mean -> cell grand mean -> 0.
struct SeasonalArModel {
  int rows = 0;
  int cols = 0;
  ServiceWindow service;
  std::vector<std::array<double, 7>> coef;  // per (hour_slot, cell)
  std::vector<char> has_coef;
  HistoricalAverageModel ha;

  // Forecast for an arbitrary in-service target from observations strictly
  // before it; needs 6 prior same-hour days for the AR path.
  Tensor forecast(const DemandSeries& history, Timestamp target) const;
  // Prediction at index t of `full` using actual observations before t.
  Tensor predict(const DemandSeries& full, std::size_t t) const;
};

SeasonalArModel fit_seasonal_ar(const DemandSeries& demand, std::size_t begin,
                                std::size_t end);

// One-step-ahead forecasts for a classical kind over [begin, end) of `full`,
// fitted on [0, train_end). Predictions are clamped non-negative.
std::vector<Tensor> baseline_forecast(ModelKind kind,
                                      const DemandSeries& full,
                                      std::size_t train_end, std::size_t begin,
                                      std::size_t end, bool ma_same_hour);

}  // namespace sanet

#endif  // SANET_BASELINES_HPP_
