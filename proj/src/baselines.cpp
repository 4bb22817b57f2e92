#include "sanet/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace sanet {

namespace {

void check_range(const DemandSeries& demand, std::size_t begin,
                 std::size_t end) {
  if (begin >= end || end > demand.size()) {
    throw std::invalid_argument("baseline fit range is empty or out of bounds");
  }
}

int key_index(const ServiceWindow& service, int dow, int hour) {
  return dow * service.slots() + (hour - service.start_hour);
}

}  // namespace

double HistoricalAverageModel::predict_cell(int dow, int hour, int row,
                                            int col) const {
  if (dow < 0 || dow > 6 || !service.contains(hour)) {
    throw std::invalid_argument("historical average key out of range");
  }
  const int key = key_index(service, dow, hour);
  if (key_count[static_cast<std::size_t>(key)] > 0) {
    return key_sum[static_cast<std::size_t>(key)].at2(row, col) /
           static_cast<double>(key_count[static_cast<std::size_t>(key)]);
  }
  return grand_mean.at2(row, col);
}

Tensor HistoricalAverageModel::predict(Timestamp ts) const {
  const int dow = day_of_week(ts.day);
  Tensor out = Tensor::zeros(Shape{rows, cols});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(r * cols + c)] =
          predict_cell(dow, ts.hour, r, c);
    }
  }
  return out;
}

HistoricalAverageModel fit_historical_average(const DemandSeries& demand,
                                              std::size_t begin,
                                              std::size_t end) {
  check_range(demand, begin, end);
  HistoricalAverageModel model;
  model.rows = demand.rows;
  model.cols = demand.cols;
  model.service = demand.service;
  const int keys = 7 * demand.service.slots();
  model.key_sum.assign(static_cast<std::size_t>(keys),
                       Tensor::zeros(Shape{demand.rows, demand.cols}));
  model.key_count.assign(static_cast<std::size_t>(keys), 0);
  model.grand_mean = Tensor::zeros(Shape{demand.rows, demand.cols});
  const std::size_t cells =
      static_cast<std::size_t>(demand.rows) * static_cast<std::size_t>(demand.cols);
  for (std::size_t t = begin; t < end; ++t) {
    const Timestamp ts = demand.timestamps[t];
    const int key = key_index(demand.service, day_of_week(ts.day), ts.hour);
    Tensor& sum = model.key_sum[static_cast<std::size_t>(key)];
    const Tensor& grid = demand.grids[t];
    for (std::size_t i = 0; i < cells; ++i) {
      sum[i] += grid[i];
      model.grand_mean[i] += grid[i];
    }
    ++model.key_count[static_cast<std::size_t>(key)];
  }
  const double steps = static_cast<double>(end - begin);
  for (std::size_t i = 0; i < cells; ++i) model.grand_mean[i] /= steps;
  return model;
}

double historical_average(const DemandSeries& train, int dow, int hour,
                          int row, int col) {
  const HistoricalAverageModel model =
      fit_historical_average(train, 0, train.size());
  return model.predict_cell(dow, hour, row, col);
}

double moving_average(const std::vector<double>& history) {
  if (history.empty()) {
    throw std::invalid_argument("moving average needs at least 1 observation");
  }
  double sum = 0.0;
  for (double v : history) sum += v;
  return sum / static_cast<double>(history.size());
}

Tensor moving_average_forecast(const DemandSeries& series, Timestamp target,
                               bool same_hour, int window) {
  if (window < 1) throw std::invalid_argument("moving average window < 1");
  std::vector<std::size_t> picks;
  for (std::size_t i = series.size(); i-- > 0;) {
    const Timestamp ts = series.timestamps[i];
    if (!(ts < target)) continue;
    if (same_hour && (ts.hour != target.hour || ts.day >= target.day)) {
      continue;
    }
    picks.push_back(i);
    if (static_cast<int>(picks.size()) == window) break;
  }
  if (picks.empty()) {
    throw std::invalid_argument("moving average has no prior observation");
  }
  const std::size_t cells =
      static_cast<std::size_t>(series.rows) * static_cast<std::size_t>(series.cols);
  Tensor out = Tensor::zeros(Shape{series.rows, series.cols});
  for (std::size_t i : picks) {
    const Tensor& grid = series.grids[i];
    for (std::size_t c = 0; c < cells; ++c) out[c] += grid[c];
  }
  for (std::size_t c = 0; c < cells; ++c) {
    out[c] /= static_cast<double>(picks.size());
  }
  return out;
}

Tensor moving_average_predict(const DemandSeries& series, std::size_t t,
                              bool same_hour, int window) {
  if (t >= series.size()) {
    throw std::invalid_argument("moving average index out of range");
  }
  return moving_average_forecast(series, series.timestamps[t], same_hour,
                                 window);
}

std::array<double, 7> seasonal_ar_fit(const std::vector<double>& series) {
  constexpr int kOrder = 6;
  const std::size_t n = series.size();
  if (n < 2 * kOrder + 2) {
    throw std::invalid_argument(
        "seasonal AR fit needs at least 14 observations");
  }
  const std::size_t samples = n - kOrder;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples), kOrder + 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples));
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t t = s + kOrder;
    const Eigen::Index r = static_cast<Eigen::Index>(s);
    x(r, 0) = 1.0;
    for (int k = 1; k <= kOrder; ++k) {
      x(r, k) = series[t - static_cast<std::size_t>(k)];
    }
    y(r) = series[t];
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  for (int i = 0; i <= kOrder; ++i) gram(i, i) += 1e-6;
  const Eigen::VectorXd beta = gram.ldlt().solve(x.transpose() * y);
  std::array<double, 7> out{};
  for (int i = 0; i <= kOrder; ++i) out[static_cast<std::size_t>(i)] = beta(i);
  return out;
}

std::array<double, 7> seasonal_ar_fit(const DemandSeries& train,
                                      std::size_t begin, std::size_t end,
                                      int row, int col, int hour) {
  check_range(train, begin, end);
  std::vector<double> daily;
  for (std::size_t t = begin; t < end; ++t) {
    if (train.timestamps[t].hour == hour) {
      daily.push_back(train.grids[t].at2(row, col));
    }
  }
  return seasonal_ar_fit(daily);
}

SeasonalArModel fit_seasonal_ar(const DemandSeries& demand, std::size_t begin,
                                std::size_t end) {
  check_range(demand, begin, end);
  SeasonalArModel model;
  model.rows = demand.rows;
  model.cols = demand.cols;
  model.service = demand.service;
  model.ha = fit_historical_average(demand, begin, end);
  const int slots = demand.service.slots();
  const std::size_t cells =
      static_cast<std::size_t>(demand.rows) * static_cast<std::size_t>(demand.cols);
  model.coef.assign(static_cast<std::size_t>(slots) * cells, {});
  model.has_coef.assign(static_cast<std::size_t>(slots) * cells, 0);
  for (int slot = 0; slot < slots; ++slot) {
    const int hour = demand.service.start_hour + slot;
    std::vector<std::vector<double>> daily(cells);
    for (std::size_t t = begin; t < end; ++t) {
      if (demand.timestamps[t].hour != hour) continue;
      const Tensor& grid = demand.grids[t];
      for (std::size_t c = 0; c < cells; ++c) daily[c].push_back(grid[c]);
    }
    for (std::size_t c = 0; c < cells; ++c) {
      if (daily[c].size() < 14) continue;
      const std::size_t idx = static_cast<std::size_t>(slot) * cells + c;
      model.coef[idx] = seasonal_ar_fit(daily[c]);
      model.has_coef[idx] = 1;
    }
  }
  return model;
}

Tensor SeasonalArModel::forecast(const DemandSeries& history,
                                 Timestamp target) const {
  if (!service.contains(target.hour)) {
    throw std::invalid_argument("seasonal AR target is out of service hours");
  }
  const int slot = target.hour - service.start_hour;
  const std::size_t cells =
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  // Up to 6 most recent same-hour observations before the target, newest
  // first.
  std::vector<std::size_t> lags;
  for (std::size_t i = history.size(); i-- > 0;) {
    if (history.timestamps[i].hour == target.hour &&
        history.timestamps[i].day < target.day) {
      lags.push_back(i);
      if (lags.size() == 6) break;
    }
  }
  const int dow = day_of_week(target.day);
  Tensor out = Tensor::zeros(Shape{rows, cols});
  for (std::size_t c = 0; c < cells; ++c) {
    const std::size_t idx = static_cast<std::size_t>(slot) * cells + c;
    double pred;
    if (has_coef[idx] && lags.size() == 6) {
      const std::array<double, 7>& beta = coef[idx];
      pred = beta[0];
      for (std::size_t k = 0; k < 6; ++k) {
        pred += beta[k + 1] * history.grids[lags[k]][c];
      }
    } else {
      pred = ha.predict_cell(dow, target.hour, static_cast<int>(c) / cols,
                             static_cast<int>(c) % cols);
    }
    out[c] = std::max(0.0, pred);
  }
  return out;
}

Tensor SeasonalArModel::predict(const DemandSeries& full, std::size_t t) const {
  if (t >= full.size()) {
    throw std::invalid_argument("seasonal AR index out of range");
  }
  return forecast(full, full.timestamps[t]);
}

std::vector<Tensor> baseline_forecast(ModelKind kind,
                                      const DemandSeries& full,
                                      std::size_t train_end, std::size_t begin,
                                      std::size_t end, bool ma_same_hour) {
  if (begin > end || end > full.size()) {
    throw std::invalid_argument("baseline forecast range out of bounds");
  }
  std::vector<Tensor> preds;
  preds.reserve(end - begin);
  if (kind == ModelKind::kHistoricalAverage) {
    const HistoricalAverageModel model =
        fit_historical_average(full, 0, train_end);
    for (std::size_t t = begin; t < end; ++t) {
      preds.push_back(model.predict(full.timestamps[t]));
    }
  } else if (kind == ModelKind::kMovingAverage) {
    for (std::size_t t = begin; t < end; ++t) {
      preds.push_back(moving_average_predict(full, t, ma_same_hour));
    }
  } else if (kind == ModelKind::kSeasonalAr) {
    const SeasonalArModel model = fit_seasonal_ar(full, 0, train_end);
    for (std::size_t t = begin; t < end; ++t) {
      preds.push_back(model.predict(full, t));
    }
  } else {
    throw std::invalid_argument("baseline_forecast expects a classical kind");
  }
  return preds;
}

}  // namespace sanet
