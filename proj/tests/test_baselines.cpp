#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "sanet/baselines.hpp"
#include "sanet/data.hpp"

using namespace sanet;

namespace {

const std::int64_t kMonday = civil_to_days(2019, 1, 7);

DemandSeries single_cell_series(ServiceWindow sw,
                                const std::vector<Timestamp>& ts,
                                const std::vector<double>& vals) {
  DemandSeries s;
  s.rows = 1;
  s.cols = 1;
  s.service = sw;
  s.timestamps = ts;
  for (double v : vals) s.grids.push_back(Tensor(Shape{1, 1}, {v}));
  s.validate();
  return s;
}

// Normal-equation least squares with the same diagonal ridge, solved by
// partial-pivot elimination.
std::array<double, 7> ar_fit_oracle(const std::vector<double>& s) {
  const int order = 6;
  const int rows = static_cast<int>(s.size()) - order;
  double a[7][8] = {};
  for (int r = 0; r < rows; ++r) {
    double x[7];
    x[0] = 1.0;
    for (int k = 1; k <= order; ++k)
      x[k] = s[static_cast<std::size_t>(order + r - k)];
    const double y = s[static_cast<std::size_t>(order + r)];
    for (int i = 0; i <= order; ++i) {
      for (int j = 0; j <= order; ++j) a[i][j] += x[i] * x[j];
      a[i][7] += x[i] * y;
    }
  }
  for (int i = 0; i <= order; ++i) a[i][i] += 1e-6;
  for (int col = 0; col <= order; ++col) {
    int piv = col;
    for (int r = col + 1; r <= order; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    for (int j = 0; j < 8; ++j) std::swap(a[piv][j], a[col][j]);
    for (int r = 0; r <= order; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int j = col; j < 8; ++j) a[r][j] -= f * a[col][j];
    }
  }
  std::array<double, 7> out{};
  for (int i = 0; i <= order; ++i) out[static_cast<std::size_t>(i)] = a[i][7] / a[i][i];
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("baselines");

TEST_CASE("moving_average worked examples") {
  CHECK(moving_average({1, 2, 3, 4, 5, 6}) == 3.5);
  CHECK(moving_average({3, 3, 9}) == 5.0);
  CHECK(moving_average({7}) == 7.0);
  CHECK_THROWS_AS((void)moving_average({}), std::invalid_argument);
}

TEST_CASE("historical_average on two mondays") {
  DemandSeries s = single_cell_series(
      ServiceWindow{},
      {{kMonday, 7}, {kMonday + 1, 8}, {kMonday + 7, 7}},
      {2.0, 6.0, 4.0});
  CHECK(historical_average(s, 0, 7, 0, 0) == 3.0);  // (2 + 4) / 2
  CHECK(historical_average(s, 1, 8, 0, 0) == 6.0);

  HistoricalAverageModel ha = fit_historical_average(s, 0, s.size());
  CHECK(ha.predict_cell(0, 7, 0, 0) == 3.0);
  // unseen key falls back to the cell grand mean
  CHECK(ha.predict_cell(4, 12, 0, 0) == 4.0);  // (2 + 6 + 4) / 3
  CHECK_THROWS_AS((void)ha.predict_cell(0, 23, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)ha.predict_cell(7, 7, 0, 0), std::invalid_argument);
  Tensor p = ha.predict({kMonday + 14, 7});
  CHECK(p[0] == 3.0);
}

TEST_CASE("historical_average keeps cells separate") {
  DemandSeries s;
  s.rows = 1;
  s.cols = 2;
  s.timestamps = {{kMonday, 7}, {kMonday + 7, 7}};
  s.grids = {Tensor(Shape{1, 2}, {2, 10}), Tensor(Shape{1, 2}, {4, 30})};
  s.validate();
  HistoricalAverageModel ha = fit_historical_average(s, 0, 2);
  CHECK(ha.predict_cell(0, 7, 0, 0) == 3.0);
  CHECK(ha.predict_cell(0, 7, 0, 1) == 20.0);
}

TEST_CASE("moving_average_predict trailing window") {
  ServiceWindow sw{10, 12};
  std::vector<Timestamp> ts;
  std::vector<double> vals;
  for (int k = 0; k < 12; ++k) {
    ts.push_back({kMonday + k / 2, 10 + k % 2});
    vals.push_back(static_cast<double>(k + 1));
  }
  DemandSeries s = single_cell_series(sw, ts, vals);
  Tensor p = moving_average_predict(s, 10, false);
  CHECK(p[0] == 7.5);  // (5+6+7+8+9+10) / 6
  // fewer than 6 priors: average what exists
  CHECK(moving_average_predict(s, 2, false)[0] == 1.5);
  CHECK_THROWS_AS((void)moving_average_predict(s, 0, false),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)moving_average_predict(s, 12, false),
                  std::invalid_argument);
}

TEST_CASE("moving_average_predict same hour skips other slots") {
  ServiceWindow sw{10, 12};
  std::vector<Timestamp> ts;
  std::vector<double> vals;
  for (int k = 0; k < 14; ++k) {
    ts.push_back({kMonday + k / 2, 10 + k % 2});
    vals.push_back(static_cast<double>(k + 1));
  }
  DemandSeries s = single_cell_series(sw, ts, vals);
  // index 13 is day 6 hour 11; prior same-hour values are 2,4,6,8,10,12
  CHECK(moving_average_predict(s, 13, true)[0] == 7.0);
  // index 1 is day 0 hour 11 with no prior day at that hour
  CHECK_THROWS_AS((void)moving_average_predict(s, 1, true),
                  std::invalid_argument);
}

TEST_CASE("moving_average_forecast for an out-of-series target") {
  ServiceWindow sw{10, 11};
  std::vector<Timestamp> ts;
  std::vector<double> vals;
  for (int k = 0; k < 8; ++k) {
    ts.push_back({kMonday + k, 10});
    vals.push_back(static_cast<double>(k + 1));
  }
  DemandSeries s = single_cell_series(sw, ts, vals);
  Tensor f = moving_average_forecast(s, {kMonday + 8, 10}, true);
  CHECK(f[0] == 5.5);  // (3+4+5+6+7+8) / 6
}

TEST_CASE("seasonal_ar_fit matches the normal-equation oracle") {
  std::vector<double> series = {2.0, 4.5, 1.5, 3.0, 5.0, 2.5};
  std::uint64_t state = 12345;
  auto next01 = [&state]() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  };
  while (series.size() < 40) {
    const std::size_t n = series.size();
    series.push_back(1.0 + 0.6 * series[n - 1] - 0.2 * series[n - 3] +
                     (next01() - 0.5));
  }
  std::array<double, 7> fit = seasonal_ar_fit(series);
  std::array<double, 7> oracle = ar_fit_oracle(series);
  for (int i = 0; i < 7; ++i) {
    CHECK(fit[static_cast<std::size_t>(i)] ==
          doctest::Approx(oracle[static_cast<std::size_t>(i)]).epsilon(1e-8));
  }
  CHECK_THROWS_AS((void)seasonal_ar_fit(std::vector<double>(13, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("seasonal_ar_fit on a series extracts the per-hour subseries") {
  ServiceWindow sw{10, 12};
  std::vector<Timestamp> ts;
  std::vector<double> vals;
  std::vector<double> hour10;
  for (int k = 0; k < 40; ++k) {
    ts.push_back({kMonday + k / 2, 10 + k % 2});
    const double v = (k % 2 == 0) ? 3.0 + 0.8 * std::sin(0.9 * k) + 0.1 * k
                                  : 100.0;
    vals.push_back(v);
    if (k % 2 == 0) hour10.push_back(v);
  }
  DemandSeries s = single_cell_series(sw, ts, vals);
  std::array<double, 7> a = seasonal_ar_fit(s, 0, s.size(), 0, 0, 10);
  std::array<double, 7> b = seasonal_ar_fit(hour10);
  for (int i = 0; i < 7; ++i)
    CHECK(a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]);
}

TEST_CASE("seasonal ar extrapolates a linear trend") {
  ServiceWindow sw{10, 11};
  std::vector<Timestamp> ts;
  std::vector<double> vals;
  for (int k = 0; k < 30; ++k) {
    ts.push_back({kMonday + k, 10});
    vals.push_back(static_cast<double>(k));
  }
  DemandSeries s = single_cell_series(sw, ts, vals);
  SeasonalArModel model = fit_seasonal_ar(s, 0, 24);
  REQUIRE(model.has_coef[0] == 1);
  Tensor p = model.predict(s, 26);
  CHECK(p[0] == doctest::Approx(26.0).epsilon(1e-3));

  // too few prior same-hour days for the AR path: historical-average fallback
  Tensor f = model.predict(s, 3);
  CHECK(f[0] == 10.0);  // thursdays 3, 10, 17 in the fit range
}

TEST_CASE("baseline_forecast agrees with the per-kind predictors") {
  ServiceWindow sw{10, 12};
  std::vector<Timestamp> ts;
  std::vector<double> vals;
  for (int k = 0; k < 40; ++k) {
    ts.push_back({kMonday + k / 2, 10 + k % 2});
    vals.push_back(2.0 + ((k * 7) % 5));
  }
  DemandSeries s = single_cell_series(sw, ts, vals);

  std::vector<Tensor> ma = baseline_forecast(ModelKind::kMovingAverage, s, 28,
                                             30, 36, false);
  REQUIRE(ma.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    Tensor direct = moving_average_predict(s, 30 + i, false);
    CHECK(ma[i][0] == direct[0]);
  }

  std::vector<Tensor> ha = baseline_forecast(ModelKind::kHistoricalAverage, s,
                                             28, 30, 36, false);
  HistoricalAverageModel ham = fit_historical_average(s, 0, 28);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(ha[i][0] == ham.predict(s.timestamps[30 + i])[0]);
  }

  CHECK_THROWS_AS((void)baseline_forecast(ModelKind::kLstm, s, 28, 30, 36,
                                          false),
                  std::invalid_argument);
}

TEST_SUITE_END();
