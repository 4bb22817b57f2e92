#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "sanet/data.hpp"

using namespace sanet;

namespace {

bool same_grids(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].shape() == b[i].shape())) return false;
    if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(double)))
      return false;
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

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("civil date arithmetic") {
  CHECK(civil_to_days(1970, 1, 1) == 0);
  CHECK(civil_to_days(1970, 1, 2) == 1);
  CHECK(day_of_week(civil_to_days(2019, 1, 7)) == 0);   // monday
  CHECK(day_of_week(civil_to_days(2019, 1, 13)) == 6);  // sunday
  CHECK(day_of_week(civil_to_days(2026, 8, 14)) == 4);  // friday

  const std::tuple<int, unsigned, unsigned> dates[] = {
      {2000, 2, 29}, {2019, 12, 31}, {1999, 1, 1}, {2024, 2, 29}};
  for (auto [y, m, d] : dates) {
    int yy;
    unsigned mm, dd;
    days_to_civil(civil_to_days(y, m, d), yy, mm, dd);
    CHECK(yy == y);
    CHECK(mm == m);
    CHECK(dd == d);
  }
}

TEST_CASE("timestamp and date parsing") {
  Timestamp t = parse_timestamp("2019-01-07T06:00:00");
  CHECK(t.day == civil_to_days(2019, 1, 7));
  CHECK(t.hour == 6);
  CHECK(format_timestamp(t) == "2019-01-07T06:00:00");
  CHECK(parse_timestamp("2019-01-07T21:00:00").hour == 21);

  CHECK_THROWS_AS((void)parse_timestamp("2019-01-07 06:00:00"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_timestamp("2019-13-07T06:00:00"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_timestamp("2019-01-07T24:00:00"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_timestamp("garbage"), std::invalid_argument);

  CHECK(parse_date("2019-01-07") == civil_to_days(2019, 1, 7));
  CHECK(format_date(parse_date("2024-02-29")) == "2024-02-29");
  CHECK_THROWS_AS((void)parse_date("2019/01/07"), std::invalid_argument);
}

TEST_CASE("time_of_day_class full table") {
  // hours 6..21 per day type
  const int workday[16] = {0, 2, 2, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 0, 0, 0};
  const int weekend[16] = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0};
  for (int dow = 0; dow < 7; ++dow) {
    for (int hour = 6; hour <= 21; ++hour) {
      const int expect = dow <= 4 ? workday[hour - 6] : weekend[hour - 6];
      CAPTURE(dow);
      CAPTURE(hour);
      CHECK(time_of_day_class(dow, hour) == expect);
    }
  }
  CHECK(time_of_day_class(0, 0) == 0);
  CHECK(time_of_day_class(6, 23) == 0);
  CHECK_THROWS_AS((void)time_of_day_class(7, 6), std::invalid_argument);
  CHECK_THROWS_AS((void)time_of_day_class(0, 24), std::invalid_argument);
}

TEST_CASE("build_calendar rows") {
  const std::int64_t monday = civil_to_days(2019, 1, 7);
  std::vector<Timestamp> ts = {{monday, 7}, {monday + 5, 12}, {monday + 7, 9}};
  CalendarFeatures cal = build_calendar(ts, {monday + 7});
  REQUIRE(cal.values.shape() == (Shape{3, 3}));
  // monday 07: peak, workday, not holiday
  CHECK(cal.values.at2(0, 0) == 2.0);
  CHECK(cal.values.at2(0, 1) == 1.0);
  CHECK(cal.values.at2(0, 2) == 0.0);
  // saturday 12: mid, weekend
  CHECK(cal.values.at2(1, 0) == 1.0);
  CHECK(cal.values.at2(1, 1) == 0.0);
  CHECK(cal.values.at2(1, 2) == 0.0);
  // next monday 09: mid, workday, holiday
  CHECK(cal.values.at2(2, 0) == 1.0);
  CHECK(cal.values.at2(2, 1) == 1.0);
  CHECK(cal.values.at2(2, 2) == 1.0);
}

TEST_CASE("synthesize is deterministic and shaped correctly") {
  Dataset a = synthesize(42, 4, 4, 35);
  Dataset b = synthesize(42, 4, 4, 35);
  Dataset c = synthesize(43, 4, 4, 35);

  CHECK(a.demand.size() == 35u * 16u);
  CHECK(a.demand.timestamps[0] == (Timestamp{civil_to_days(2019, 1, 7), 6}));
  CHECK(day_of_week(a.demand.timestamps[0].day) == 0);
  CHECK(a.demand.timestamps == b.demand.timestamps);
  CHECK(same_grids(a.demand.grids, b.demand.grids));
  CHECK(a.weather.precip_mm == b.weather.precip_mm);
  CHECK(a.holidays == b.holidays);
  CHECK(!same_grids(a.demand.grids, c.demand.grids));

  CHECK(a.holidays == (std::vector<std::int64_t>{
                          civil_to_days(2019, 1, 7), civil_to_days(2019, 2, 6)}));
  CHECK(a.sociodemo.names ==
        (std::vector<std::string>{"pct_minority", "pct_low_income"}));
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      CHECK(a.sociodemo.rasters[0].at2(r, c) == (r < 2 ? 0.1 : 0.9));
      CHECK(a.sociodemo.rasters[1].at2(r, c) == (r < 2 ? 0.2 : 0.8));
    }
  }
  CHECK(a.calendar.values.shape() == (Shape{static_cast<int>(a.demand.size()), 3}));
  CHECK_THROWS_AS((void)synthesize(1, 3, 4, 10), std::invalid_argument);
}

TEST_CASE("synthetic rates track the generative model") {
  Dataset ds = synthesize(11, 4, 4, 120);
  double priv_off = 0.0, dis_mid = 0.0;
  long n_off = 0, n_mid = 0;
  double rain_zero = 0.0, rain_sum = 0.0;
  long rain_n = 0, rain_wet = 0;
  for (std::size_t t = 0; t < ds.demand.size(); ++t) {
    const Timestamp ts = ds.demand.timestamps[t];
    const int dow = day_of_week(ts.day);
    const int tod = time_of_day_class(dow, ts.hour);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        const double v = ds.demand.grids[t].at2(r, c);
        CHECK(v >= 0.0);
        if (r < 2 && tod == 0) {
          priv_off += v;
          ++n_off;
        }
        if (r >= 2 && tod == 1) {
          dis_mid += v;
          ++n_mid;
        }
      }
    }
    ++rain_n;
    if (ds.weather.precip_mm[t] == 0.0) {
      rain_zero += 1.0;
    } else {
      rain_sum += ds.weather.precip_mm[t];
      ++rain_wet;
    }
  }
  CHECK(priv_off / static_cast<double>(n_off) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(dis_mid / static_cast<double>(n_mid) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(rain_zero / static_cast<double>(rain_n) == doctest::Approx(0.9).epsilon(0.05));
  CHECK(rain_sum / static_cast<double>(rain_wet) == doctest::Approx(0.3).epsilon(0.25));
}

TEST_CASE("csv round trip preserves the dataset") {
  TempDir dir("sanet_test_data_roundtrip");
  Dataset ds = synthesize(5, 4, 2, 12);
  write_demand_csv(ds.demand, dir.file("demand.csv"));
  write_sociodemo_csv(ds.sociodemo, dir.file("sociodemo.csv"));
  write_weather_csv(ds.weather, dir.file("weather.csv"));
  write_holidays_file(ds.holidays, dir.file("holidays.txt"));

  Dataset back = load_dataset(dir.file("demand.csv"), dir.file("sociodemo.csv"),
                              dir.file("weather.csv"), dir.file("holidays.txt"),
                              4, 2, ServiceWindow{});
  CHECK(back.demand.timestamps == ds.demand.timestamps);
  CHECK(same_grids(back.demand.grids, ds.demand.grids));
  CHECK(back.sociodemo.names == ds.sociodemo.names);
  CHECK(same_grids(back.sociodemo.rasters, ds.sociodemo.rasters));
  CHECK(back.weather.precip_mm == ds.weather.precip_mm);
  CHECK(back.holidays == ds.holidays);
  CHECK(std::memcmp(back.calendar.values.data(), ds.calendar.values.data(),
                    ds.calendar.values.size() * sizeof(double)) == 0);
}

TEST_CASE("load_demand densifies omitted records") {
  TempDir dir("sanet_test_data_densify");
  const std::string path = dir.file("demand.csv");
  {
    std::ofstream out(path);
    out << "timestamp,row,col,count\n";
    out << "2019-01-07T06:00:00,0,1,3\n";
    out << "2019-01-08T08:00:00,1,0,5\n";
  }
  DemandSeries d = load_demand(path, 2, 2, ServiceWindow{6, 9});
  REQUIRE(d.size() == 6u);  // two days, three slots each
  CHECK(d.timestamps[0] == (Timestamp{civil_to_days(2019, 1, 7), 6}));
  CHECK(d.grids[0].at2(0, 1) == 3.0);
  CHECK(d.grids[0].at2(0, 0) == 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    if (i != 0 && i != 5) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(d.grids[i][j] == 0.0);
    }
  }
  CHECK(d.grids[5].at2(1, 0) == 5.0);
}

TEST_CASE("load_demand rejects malformed input") {
  TempDir dir("sanet_test_data_reject");
  auto write_and_try = [&](const std::string& body) {
    const std::string path = dir.file("bad.csv");
    std::ofstream(path) << body;
    return path;
  };
  CHECK_THROWS_AS((void)load_demand(write_and_try("bad,header\n"), 2, 2,
                                    ServiceWindow{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)load_demand(write_and_try("timestamp,row,col,count\n"
                                      "2019-01-07T06:00:00,0,0,1\n"
                                      "2019-01-07T06:00:00,0,0,2\n"),
                        2, 2, ServiceWindow{}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)load_demand(write_and_try("timestamp,row,col,count\n"
                                      "2019-01-07T06:00:00,0,0,-1\n"),
                        2, 2, ServiceWindow{}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)load_demand(write_and_try("timestamp,row,col,count\n"
                                      "2019-01-07T06:00:00,5,0,1\n"),
                        2, 2, ServiceWindow{}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)load_demand(write_and_try("timestamp,row,col,count\n"
                                      "2019-01-07T03:00:00,0,0,1\n"),
                        2, 2, ServiceWindow{}),
      std::invalid_argument);
  CHECK_THROWS_AS((void)load_demand(dir.file("missing.csv"), 2, 2,
                                    ServiceWindow{}),
                  std::invalid_argument);
}

TEST_CASE("normalization statistics") {
  DemandSeries s;
  s.rows = 1;
  s.cols = 2;
  const std::int64_t day = civil_to_days(2019, 1, 7);
  s.timestamps = {{day, 6}, {day, 7}};
  s.grids = {Tensor(Shape{1, 2}, {1.0, 3.0}), Tensor(Shape{1, 2}, {5.0, 7.0})};
  s.validate();
  NormalizationStats st = compute_stats(s, 0, 2);
  CHECK(st.mean == 4.0);
  CHECK(st.std == std::sqrt(5.0));  // population variance (9+1+1+9)/4

  CHECK(zscore_value(7.0, st) == (7.0 - 4.0) / std::sqrt(5.0));
  CHECK(denormalize_value(zscore_value(7.0, st), st) ==
        doctest::Approx(7.0).epsilon(1e-14));
  Tensor z = zscore(s.grids[0], st);
  Tensor backv = denormalize(z, st);
  CHECK(backv[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(backv[1] == doctest::Approx(3.0).epsilon(1e-13));

  NormalizationStats flat = compute_stats(
      [] {
        DemandSeries c;
        c.rows = 1;
        c.cols = 1;
        c.timestamps = {{civil_to_days(2019, 1, 7), 6}};
        c.grids = {Tensor(Shape{1, 1}, {2.0})};
        return c;
      }(),
      0, 1);
  CHECK(flat.mean == 2.0);
  CHECK(flat.std == 1.0);

  CHECK_THROWS_AS((void)compute_stats(s, 2, 2), std::invalid_argument);
}

TEST_CASE("split_by_days uses whole-day boundaries") {
  Dataset ds = synthesize(3, 2, 2, 10);
  SplitIndices sp = split_by_days(ds.demand, 0.7, 0.15);
  CHECK(sp.train_end == 7u * 16u);
  CHECK(sp.val_end == 8u * 16u);
  CHECK_THROWS_AS((void)split_by_days(ds.demand, 0.05, 0.05),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)split_by_days(ds.demand, 0.8, 0.2),
                  std::invalid_argument);
}

TEST_SUITE_END();
