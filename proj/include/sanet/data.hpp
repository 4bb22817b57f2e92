#ifndef SANET_DATA_HPP_
#define SANET_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sanet/geo.hpp"
#include "sanet/tensor.hpp"

namespace sanet {

// Naive local time at hourly resolution: civil day serial (days since
// 1970-01-01) plus hour of day.
struct Timestamp {
  std::int64_t day = 0;
  int hour = 0;

  bool operator==(const Timestamp&) const = default;
  auto operator<=>(const Timestamp&) const = default;
};

std::int64_t civil_to_days(int y, unsigned m, unsigned d);
void days_to_civil(std::int64_t serial, int& y, unsigned& m, unsigned& d);
int day_of_week(std::int64_t serial);  // 0 = Monday .. 6 = Sunday

Timestamp parse_timestamp(const std::string& text);  // YYYY-MM-DDTHH:00:00
std::string format_timestamp(Timestamp t);
std::int64_t parse_date(const std::string& text);  // YYYY-MM-DD
std::string format_date(std::int64_t serial);

// Hours of day with service; [start_hour, end_hour).
struct ServiceWindow {
  int start_hour = 6;
  int end_hour = 22;

  int slots() const { return end_hour - start_hour; }
  bool contains(int hour) const { return hour >= start_hour && hour < end_hour; }
};

struct DemandSeries {
  int rows = 0;
  int cols = 0;
  ServiceWindow service;
  std::vector<Timestamp> timestamps;  // strictly increasing, in-service only
  std::vector<Tensor> grids;          // [rows, cols] raw counts, >= 0

  std::size_t size() const { return timestamps.size(); }
  void validate() const;
};

// Rows aligned with a timestamp list; columns (tod, dow, holiday).
struct CalendarFeatures {
  Tensor values;  // [T, 3]
};

struct WeatherSeries {
  std::vector<Timestamp> timestamps;
  std::vector<double> precip_mm;  // >= 0
};

struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;
};

struct Dataset {
  DemandSeries demand;
  SocioDemographicGrid sociodemo;
  WeatherSeries weather;  // aligned one-to-one with demand.timestamps
  std::vector<std::int64_t> holidays;
  CalendarFeatures calendar;  // built over demand.timestamps
};

// Workday: peak (2) at 07-08 and 15-18 starts, mid (1) at 09-14, else
// off-peak (0). Weekend: mid at 11-18 starts, else off-peak.
int time_of_day_class(int dow, int hour);
CalendarFeatures build_calendar(const std::vector<Timestamp>& timestamps,
                                const std::vector<std::int64_t>& holidays);

// CSV loaders. Demand densifies to every in-service hour between the first
// and last day; omitted (t,row,col) records mean 0; duplicates are errors.
DemandSeries load_demand(const std::string& path, int rows, int cols,
                         ServiceWindow service);
SocioDemographicGrid load_sociodemo(const std::string& path, int rows,
                                    int cols);
WeatherSeries load_weather(const std::string& path);
std::vector<std::int64_t> load_holidays(const std::string& path);

Dataset load_dataset(const std::string& demand_path,
                     const std::string& sociodemo_path,
                     const std::string& weather_path,
                     const std::string& holidays_path, int rows, int cols,
                     ServiceWindow service);

void write_demand_csv(const DemandSeries& d, const std::string& path);
void write_sociodemo_csv(const SocioDemographicGrid& g,
                         const std::string& path);
void write_weather_csv(const WeatherSeries& w, const std::string& path);
void write_holidays_file(const std::vector<std::int64_t>& days,
                         const std::string& path);

// Training-split statistics; population std, constant series maps to std 1.
NormalizationStats compute_stats(const DemandSeries& demand,
                                 std::size_t begin, std::size_t end);
double zscore_value(double x, const NormalizationStats& s);
double denormalize_value(double x, const NormalizationStats& s);
Tensor zscore(const Tensor& grid, const NormalizationStats& s);
Tensor denormalize(const Tensor& grid, const NormalizationStats& s);

// Contiguous day-boundary split: floor(days*frac) whole days for train and
// val, remainder test. Ranges are [0,train_end), [train_end,val_end),
// [val_end,size).
struct SplitIndices {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
};
SplitIndices split_by_days(const DemandSeries& demand, double train_frac,
                           double val_frac);

// Seeded synthetic city: privileged high-demand north rows, disadvantaged
// low-demand south rows, tod-shaped Poisson rates, sparse exponential rain,
// one holiday per 30 days. Starts on Monday 2019-01-07.
Dataset synthesize(std::uint64_t seed, int m, int n, int days,
                   ServiceWindow service = ServiceWindow{});

}  // namespace sanet

#endif  // SANET_DATA_HPP_
