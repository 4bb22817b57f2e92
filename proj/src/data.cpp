#include "sanet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sanet/errors.hpp"
#include "sanet/rng.hpp"

namespace sanet {

namespace {

void dreq(bool cond, const std::string& message) {
  if (!cond) throw DataError(message);
}

}  // namespace

std::int64_t civil_to_days(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 +
         static_cast<std::int64_t>(doe) - 719468;
}

void days_to_civil(std::int64_t serial, int& y, unsigned& m, unsigned& d) {
  std::int64_t z = serial + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yy) + (m <= 2);
}

int day_of_week(std::int64_t serial) {
  // 1970-01-01 was a Thursday; Monday = 0.
  return static_cast<int>(((serial % 7) + 7 + 3) % 7);
}

Timestamp parse_timestamp(const std::string& text) {
  int y = 0;
  unsigned mo = 0, da = 0, h = 0, mi = 0, ss = 0;
  if (text.size() != 19 ||
      std::sscanf(text.c_str(), "%d-%u-%uT%u:%u:%u", &y, &mo, &da, &h, &mi,
                  &ss) != 6 ||
      mi != 0 || ss != 0 || h > 23 || mo < 1 || mo > 12 || da < 1 || da > 31)
    throw DataError("bad timestamp (expected YYYY-MM-DDTHH:00:00): " + text);
  const std::int64_t serial = civil_to_days(y, mo, da);
  int y2;
  unsigned mo2, da2;
  days_to_civil(serial, y2, mo2, da2);
  dreq(y2 == y && mo2 == mo && da2 == da, "invalid calendar date: " + text);
  return Timestamp{serial, static_cast<int>(h)};
}

std::string format_timestamp(Timestamp t) {
  int y;
  unsigned m, d;
  days_to_civil(t.day, y, m, d);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00", y, m, d, t.hour);
  return buf;
}

std::int64_t parse_date(const std::string& text) {
  int y = 0;
  unsigned mo = 0, da = 0;
  if (text.size() != 10 ||
      std::sscanf(text.c_str(), "%d-%u-%u", &y, &mo, &da) != 3 || mo < 1 ||
      mo > 12 || da < 1 || da > 31)
    throw DataError("bad date (expected YYYY-MM-DD): " + text);
  const std::int64_t serial = civil_to_days(y, mo, da);
  int y2;
  unsigned mo2, da2;
  days_to_civil(serial, y2, mo2, da2);
  dreq(y2 == y && mo2 == mo && da2 == da, "invalid calendar date: " + text);
  return serial;
}

std::string format_date(std::int64_t serial) {
  int y;
  unsigned m, d;
  days_to_civil(serial, y, m, d);
  char buf[12];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
  return buf;
}

void DemandSeries::validate() const {
  detail::require(rows > 0 && cols > 0, "demand series: bad grid extents");
  detail::require(timestamps.size() == grids.size(),
                  "demand series: timestamps/grids length mismatch");
  detail::require(!timestamps.empty(), "demand series: empty");
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    if (t > 0)
      detail::require(timestamps[t - 1] < timestamps[t],
                      "demand series: timestamps not strictly increasing");
    detail::require(service.contains(timestamps[t].hour),
                    "demand series: timestamp outside service hours");
    detail::require(grids[t].shape() == (Shape{rows, cols}),
                    "demand series: grid shape mismatch");
    for (std::size_t i = 0; i < grids[t].size(); ++i)
      detail::require(grids[t][i] >= 0.0, "demand series: negative count");
  }
}

int time_of_day_class(int dow, int hour) {
  detail::require(dow >= 0 && dow <= 6 && hour >= 0 && hour <= 23,
                  "time_of_day_class: bad arguments");
  const bool workday = dow <= 4;
  if (workday) {
    if ((hour >= 7 && hour < 9) || (hour >= 15 && hour < 19)) return 2;
    if (hour >= 9 && hour < 15) return 1;
    return 0;
  }
  if (hour >= 11 && hour < 19) return 1;
  return 0;
}

CalendarFeatures build_calendar(const std::vector<Timestamp>& timestamps,
                                const std::vector<std::int64_t>& holidays) {
  std::vector<std::int64_t> sorted = holidays;
  std::sort(sorted.begin(), sorted.end());
  Tensor v = Tensor::zeros(Shape{static_cast<int>(timestamps.size()), 3});
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    const int dow = day_of_week(timestamps[t].day);
    v[3 * t + 0] = static_cast<double>(time_of_day_class(dow, timestamps[t].hour));
    v[3 * t + 1] = dow <= 4 ? 1.0 : 0.0;
    v[3 * t + 2] = std::binary_search(sorted.begin(), sorted.end(),
                                      timestamps[t].day)
                       ? 1.0
                       : 0.0;
  }
  return CalendarFeatures{std::move(v)};
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  dreq(!s.empty(), what + ": empty number field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  dreq(end == s.c_str() + s.size() && std::isfinite(v),
       what + ": bad number '" + s + "'");
  return v;
}

int parse_index(const std::string& s, int limit, const std::string& what) {
  const double v = parse_number(s, what);
  const int i = static_cast<int>(v);
  dreq(static_cast<double>(i) == v && i >= 0 && i < limit,
       what + ": index out of range '" + s + "'");
  return i;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  dreq(in.good(), "cannot open file: " + path);
  return in;
}

}  // namespace

DemandSeries load_demand(const std::string& path, int rows, int cols,
                         ServiceWindow service) {
  detail::require(rows > 0 && cols > 0, "load_demand: bad grid extents");
  std::ifstream in = open_input(path);
  std::string line;
  dreq(static_cast<bool>(std::getline(in, line)), "empty demand file: " + path);
  dreq(split_csv(line) ==
           (std::vector<std::string>{"timestamp", "row", "col", "count"}),
       "demand csv: bad header in " + path);

  std::map<Timestamp, Tensor> grids;
  std::map<Timestamp, std::vector<char>> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    dreq(f.size() == 4, "demand csv: expected 4 fields: " + line);
    const Timestamp ts = parse_timestamp(f[0]);
    dreq(service.contains(ts.hour),
         "demand csv: timestamp outside service hours: " + f[0]);
    const int r = parse_index(f[1], rows, "demand csv row");
    const int c = parse_index(f[2], cols, "demand csv col");
    const double count = parse_number(f[3], "demand csv count");
    dreq(count >= 0.0, "demand csv: negative count: " + line);
    auto [it, fresh] = grids.try_emplace(ts, Tensor::zeros(Shape{rows, cols}));
    auto& mark = seen[ts];
    if (fresh) mark.assign(static_cast<std::size_t>(rows) * cols, 0);
    const std::size_t cell = static_cast<std::size_t>(r) * cols + c;
    dreq(!mark[cell], "demand csv: duplicate record: " + line);
    mark[cell] = 1;
    it->second[cell] = count;
  }
  dreq(!grids.empty(), "demand csv: no records in " + path);

  DemandSeries out;
  out.rows = rows;
  out.cols = cols;
  out.service = service;
  const std::int64_t first = grids.begin()->first.day;
  const std::int64_t last = grids.rbegin()->first.day;
  for (std::int64_t day = first; day <= last; ++day) {
    for (int hour = service.start_hour; hour < service.end_hour; ++hour) {
      const Timestamp ts{day, hour};
      auto it = grids.find(ts);
      out.timestamps.push_back(ts);
      out.grids.push_back(it != grids.end()
                              ? it->second
                              : Tensor::zeros(Shape{rows, cols}));
    }
  }
  out.validate();
  return out;
}

SocioDemographicGrid load_sociodemo(const std::string& path, int rows,
                                    int cols) {
  detail::require(rows > 0 && cols > 0, "load_sociodemo: bad grid extents");
  std::ifstream in = open_input(path);
  std::string line;
  dreq(static_cast<bool>(std::getline(in, line)),
       "empty sociodemo file: " + path);
  const auto header = split_csv(line);
  dreq(header.size() >= 3 && header[0] == "row" && header[1] == "col",
       "sociodemo csv: header must be row,col,<vars> in " + path);

  SocioDemographicGrid g;
  g.rows = rows;
  g.cols = cols;
  g.names.assign(header.begin() + 2, header.end());
  for (const std::string& n : g.names)
    g.rasters.push_back(Tensor::zeros(Shape{rows, cols}));
  std::vector<char> seen(static_cast<std::size_t>(rows) * cols, 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    dreq(f.size() == header.size(),
         "sociodemo csv: field count mismatch: " + line);
    const int r = parse_index(f[0], rows, "sociodemo csv row");
    const int c = parse_index(f[1], cols, "sociodemo csv col");
    const std::size_t cell = static_cast<std::size_t>(r) * cols + c;
    dreq(!seen[cell], "sociodemo csv: duplicate cell: " + line);
    seen[cell] = 1;
    for (std::size_t p = 0; p < g.names.size(); ++p)
      g.rasters[p][cell] = parse_number(f[2 + p], "sociodemo csv value");
  }
  for (char s : seen) dreq(s, "sociodemo csv: missing cells in " + path);
  g.validate();
  return g;
}

WeatherSeries load_weather(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  dreq(static_cast<bool>(std::getline(in, line)),
       "empty weather file: " + path);
  dreq(split_csv(line) == (std::vector<std::string>{"timestamp", "precip_mm"}),
       "weather csv: bad header in " + path);
  WeatherSeries w;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    dreq(f.size() == 2, "weather csv: expected 2 fields: " + line);
    w.timestamps.push_back(parse_timestamp(f[0]));
    const double p = parse_number(f[1], "weather csv precip");
    dreq(p >= 0.0, "weather csv: negative precipitation: " + line);
    w.precip_mm.push_back(p);
  }
  dreq(!w.timestamps.empty(), "weather csv: no records in " + path);
  return w;
}

std::vector<std::int64_t> load_holidays(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::int64_t> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_date(line));
  }
  return out;
}

Dataset load_dataset(const std::string& demand_path,
                     const std::string& sociodemo_path,
                     const std::string& weather_path,
                     const std::string& holidays_path, int rows, int cols,
                     ServiceWindow service) {
  Dataset ds;
  ds.demand = load_demand(demand_path, rows, cols, service);
  ds.sociodemo = load_sociodemo(sociodemo_path, rows, cols);
  ds.weather = load_weather(weather_path);
  dreq(ds.weather.timestamps == ds.demand.timestamps,
       "weather series does not align with the demand timeline");
  if (!holidays_path.empty()) ds.holidays = load_holidays(holidays_path);
  ds.calendar = build_calendar(ds.demand.timestamps, ds.holidays);
  return ds;
}

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw DataError("cannot open for writing: " + path);
  return out;
}

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_demand_csv(const DemandSeries& d, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "timestamp,row,col,count\n";
  for (std::size_t t = 0; t < d.size(); ++t) {
    const std::string ts = format_timestamp(d.timestamps[t]);
    for (int r = 0; r < d.rows; ++r) {
      for (int c = 0; c < d.cols; ++c) {
        const double v = d.grids[t].at2(r, c);
        if (v == 0.0) continue;  // omitted records densify back to zero
        out << ts << ',' << r << ',' << c << ','
            << static_cast<long long>(v) << "\n";
      }
    }
  }
  dreq(out.good(), "write failed: " + path);
}

void write_sociodemo_csv(const SocioDemographicGrid& g,
                         const std::string& path) {
  std::ofstream out = open_output(path);
  out << "row,col";
  for (const std::string& n : g.names) out << ',' << n;
  out << "\n";
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      out << r << ',' << c;
      for (const Tensor& raster : g.rasters) out << ',' << fmt_num(raster.at2(r, c));
      out << "\n";
    }
  }
  dreq(out.good(), "write failed: " + path);
}

void write_weather_csv(const WeatherSeries& w, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "timestamp,precip_mm\n";
  for (std::size_t t = 0; t < w.timestamps.size(); ++t)
    out << format_timestamp(w.timestamps[t]) << ',' << fmt_num(w.precip_mm[t])
        << "\n";
  dreq(out.good(), "write failed: " + path);
}

void write_holidays_file(const std::vector<std::int64_t>& days,
                         const std::string& path) {
  std::ofstream out = open_output(path);
  for (std::int64_t d : days) out << format_date(d) << "\n";
  dreq(out.good(), "write failed: " + path);
}

NormalizationStats compute_stats(const DemandSeries& demand, std::size_t begin,
                                 std::size_t end) {
  detail::require(begin < end && end <= demand.size(),
                  "compute_stats: bad range");
  double mean = 0.0;
  std::size_t n = 0;
  for (std::size_t t = begin; t < end; ++t) {
    for (std::size_t i = 0; i < demand.grids[t].size(); ++i) {
      mean += demand.grids[t][i];
      ++n;
    }
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t i = 0; i < demand.grids[t].size(); ++i)
      var += (demand.grids[t][i] - mean) * (demand.grids[t][i] - mean);
  var /= static_cast<double>(n);
  NormalizationStats s;
  s.mean = mean;
  s.std = var == 0.0 ? 1.0 : std::sqrt(var);
  return s;
}

double zscore_value(double x, const NormalizationStats& s) {
  return (x - s.mean) / s.std;
}

double denormalize_value(double x, const NormalizationStats& s) {
  return x * s.std + s.mean;
}

Tensor zscore(const Tensor& grid, const NormalizationStats& s) {
  Tensor out = grid;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = zscore_value(out[i], s);
  return out;
}

Tensor denormalize(const Tensor& grid, const NormalizationStats& s) {
  Tensor out = grid;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = denormalize_value(out[i], s);
  return out;
}

SplitIndices split_by_days(const DemandSeries& demand, double train_frac,
                           double val_frac) {
  detail::require(train_frac > 0.0 && val_frac > 0.0 &&
                      train_frac + val_frac < 1.0,
                  "split: fractions must be positive and sum below 1");
  std::vector<std::int64_t> days;
  for (const Timestamp& ts : demand.timestamps)
    if (days.empty() || days.back() != ts.day) days.push_back(ts.day);
  const auto n = static_cast<std::size_t>(days.size());
  const auto train_days =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_frac));
  const auto val_days =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_frac));
  dreq(train_days >= 1 && val_days >= 1 && train_days + val_days < n,
       "split: a split is empty at this day count");
  const std::int64_t first_val_day = days[train_days];
  const std::int64_t first_test_day = days[train_days + val_days];
  SplitIndices s;
  for (std::size_t t = 0; t < demand.size(); ++t) {
    if (demand.timestamps[t].day < first_val_day) s.train_end = t + 1;
    if (demand.timestamps[t].day < first_test_day) s.val_end = t + 1;
  }
  return s;
}

Dataset synthesize(std::uint64_t seed, int m, int n, int days,
                   ServiceWindow service) {
  detail::require(m > 0 && m % 2 == 0, "synthesize: m must be even");
  detail::require(n > 0 && days >= 1, "synthesize: bad extents");
  std::mt19937_64 g(seed);
  const std::int64_t start = civil_to_days(2019, 1, 7);  // a Monday

  Dataset ds;
  ds.demand.rows = m;
  ds.demand.cols = n;
  ds.demand.service = service;
  const double profile[3] = {0.5, 1.0, 1.6};
  for (int k = 0; k < days; ++k) {
    const std::int64_t day = start + k;
    const int dow = day_of_week(day);
    for (int hour = service.start_hour; hour < service.end_hour; ++hour) {
      const int tod = time_of_day_class(dow, hour);
      Tensor grid = Tensor::zeros(Shape{m, n});
      for (int r = 0; r < m; ++r) {
        const bool privileged = r < m / 2;
        double lambda = (privileged ? 8.0 : 1.0) * profile[tod];
        if (privileged && dow <= 4 && hour >= 15 && hour < 19) lambda *= 1.3;
        for (int c = 0; c < n; ++c)
          grid[static_cast<std::size_t>(r) * n + c] =
              static_cast<double>(rng::poisson(g, lambda));
      }
      ds.demand.timestamps.push_back(Timestamp{day, hour});
      ds.demand.grids.push_back(std::move(grid));
    }
  }

  for (std::size_t t = 0; t < ds.demand.size(); ++t) {
    ds.weather.timestamps.push_back(ds.demand.timestamps[t]);
    const double u = rng::uniform01(g);
    ds.weather.precip_mm.push_back(u < 0.9 ? 0.0
                                           : rng::exponential(g, 0.3));
  }

  ds.sociodemo.rows = m;
  ds.sociodemo.cols = n;
  ds.sociodemo.names = {"pct_minority", "pct_low_income"};
  Tensor minority = Tensor::zeros(Shape{m, n});
  Tensor low_income = Tensor::zeros(Shape{m, n});
  for (int r = 0; r < m; ++r) {
    const bool privileged = r < m / 2;
    for (int c = 0; c < n; ++c) {
      minority[static_cast<std::size_t>(r) * n + c] = privileged ? 0.1 : 0.9;
      low_income[static_cast<std::size_t>(r) * n + c] = privileged ? 0.2 : 0.8;
    }
  }
  ds.sociodemo.rasters = {std::move(minority), std::move(low_income)};

  for (int k = 0; k < days; k += 30) ds.holidays.push_back(start + k);
  ds.calendar = build_calendar(ds.demand.timestamps, ds.holidays);
  ds.demand.validate();
  ds.sociodemo.validate();
  return ds;
}

}  // namespace sanet
