#include "sanet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sanet {

GroupMask build_group_mask(const Tensor& z, double threshold,
                           std::string attribute_name) {
  detail::require(z.shape().rank() == 2, "group mask: z must be a grid");
  GroupMask m;
  m.attribute_name = std::move(attribute_name);
  m.threshold = threshold;
  m.z = z;
  m.disadvantaged.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    detail::require(z[i] >= 0.0 && z[i] <= 1.0,
                    "group mask: attribute values must lie in [0,1]");
    m.disadvantaged[i] = z[i] > threshold;
    if (m.disadvantaged[i])
      ++m.z0_count;
    else
      ++m.z1_count;
  }
  detail::require(m.z0_count > 0 && m.z1_count > 0,
                  "group mask: both groups must be non-empty");
  return m;
}

namespace {

struct ScopeMetrics {
  double mae = 0.0;
  double mape = 0.0;
  double mpe = 0.0;
  double passing = 0.0;
  double contributing = 0.0;
};

// scope: nullptr means all cells; steps: nullptr means all steps.
ScopeMetrics scope_metrics(const std::vector<Tensor>& y,
                           const std::vector<Tensor>& yhat,
                           const std::vector<bool>* scope,
                           const std::vector<bool>* steps) {
  const std::size_t cells = y[0].size();
  std::size_t scope_cells = cells;
  if (scope != nullptr) {
    scope_cells = 0;
    for (bool b : *scope) scope_cells += b ? 1 : 0;
  }
  double abs_sum = 0.0;
  double mape_steps = 0.0, mpe_steps = 0.0;
  std::size_t used_steps = 0, contributing = 0, passing = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (steps != nullptr && !(*steps)[t]) continue;
    ++used_steps;
    double ape = 0.0, pe = 0.0;
    std::size_t pass_t = 0;
    for (std::size_t i = 0; i < cells; ++i) {
      if (scope != nullptr && !(*scope)[i]) continue;
      const double obs = y[t][i], pred = yhat[t][i];
      abs_sum += std::fabs(obs - pred);
      if (obs > kFilterThreshold) {
        const double e = (obs - pred) / obs;
        ape += std::fabs(e);
        pe += e;
        ++pass_t;
      }
    }
    if (pass_t > 0) {
      mape_steps += ape / static_cast<double>(pass_t);
      mpe_steps += pe / static_cast<double>(pass_t);
      ++contributing;
      passing += pass_t;
    }
  }
  ScopeMetrics out;
  out.mae = used_steps > 0 && scope_cells > 0
                ? abs_sum / (static_cast<double>(scope_cells) *
                             static_cast<double>(used_steps))
                : 0.0;
  out.mape = contributing > 0 ? mape_steps / static_cast<double>(contributing)
                              : 0.0;
  out.mpe = contributing > 0 ? mpe_steps / static_cast<double>(contributing)
                             : 0.0;
  out.passing = static_cast<double>(passing);
  out.contributing = static_cast<double>(contributing);
  return out;
}

void validate_series(const std::vector<Tensor>& y,
                     const std::vector<Tensor>& yhat) {
  detail::require(!y.empty(), "metrics: empty series");
  detail::require(y.size() == yhat.size(), "metrics: series length mismatch");
  for (std::size_t t = 0; t < y.size(); ++t)
    detail::require(y[t].shape() == yhat[t].shape() &&
                        y[t].shape() == y[0].shape(),
                    "metrics: grid shape mismatch");
}

}  // namespace

MetricsReport point_metrics(const std::vector<Tensor>& y,
                            const std::vector<Tensor>& yhat,
                            const GroupMask* mask,
                            const std::vector<int>* hours) {
  validate_series(y, yhat);
  MetricsReport r;
  ScopeMetrics all = scope_metrics(y, yhat, nullptr, nullptr);
  r.mae = all.mae;
  r.mape = all.mape;
  r.mpe = all.mpe;
  r.passing_cell_steps = all.passing;
  r.contributing_steps = all.contributing;

  if (mask != nullptr) {
    detail::require(mask->z.size() == y[0].size(),
                    "metrics: mask/grid size mismatch");
    std::vector<bool> z0 = mask->disadvantaged;
    std::vector<bool> z1(z0.size());
    for (std::size_t i = 0; i < z0.size(); ++i) z1[i] = !z0[i];
    ScopeMetrics g0 = scope_metrics(y, yhat, &z0, nullptr);
    ScopeMetrics g1 = scope_metrics(y, yhat, &z1, nullptr);
    detail::require(g0.contributing > 0 && g1.contributing > 0,
                    "metrics: a group has no cell passing the filter in any step");
    r.has_groups = true;
    r.attribute_name = mask->attribute_name;
    r.threshold = mask->threshold;
    r.group0_mae = g0.mae;
    r.group0_mape = g0.mape;
    r.group0_mpe = g0.mpe;
    r.group1_mae = g1.mae;
    r.group1_mape = g1.mape;
    r.group1_mpe = g1.mpe;
    r.mpe_gap = g0.mpe - g1.mpe;
  }

  if (hours != nullptr) {
    detail::require(hours->size() == y.size(),
                    "metrics: hour list length mismatch");
    std::map<int, std::vector<bool>> by_hour;
    for (std::size_t t = 0; t < hours->size(); ++t) {
      auto& sel = by_hour[(*hours)[t]];
      if (sel.empty()) sel.assign(y.size(), false);
      sel[t] = true;
    }
    for (const auto& [hour, sel] : by_hour) {
      ScopeMetrics h = scope_metrics(y, yhat, nullptr, &sel);
      HourMetrics hm;
      hm.hour = hour;
      hm.mae = h.mae;
      hm.mape = h.mape;
      hm.mpe = h.mpe;
      hm.contributing_steps = h.contributing;
      r.per_hour.push_back(hm);
    }
  }

  Tensor field = mpe_field(y, yhat);
  bool constant = true;
  for (std::size_t i = 1; i < field.size(); ++i)
    if (field[i] != field[0]) constant = false;
  if (!constant && field.size() >= 2) {
    r.has_morans = true;
    r.morans = morans_i(field);
  }
  return r;
}

double mpe_gap(const std::vector<Tensor>& y, const std::vector<Tensor>& yhat,
               const GroupMask& mask) {
  return point_metrics(y, yhat, &mask, nullptr).mpe_gap;
}

Tensor mpe_field(const std::vector<Tensor>& y,
                 const std::vector<Tensor>& yhat) {
  validate_series(y, yhat);
  const std::size_t cells = y[0].size();
  Tensor field = Tensor::zeros(y[0].shape());
  std::vector<int> counts(cells, 0);
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (std::size_t i = 0; i < cells; ++i) {
      const double obs = y[t][i];
      if (obs > kFilterThreshold) {
        field[i] += (obs - yhat[t][i]) / obs;
        ++counts[i];
      }
    }
  }
  for (std::size_t i = 0; i < cells; ++i)
    if (counts[i] > 0) field[i] /= static_cast<double>(counts[i]);
  return field;
}

double morans_i(const Tensor& field) {
  detail::require(field.shape().rank() == 2, "morans_i: field must be a grid");
  const int rows = field.shape().extent(0), cols = field.shape().extent(1);
  const std::size_t n = field.size();
  detail::require(n >= 2, "morans_i: need at least two cells");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += field[i];
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    denom += (field[i] - mean) * (field[i] - mean);
  if (denom == 0.0)
    throw std::domain_error("morans_i: undefined for a constant field");

  double num = 0.0;
  double w_sum = 0.0;
  for (int p = 0; p < rows; ++p) {
    for (int q = 0; q < cols; ++q) {
      const double xi = field.at2(p, q) - mean;
      const int dr[4] = {-1, 1, 0, 0};
      const int dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int a = p + dr[k], b = q + dc[k];
        if (a < 0 || a >= rows || b < 0 || b >= cols) continue;
        num += xi * (field.at2(a, b) - mean);
        w_sum += 1.0;
      }
    }
  }
  return (static_cast<double>(n) / w_sum) * num / denom;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), "cannot open for writing: " + path);
  out << "scope,metric,value\n";
  out << "meta,label," << r.label << "\n";
  out << "all,mae," << fmt(r.mae) << "\n";
  out << "all,mape," << fmt(r.mape) << "\n";
  out << "all,mpe," << fmt(r.mpe) << "\n";
  out << "all,passing_cell_steps," << fmt(r.passing_cell_steps) << "\n";
  out << "all,contributing_steps," << fmt(r.contributing_steps) << "\n";
  if (r.has_groups) {
    out << "meta,attribute," << r.attribute_name << "\n";
    out << "meta,threshold," << fmt(r.threshold) << "\n";
    out << "group0,mae," << fmt(r.group0_mae) << "\n";
    out << "group0,mape," << fmt(r.group0_mape) << "\n";
    out << "group0,mpe," << fmt(r.group0_mpe) << "\n";
    out << "group1,mae," << fmt(r.group1_mae) << "\n";
    out << "group1,mape," << fmt(r.group1_mape) << "\n";
    out << "group1,mpe," << fmt(r.group1_mpe) << "\n";
    out << "gap,mpe_gap," << fmt(r.mpe_gap) << "\n";
  }
  for (const HourMetrics& h : r.per_hour) {
    char scope[16];
    std::snprintf(scope, sizeof scope, "hour_%02d", h.hour);
    out << scope << ",mae," << fmt(h.mae) << "\n";
    out << scope << ",mape," << fmt(h.mape) << "\n";
    out << scope << ",mpe," << fmt(h.mpe) << "\n";
    out << scope << ",contributing_steps," << fmt(h.contributing_steps)
        << "\n";
  }
  out << "spatial,morans_i," << (r.has_morans ? fmt(r.morans) : "undefined")
      << "\n";
  detail::require(out.good(), "write failed: " + path);
}

MetricsReport read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(in.good(), "cannot open metrics csv: " + path);
  MetricsReport r;
  std::string line;
  std::getline(in, line);
  detail::require(line == "scope,metric,value",
                  "metrics csv: bad header in " + path);
  std::map<int, HourMetrics> hours;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    detail::require(c1 != std::string::npos && c2 != std::string::npos,
                    "metrics csv: malformed row: " + line);
    const std::string scope = line.substr(0, c1);
    const std::string metric = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string value = line.substr(c2 + 1);
    auto num = [&] { return std::strtod(value.c_str(), nullptr); };
    if (scope == "meta") {
      if (metric == "label") r.label = value;
      else if (metric == "attribute") { r.attribute_name = value; r.has_groups = true; }
      else if (metric == "threshold") r.threshold = num();
    } else if (scope == "all") {
      if (metric == "mae") r.mae = num();
      else if (metric == "mape") r.mape = num();
      else if (metric == "mpe") r.mpe = num();
      else if (metric == "passing_cell_steps") r.passing_cell_steps = num();
      else if (metric == "contributing_steps") r.contributing_steps = num();
    } else if (scope == "group0") {
      r.has_groups = true;
      if (metric == "mae") r.group0_mae = num();
      else if (metric == "mape") r.group0_mape = num();
      else if (metric == "mpe") r.group0_mpe = num();
    } else if (scope == "group1") {
      if (metric == "mae") r.group1_mae = num();
      else if (metric == "mape") r.group1_mape = num();
      else if (metric == "mpe") r.group1_mpe = num();
    } else if (scope == "gap") {
      r.mpe_gap = num();
    } else if (scope == "spatial") {
      if (value != "undefined") {
        r.has_morans = true;
        r.morans = num();
      }
    } else if (scope.rfind("hour_", 0) == 0) {
      int hour = std::atoi(scope.c_str() + 5);
      HourMetrics& h = hours[hour];
      h.hour = hour;
      if (metric == "mae") h.mae = num();
      else if (metric == "mape") h.mape = num();
      else if (metric == "mpe") h.mpe = num();
      else if (metric == "contributing_steps") h.contributing_steps = num();
    } else {
      throw std::invalid_argument("metrics csv: unknown scope: " + scope);
    }
  }
  for (const auto& [hour, h] : hours) r.per_hour.push_back(h);
  return r;
}

std::string format_metrics_table(const std::vector<MetricsReport>& rows) {
  std::ostringstream os;
  os << "label,mae,mape,mpe,group0_mpe,group1_mpe,mpe_gap,morans_i\n";
  for (const MetricsReport& r : rows) {
    os << r.label << ',' << fmt(r.mae) << ',' << fmt(r.mape) << ','
       << fmt(r.mpe) << ',';
    if (r.has_groups)
      os << fmt(r.group0_mpe) << ',' << fmt(r.group1_mpe) << ','
         << fmt(r.mpe_gap) << ',';
    else
      os << ",,,";
    os << (r.has_morans ? fmt(r.morans) : "undefined") << "\n";
  }
  return os.str();
}

MetricsReport average_reports(const std::vector<MetricsReport>& reports) {
  detail::require(!reports.empty(), "average_reports: no reports");
  MetricsReport avg = reports[0];
  const double k = static_cast<double>(reports.size());
  auto mean_of = [&](auto getter) {
    double s = 0.0;
    for (const MetricsReport& r : reports) s += getter(r);
    return s / k;
  };
  avg.mae = mean_of([](const MetricsReport& r) { return r.mae; });
  avg.mape = mean_of([](const MetricsReport& r) { return r.mape; });
  avg.mpe = mean_of([](const MetricsReport& r) { return r.mpe; });
  avg.passing_cell_steps =
      mean_of([](const MetricsReport& r) { return r.passing_cell_steps; });
  avg.contributing_steps =
      mean_of([](const MetricsReport& r) { return r.contributing_steps; });
  if (avg.has_groups) {
    for (const MetricsReport& r : reports)
      detail::require(r.has_groups, "average_reports: mixed group presence");
    avg.group0_mae = mean_of([](const MetricsReport& r) { return r.group0_mae; });
    avg.group0_mape = mean_of([](const MetricsReport& r) { return r.group0_mape; });
    avg.group0_mpe = mean_of([](const MetricsReport& r) { return r.group0_mpe; });
    avg.group1_mae = mean_of([](const MetricsReport& r) { return r.group1_mae; });
    avg.group1_mape = mean_of([](const MetricsReport& r) { return r.group1_mape; });
    avg.group1_mpe = mean_of([](const MetricsReport& r) { return r.group1_mpe; });
    avg.mpe_gap = mean_of([](const MetricsReport& r) { return r.mpe_gap; });
  }
  for (std::size_t i = 0; i < avg.per_hour.size(); ++i) {
    double mae = 0, mape = 0, mpe = 0, cs = 0;
    for (const MetricsReport& r : reports) {
      detail::require(r.per_hour.size() == avg.per_hour.size() &&
                          r.per_hour[i].hour == avg.per_hour[i].hour,
                      "average_reports: per-hour rows mismatch");
      mae += r.per_hour[i].mae;
      mape += r.per_hour[i].mape;
      mpe += r.per_hour[i].mpe;
      cs += r.per_hour[i].contributing_steps;
    }
    avg.per_hour[i].mae = mae / k;
    avg.per_hour[i].mape = mape / k;
    avg.per_hour[i].mpe = mpe / k;
    avg.per_hour[i].contributing_steps = cs / k;
  }
  bool all_morans = true;
  for (const MetricsReport& r : reports) all_morans = all_morans && r.has_morans;
  avg.has_morans = all_morans;
  avg.morans = all_morans
                   ? mean_of([](const MetricsReport& r) { return r.morans; })
                   : 0.0;
  return avg;
}

}  // namespace sanet
