#ifndef SANET_METRICS_HPP_
#define SANET_METRICS_HPP_

#include <string>
#include <vector>

#include "sanet/tensor.hpp"

namespace sanet {

// Partition of grid cells by a sensitive attribute. Group Z0 (disadvantaged)
// holds cells with z strictly above the threshold, Z1 the rest.
struct GroupMask {
  std::string attribute_name;
  double threshold = 0.0;
  Tensor z;                          // [M,N], values in [0,1]
  std::vector<bool> disadvantaged;   // flat over cells, true = Z0
  int z0_count = 0;
  int z1_count = 0;
};

GroupMask build_group_mask(const Tensor& z, double threshold,
                           std::string attribute_name);

struct HourMetrics {
  int hour = 0;
  double mae = 0.0;
  double mape = 0.0;
  double mpe = 0.0;
  double contributing_steps = 0.0;
};

struct MetricsReport {
  std::string label;
  double mae = 0.0;
  double mape = 0.0;
  double mpe = 0.0;
  double passing_cell_steps = 0.0;  // (t, cell) pairs with y > filter
  double contributing_steps = 0.0;  // steps with at least one passing cell

  bool has_groups = false;
  std::string attribute_name;
  double threshold = 0.0;
  double group0_mae = 0.0, group0_mape = 0.0, group0_mpe = 0.0;
  double group1_mae = 0.0, group1_mape = 0.0, group1_mpe = 0.0;
  double mpe_gap = 0.0;  // group0_mpe - group1_mpe

  std::vector<HourMetrics> per_hour;

  bool has_morans = false;  // false when the MPE field is constant
  double morans = 0.0;
};

inline constexpr double kFilterThreshold = 0.1;

// Accuracy and fairness metrics over aligned series of raw observed and raw
// clamped predicted grids. MAE is unfiltered; MAPE/MPE average per step over
// cells with y > 0.1, then over steps that had any passing cell. `mask` adds
// the group breakdown and gap; `hours` (hour-of-day per step) adds the
// per-hour slices.
MetricsReport point_metrics(const std::vector<Tensor>& y,
                            const std::vector<Tensor>& yhat,
                            const GroupMask* mask = nullptr,
                            const std::vector<int>* hours = nullptr);

double mpe_gap(const std::vector<Tensor>& y, const std::vector<Tensor>& yhat,
               const GroupMask& mask);

// Per-cell MPE averaged over the steps where that cell passes the filter;
// cells that never pass get 0.
Tensor mpe_field(const std::vector<Tensor>& y,
                 const std::vector<Tensor>& yhat);

// Moran's I with binary rook (4-neighbor) weights, not row-standardized.
// Throws std::domain_error on a constant field.
double morans_i(const Tensor& field);

void write_metrics_csv(const MetricsReport& r, const std::string& path);
MetricsReport read_metrics_csv(const std::string& path);

// Table-shaped comparison, one row per report.
std::string format_metrics_table(const std::vector<MetricsReport>& rows);

// Field-wise mean across reports (same shape required); used for multi-run
// averaging. Moran's is averaged only if defined in every report.
MetricsReport average_reports(const std::vector<MetricsReport>& reports);

}  // namespace sanet

#endif  // SANET_METRICS_HPP_
