#ifndef SANET_GEO_HPP_
#define SANET_GEO_HPP_

#include <string>
#include <vector>

#include "sanet/tape.hpp"
#include "sanet/tensor.hpp"

namespace sanet {

// Per-cell socio-demographic variables aligned with the demand grid.
struct SocioDemographicGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::string> names;   // P variable names
  std::vector<Tensor> rasters;      // P rasters of shape [rows, cols]

  int var_count() const { return static_cast<int>(rasters.size()); }
  const Tensor& raster(const std::string& name) const;
  void validate() const;
};

// Population z-score per raster. A constant raster standardizes to all zeros.
std::vector<Tensor> standardize_rasters(const std::vector<Tensor>& rasters);

// F = sum_p weights[p] * standardized[p], shape [rows, cols].
Tensor feature_map(const std::vector<Tensor>& standardized, const Tensor& weights);

// exp(-(f1 - f2)^2 / 2); equals 1 exactly when f1 == f2.
double gaussian_kernel(double f1, double f2);

// Kernel modulation field of shape [M, N, V, V]. Entry (p, q, i, j) holds
// K(F[p+i-c, q+j-c], F[p, q]) with c = V/2; out-of-bounds neighbors get 0.
Tensor build_adapting_field(const Tensor& feature, int v);

// Socially-aware convolution on plain tensors; x [C,M,N], w [O,C,V,V].
Tensor sac_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
                  const Tensor& field);

// Tape-op counterparts for training.
Var feature_map_op(Var weights, const std::vector<Tensor>& standardized);
Var adapting_field_op(Var feature, int v);

}  // namespace sanet

#endif  // SANET_GEO_HPP_
