#include "sanet/geo.hpp"

#include <cmath>
#include <stdexcept>

namespace sanet {

const Tensor& SocioDemographicGrid::raster(const std::string& name) const {
  for (std::size_t p = 0; p < names.size(); ++p)
    if (names[p] == name) return rasters[p];
  throw std::invalid_argument("unknown socio-demographic variable: " + name);
}

void SocioDemographicGrid::validate() const {
  detail::require(rows > 0 && cols > 0, "sociodemo grid: bad extents");
  detail::require(names.size() == rasters.size(),
                  "sociodemo grid: names/rasters length mismatch");
  detail::require(!rasters.empty(), "sociodemo grid: no variables");
  for (const Tensor& r : rasters)
    detail::require(r.shape() == (Shape{rows, cols}),
                    "sociodemo grid: raster shape mismatch");
}

std::vector<Tensor> standardize_rasters(const std::vector<Tensor>& rasters) {
  std::vector<Tensor> out;
  out.reserve(rasters.size());
  for (const Tensor& r : rasters) {
    detail::require(r.shape().rank() == 2, "standardize_rasters: rank != 2");
    const std::size_t n = r.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += r[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (r[i] - mean) * (r[i] - mean);
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    if (sd == 0.0) sd = 1.0;
    Tensor z = Tensor::zeros(r.shape());
    for (std::size_t i = 0; i < n; ++i) z[i] = (r[i] - mean) / sd;
    out.push_back(std::move(z));
  }
  return out;
}

Tensor feature_map(const std::vector<Tensor>& standardized,
                   const Tensor& weights) {
  detail::require(!standardized.empty(), "feature_map: no rasters");
  detail::require(weights.shape().rank() == 1 &&
                      weights.size() == standardized.size(),
                  "feature_map: weight count mismatch");
  Tensor f = Tensor::zeros(standardized[0].shape());
  for (std::size_t p = 0; p < standardized.size(); ++p) {
    const Tensor& z = standardized[p];
    detail::require(z.shape() == f.shape(),
                    "feature_map: raster shape mismatch");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += weights[p] * z[i];
  }
  f.check_finite("feature_map");
  return f;
}

double gaussian_kernel(double f1, double f2) {
  double d = f1 - f2;
  return std::exp(-0.5 * d * d);
}

Tensor build_adapting_field(const Tensor& feature, int v) {
  detail::require(feature.shape().rank() == 2,
                  "build_adapting_field: feature rank != 2");
  detail::require(v >= 1 && v % 2 == 1, "build_adapting_field: v must be odd");
  const int rows = feature.shape().extent(0);
  const int cols = feature.shape().extent(1);
  const int c = v / 2;
  Tensor field = Tensor::zeros(Shape{rows, cols, v, v});
  for (int p = 0; p < rows; ++p) {
    for (int q = 0; q < cols; ++q) {
      const double fc = feature.at2(p, q);
      for (int i = 0; i < v; ++i) {
        const int a = p + i - c;
        if (a < 0 || a >= rows) continue;
        for (int j = 0; j < v; ++j) {
          const int b = q + j - c;
          if (b < 0 || b >= cols) continue;
          field[((static_cast<std::size_t>(p) * cols + q) * v + i) * v + j] =
              gaussian_kernel(feature.at2(a, b), fc);
        }
      }
    }
  }
  return field;
}

Tensor sac_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
                  const Tensor& field) {
  detail::require(x.shape().rank() == 3 && w.shape().rank() == 4,
                  "sac_conv2d: x must be IxMxN, w OxIxVxV");
  detail::require(field.shape() == (Shape{x.shape().extent(1),
                                          x.shape().extent(2),
                                          w.shape().extent(2),
                                          w.shape().extent(3)}),
                  "sac_conv2d: field shape mismatch");
  Tensor y = Tensor::zeros(Shape{w.shape().extent(0), x.shape().extent(1),
                                 x.shape().extent(2)});
  detail::conv2d_forward(y, x, w, bias, field.data());
  return y;
}

Var feature_map_op(Var weights, const std::vector<Tensor>& standardized) {
  Tape& t = *weights.tape;
  Tensor f = feature_map(standardized, t.value(weights));
  int wi = weights.idx;
  std::vector<Tensor> rasters = standardized;
  return t.emit(std::move(f), t.requires_grad(weights),
                [wi, rasters](Tape& t, int self) {
                  const Tensor& g = t.grad_buf(self);
                  Tensor& gw = t.grad_buf(wi);
                  for (std::size_t p = 0; p < rasters.size(); ++p) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i)
                      acc += g[i] * rasters[p][i];
                    gw[p] += acc;
                  }
                });
}

Var adapting_field_op(Var feature, int v) {
  Tape& t = *feature.tape;
  Tensor field = build_adapting_field(t.value(feature), v);
  int fi = feature.idx;
  return t.emit(
      std::move(field), t.requires_grad(feature), [fi, v](Tape& t, int self) {
        const Tensor& g = t.grad_buf(self);
        const Tensor& k = t.value(Var{&t, self});
        const Tensor& f = t.value(Var{&t, fi});
        Tensor& gf = t.grad_buf(fi);
        const int rows = f.shape().extent(0);
        const int cols = f.shape().extent(1);
        const int c = v / 2;
        for (int p = 0; p < rows; ++p) {
          for (int q = 0; q < cols; ++q) {
            const double fc = f.at2(p, q);
            for (int i = 0; i < v; ++i) {
              const int a = p + i - c;
              if (a < 0 || a >= rows) continue;
              for (int j = 0; j < v; ++j) {
                const int b = q + j - c;
                if (b < 0 || b >= cols) continue;
                const std::size_t idx =
                    ((static_cast<std::size_t>(p) * cols + q) * v + i) * v + j;
                const double d = f.at2(a, b) - fc;
                const double gk = g[idx] * k[idx];
                gf[static_cast<std::size_t>(a) * cols + b] -= d * gk;
                gf[static_cast<std::size_t>(p) * cols + q] += d * gk;
              }
            }
          }
        }
      });
}

}  // namespace sanet
