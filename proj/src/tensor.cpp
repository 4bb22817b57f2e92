#include "sanet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sanet {

namespace detail {

void require(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument(message);
}

}  // namespace detail

Shape::Shape(std::initializer_list<int> dims) : dims_(dims) {
  for (int d : dims_)
    detail::require(d >= 1, "Shape: every extent must be >= 1");
}

Shape::Shape(std::vector<int> dims) : dims_(std::move(dims)) {
  for (int d : dims_)
    detail::require(d >= 1, "Shape: every extent must be >= 1");
}

std::size_t Shape::count() const {
  std::size_t n = 1;
  for (int d : dims_) n *= static_cast<std::size_t>(d);
  return n;
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  detail::require(values_.size() == shape_.count(),
                  "Tensor: value count does not match shape " +
                      shape_.to_string());
  check_finite("Tensor construction");
}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape.count();
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape.count();
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

double Tensor::at2(int i, int j) const {
  return values_[static_cast<std::size_t>(i) *
                     static_cast<std::size_t>(shape_.extent(1)) +
                 static_cast<std::size_t>(j)];
}

double Tensor::at3(int i, int j, int k) const {
  std::size_t d1 = static_cast<std::size_t>(shape_.extent(1));
  std::size_t d2 = static_cast<std::size_t>(shape_.extent(2));
  return values_[(static_cast<std::size_t>(i) * d1 +
                  static_cast<std::size_t>(j)) *
                     d2 +
                 static_cast<std::size_t>(k)];
}

void Tensor::check_finite(const char* what) const {
  for (double v : values_) {
    if (!std::isfinite(v))
      throw std::domain_error(std::string(what) + ": non-finite value");
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

void conv2d_forward(Tensor& y, const Tensor& x, const Tensor& w,
                    const Tensor& bias, const double* field) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  require(xs.rank() == 3 && ws.rank() == 4, "conv2d: x must be IxMxN, w OxIxVxV");
  const int in_ch = xs.extent(0), rows = xs.extent(1), cols = xs.extent(2);
  const int out_ch = ws.extent(0), v = ws.extent(2);
  require(ws.extent(1) == in_ch, "conv2d: input channel mismatch");
  require(ws.extent(3) == v && v % 2 == 1, "conv2d: kernel must be odd VxV");
  require(bias.shape() == Shape{out_ch}, "conv2d: bias must have one entry per output channel");
  require(y.shape() == (Shape{out_ch, rows, cols}), "conv2d: bad output shape");

  const int half = v / 2;
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  const double* xd = x.data();
  const double* wd = w.data();
  double* yd = y.data();
  // Field reads would stride by V*V in the q loop; transpose [M,N,V,V] into
  // [V,V,M,N] scratch once so the hot loop is contiguous.
  thread_local std::vector<double> fscratch;
  const double* ft = nullptr;
  if (field != nullptr) {
    fscratch.resize(static_cast<std::size_t>(v) * v * plane);
    for (std::size_t t = 0; t < plane; ++t) {
      const double* src = field + t * v * v;
      for (int k = 0; k < v * v; ++k) {
        fscratch[static_cast<std::size_t>(k) * plane + t] = src[k];
      }
    }
    ft = fscratch.data();
  }

  for (int m = 0; m < out_ch; ++m) {
    double* yplane = yd + static_cast<std::size_t>(m) * plane;
    const double b = bias[static_cast<std::size_t>(m)];
    for (std::size_t t = 0; t < plane; ++t) yplane[t] = b;
  }
  // Term order per output cell is (n, i, j) row-major for both the plain and
  // the field-adapted path.
  if (v == 3 && cols >= 2 && rows >= 2) {
    // Fast path for the common kernel size: one fused sweep per channel pair
    // applies all nine taps, chained per cell in the same (n, i, j)
    // accumulation sequence as the generic nest below, each add rounded
    // separately. Top and bottom rows drop the taps that fall off the grid.
    const int c1 = cols - 1;
    const int r1 = rows - 1;
    for (int m = 0; m < out_ch; ++m) {
      double* yplane = yd + static_cast<std::size_t>(m) * plane;
      for (int n = 0; n < in_ch; ++n) {
        const double* xplane = xd + static_cast<std::size_t>(n) * plane;
        const std::size_t wbase = (static_cast<std::size_t>(m) * in_ch + n) * 9;
        const double w00 = wd[wbase], w01 = wd[wbase + 1], w02 = wd[wbase + 2];
        const double w10 = wd[wbase + 3], w11 = wd[wbase + 4],
                     w12 = wd[wbase + 5];
        const double w20 = wd[wbase + 6], w21 = wd[wbase + 7],
                     w22 = wd[wbase + 8];
        if (ft == nullptr) {
          {
            double* __restrict__ yrow = yplane;
            const double* __restrict__ xb = xplane;
            const double* __restrict__ xc = xplane + cols;
            yrow[0] = (((yrow[0] + w11 * xb[0]) + w12 * xb[1]) + w21 * xc[0]) +
                      w22 * xc[1];
            for (int q = 1; q < c1; ++q) {
              yrow[q] = (((((yrow[q] + w10 * xb[q - 1]) + w11 * xb[q]) +
                           w12 * xb[q + 1]) +
                          w20 * xc[q - 1]) +
                         w21 * xc[q]) +
                        w22 * xc[q + 1];
            }
            yrow[c1] = (((yrow[c1] + w10 * xb[c1 - 1]) + w11 * xb[c1]) +
                        w20 * xc[c1 - 1]) +
                       w21 * xc[c1];
          }
          for (int p = 1; p < r1; ++p) {
            double* __restrict__ yrow =
                yplane + static_cast<std::size_t>(p) * cols;
            const double* __restrict__ xa =
                xplane + static_cast<std::size_t>(p - 1) * cols;
            const double* __restrict__ xb = xa + cols;
            const double* __restrict__ xc = xb + cols;
            yrow[0] = (((((yrow[0] + w01 * xa[0]) + w02 * xa[1]) +
                         w11 * xb[0]) +
                        w12 * xb[1]) +
                       w21 * xc[0]) +
                      w22 * xc[1];
            for (int q = 1; q < c1; ++q) {
              yrow[q] = ((((((((yrow[q] + w00 * xa[q - 1]) + w01 * xa[q]) +
                              w02 * xa[q + 1]) +
                             w10 * xb[q - 1]) +
                            w11 * xb[q]) +
                           w12 * xb[q + 1]) +
                          w20 * xc[q - 1]) +
                         w21 * xc[q]) +
                        w22 * xc[q + 1];
            }
            yrow[c1] = (((((yrow[c1] + w00 * xa[c1 - 1]) + w01 * xa[c1]) +
                          w10 * xb[c1 - 1]) +
                         w11 * xb[c1]) +
                        w20 * xc[c1 - 1]) +
                       w21 * xc[c1];
          }
          {
            double* __restrict__ yrow =
                yplane + static_cast<std::size_t>(r1) * cols;
            const double* __restrict__ xa =
                xplane + static_cast<std::size_t>(r1 - 1) * cols;
            const double* __restrict__ xb = xa + cols;
            yrow[0] = (((yrow[0] + w01 * xa[0]) + w02 * xa[1]) + w11 * xb[0]) +
                      w12 * xb[1];
            for (int q = 1; q < c1; ++q) {
              yrow[q] = (((((yrow[q] + w00 * xa[q - 1]) + w01 * xa[q]) +
                           w02 * xa[q + 1]) +
                          w10 * xb[q - 1]) +
                         w11 * xb[q]) +
                        w12 * xb[q + 1];
            }
            yrow[c1] = (((yrow[c1] + w00 * xa[c1 - 1]) + w01 * xa[c1]) +
                        w10 * xb[c1 - 1]) +
                       w11 * xb[c1];
          }
        } else {
          for (int p = 0; p < rows; ++p) {
            double* __restrict__ yrow =
                yplane + static_cast<std::size_t>(p) * cols;
            const double* __restrict__ xb =
                xplane + static_cast<std::size_t>(p) * cols;
            const std::size_t off = static_cast<std::size_t>(p) * cols;
            const double* __restrict__ k00 = ft + off;
            const double* __restrict__ k01 = k00 + plane;
            const double* __restrict__ k02 = k01 + plane;
            const double* __restrict__ k10 = k02 + plane;
            const double* __restrict__ k11 = k10 + plane;
            const double* __restrict__ k12 = k11 + plane;
            const double* __restrict__ k20 = k12 + plane;
            const double* __restrict__ k21 = k20 + plane;
            const double* __restrict__ k22 = k21 + plane;
            if (p > 0 && p < r1) {
              const double* __restrict__ xa = xb - cols;
              const double* __restrict__ xc = xb + cols;
              yrow[0] = (((((yrow[0] + w01 * xa[0] * k01[0]) +
                            w02 * xa[1] * k02[0]) +
                           w11 * xb[0] * k11[0]) +
                          w12 * xb[1] * k12[0]) +
                         w21 * xc[0] * k21[0]) +
                        w22 * xc[1] * k22[0];
              for (int q = 1; q < c1; ++q) {
                yrow[q] = ((((((((yrow[q] + w00 * xa[q - 1] * k00[q]) +
                                 w01 * xa[q] * k01[q]) +
                                w02 * xa[q + 1] * k02[q]) +
                               w10 * xb[q - 1] * k10[q]) +
                              w11 * xb[q] * k11[q]) +
                             w12 * xb[q + 1] * k12[q]) +
                            w20 * xc[q - 1] * k20[q]) +
                           w21 * xc[q] * k21[q]) +
                          w22 * xc[q + 1] * k22[q];
              }
              yrow[c1] = (((((yrow[c1] + w00 * xa[c1 - 1] * k00[c1]) +
                             w01 * xa[c1] * k01[c1]) +
                            w10 * xb[c1 - 1] * k10[c1]) +
                           w11 * xb[c1] * k11[c1]) +
                          w20 * xc[c1 - 1] * k20[c1]) +
                         w21 * xc[c1] * k21[c1];
            } else if (p == 0) {
              const double* __restrict__ xc = xb + cols;
              yrow[0] = (((yrow[0] + w11 * xb[0] * k11[0]) +
                          w12 * xb[1] * k12[0]) +
                         w21 * xc[0] * k21[0]) +
                        w22 * xc[1] * k22[0];
              for (int q = 1; q < c1; ++q) {
                yrow[q] = (((((yrow[q] + w10 * xb[q - 1] * k10[q]) +
                              w11 * xb[q] * k11[q]) +
                             w12 * xb[q + 1] * k12[q]) +
                            w20 * xc[q - 1] * k20[q]) +
                           w21 * xc[q] * k21[q]) +
                          w22 * xc[q + 1] * k22[q];
              }
              yrow[c1] = (((yrow[c1] + w10 * xb[c1 - 1] * k10[c1]) +
                           w11 * xb[c1] * k11[c1]) +
                          w20 * xc[c1 - 1] * k20[c1]) +
                         w21 * xc[c1] * k21[c1];
            } else {
              const double* __restrict__ xa = xb - cols;
              yrow[0] = (((yrow[0] + w01 * xa[0] * k01[0]) +
                          w02 * xa[1] * k02[0]) +
                         w11 * xb[0] * k11[0]) +
                        w12 * xb[1] * k12[0];
              for (int q = 1; q < c1; ++q) {
                yrow[q] = (((((yrow[q] + w00 * xa[q - 1] * k00[q]) +
                              w01 * xa[q] * k01[q]) +
                             w02 * xa[q + 1] * k02[q]) +
                            w10 * xb[q - 1] * k10[q]) +
                           w11 * xb[q] * k11[q]) +
                          w12 * xb[q + 1] * k12[q];
              }
              yrow[c1] = (((yrow[c1] + w00 * xa[c1 - 1] * k00[c1]) +
                           w01 * xa[c1] * k01[c1]) +
                          w10 * xb[c1 - 1] * k10[c1]) +
                         w11 * xb[c1] * k11[c1];
            }
          }
        }
      }
    }
    y.check_finite("conv2d");
    return;
  }
  for (int m = 0; m < out_ch; ++m) {
    double* yplane = yd + static_cast<std::size_t>(m) * plane;
    for (int n = 0; n < in_ch; ++n) {
      const double* xplane = xd + static_cast<std::size_t>(n) * plane;
      const std::size_t wbase =
          (static_cast<std::size_t>(m) * in_ch + n) * v * v;
      for (int i = 0; i < v; ++i) {
        const int di = i - half;
        for (int j = 0; j < v; ++j) {
          const int dj = j - half;
          const double wv = wd[wbase + static_cast<std::size_t>(i) * v + j];
          const int p0 = di < 0 ? -di : 0;
          const int p1 = di > 0 ? rows - di : rows;
          const int q0 = dj < 0 ? -dj : 0;
          const int q1 = dj > 0 ? cols - dj : cols;
          const double* fplane =
              ft != nullptr
                  ? ft + static_cast<std::size_t>(i * v + j) * plane
                  : nullptr;
          for (int p = p0; p < p1; ++p) {
            double* yrow = yplane + static_cast<std::size_t>(p) * cols;
            const double* xrow =
                xplane + static_cast<std::size_t>(p + di) * cols + dj;
            if (fplane == nullptr) {
              for (int q = q0; q < q1; ++q) yrow[q] += wv * xrow[q];
            } else {
              const double* krow = fplane + static_cast<std::size_t>(p) * cols;
              for (int q = q0; q < q1; ++q) {
                double term = wv * xrow[q];
                yrow[q] += term * krow[q];
              }
            }
          }
        }
      }
    }
  }
  y.check_finite("conv2d");
}

void conv2d_backward(const Tensor& grad_y, const Tensor& x, const Tensor& w,
                     const double* field, Tensor* grad_x, Tensor* grad_w,
                     Tensor* grad_bias, double* grad_field) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const int in_ch = xs.extent(0), rows = xs.extent(1), cols = xs.extent(2);
  const int out_ch = ws.extent(0), v = ws.extent(2);
  const int half = v / 2;
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  const double* gd = grad_y.data();
  const double* xd = x.data();
  const double* wd = w.data();
  // Same [V,V,M,N] transposition as the forward pass; the field gradient is
  // accumulated in transposed scratch and scattered back once at the end.
  thread_local std::vector<double> fscratch_b;
  thread_local std::vector<double> gfscratch;
  const double* ft = nullptr;
  double* gft = nullptr;
  if (field != nullptr) {
    fscratch_b.resize(static_cast<std::size_t>(v) * v * plane);
    for (std::size_t t = 0; t < plane; ++t) {
      const double* src = field + t * v * v;
      for (int k = 0; k < v * v; ++k) {
        fscratch_b[static_cast<std::size_t>(k) * plane + t] = src[k];
      }
    }
    ft = fscratch_b.data();
    if (grad_field != nullptr) {
      gfscratch.assign(static_cast<std::size_t>(v) * v * plane, 0.0);
      gft = gfscratch.data();
    }
  }

  if (grad_bias != nullptr) {
    for (int m = 0; m < out_ch; ++m) {
      const double* gplane = gd + static_cast<std::size_t>(m) * plane;
      double acc = 0.0;
      for (std::size_t t = 0; t < plane; ++t) acc += gplane[t];
      (*grad_bias)[static_cast<std::size_t>(m)] += acc;
    }
  }
  if (v == 3 && cols >= 2 && rows >= 2) {
    // Fast path mirroring the forward one: a single fused sweep per channel
    // pair covers all three kernel rows. Each weight accumulator keeps its
    // row-major (p, q) visit order and each grad_x cell its (i, j) term
    // order, so the results are bitwise those of the generic nest below.
    const int c1 = cols - 1;
    const int r1 = rows - 1;
    for (int m = 0; m < out_ch; ++m) {
      const double* gplane = gd + static_cast<std::size_t>(m) * plane;
      for (int n = 0; n < in_ch; ++n) {
        const double* xplane = xd + static_cast<std::size_t>(n) * plane;
        double* gxplane = grad_x != nullptr
                              ? grad_x->data() + static_cast<std::size_t>(n) * plane
                              : nullptr;
        const std::size_t wbase = (static_cast<std::size_t>(m) * in_ch + n) * 9;
        const double w00 = wd[wbase], w01 = wd[wbase + 1], w02 = wd[wbase + 2];
        const double w10 = wd[wbase + 3], w11 = wd[wbase + 4],
                     w12 = wd[wbase + 5];
        const double w20 = wd[wbase + 6], w21 = wd[wbase + 7],
                     w22 = wd[wbase + 8];
        double a00 = 0.0, a01 = 0.0, a02 = 0.0;
        double a10 = 0.0, a11 = 0.0, a12 = 0.0;
        double a20 = 0.0, a21 = 0.0, a22 = 0.0;
        if (ft == nullptr) {
          for (int p = 0; p < rows; ++p) {
            const double* __restrict__ g0 =
                gplane + static_cast<std::size_t>(p) * cols;
            const double* __restrict__ xb =
                xplane + static_cast<std::size_t>(p) * cols;
            double* __restrict__ gxr =
                gxplane != nullptr
                    ? gxplane + static_cast<std::size_t>(p) * cols
                    : nullptr;
            if (p > 0 && p < r1) {
              const double* __restrict__ xa = xb - cols;
              const double* __restrict__ xc = xb + cols;
              a01 += g0[0] * xa[0];
              a02 += g0[0] * xa[1];
              a11 += g0[0] * xb[0];
              a12 += g0[0] * xb[1];
              a21 += g0[0] * xc[0];
              a22 += g0[0] * xc[1];
              for (int q = 1; q < c1; ++q) {
                a00 += g0[q] * xa[q - 1];
                a01 += g0[q] * xa[q];
                a02 += g0[q] * xa[q + 1];
                a10 += g0[q] * xb[q - 1];
                a11 += g0[q] * xb[q];
                a12 += g0[q] * xb[q + 1];
                a20 += g0[q] * xc[q - 1];
                a21 += g0[q] * xc[q];
                a22 += g0[q] * xc[q + 1];
              }
              a00 += g0[c1] * xa[c1 - 1];
              a01 += g0[c1] * xa[c1];
              a10 += g0[c1] * xb[c1 - 1];
              a11 += g0[c1] * xb[c1];
              a20 += g0[c1] * xc[c1 - 1];
              a21 += g0[c1] * xc[c1];
              if (gxr != nullptr) {
                const double* __restrict__ gm1 = g0 - cols;
                const double* __restrict__ gp1 = g0 + cols;
                gxr[0] = (((((gxr[0] + gp1[1] * w00) + gp1[0] * w01) +
                            g0[1] * w10) +
                           g0[0] * w11) +
                          gm1[1] * w20) +
                         gm1[0] * w21;
                for (int q = 1; q < c1; ++q) {
                  gxr[q] = ((((((((gxr[q] + gp1[q + 1] * w00) + gp1[q] * w01) +
                                 gp1[q - 1] * w02) +
                                g0[q + 1] * w10) +
                               g0[q] * w11) +
                              g0[q - 1] * w12) +
                             gm1[q + 1] * w20) +
                            gm1[q] * w21) +
                           gm1[q - 1] * w22;
                }
                gxr[c1] = (((((gxr[c1] + gp1[c1] * w01) + gp1[c1 - 1] * w02) +
                             g0[c1] * w11) +
                            g0[c1 - 1] * w12) +
                           gm1[c1] * w21) +
                          gm1[c1 - 1] * w22;
              }
            } else if (p == 0) {
              const double* __restrict__ xc = xb + cols;
              a11 += g0[0] * xb[0];
              a12 += g0[0] * xb[1];
              a21 += g0[0] * xc[0];
              a22 += g0[0] * xc[1];
              for (int q = 1; q < c1; ++q) {
                a10 += g0[q] * xb[q - 1];
                a11 += g0[q] * xb[q];
                a12 += g0[q] * xb[q + 1];
                a20 += g0[q] * xc[q - 1];
                a21 += g0[q] * xc[q];
                a22 += g0[q] * xc[q + 1];
              }
              a10 += g0[c1] * xb[c1 - 1];
              a11 += g0[c1] * xb[c1];
              a20 += g0[c1] * xc[c1 - 1];
              a21 += g0[c1] * xc[c1];
              if (gxr != nullptr) {
                const double* __restrict__ gp1 = g0 + cols;
                gxr[0] = (((gxr[0] + gp1[1] * w00) + gp1[0] * w01) +
                          g0[1] * w10) +
                         g0[0] * w11;
                for (int q = 1; q < c1; ++q) {
                  gxr[q] = ((((((gxr[q] + gp1[q + 1] * w00) + gp1[q] * w01) +
                               gp1[q - 1] * w02) +
                              g0[q + 1] * w10) +
                             g0[q] * w11) +
                            g0[q - 1] * w12);
                }
                gxr[c1] = (((gxr[c1] + gp1[c1] * w01) + gp1[c1 - 1] * w02) +
                           g0[c1] * w11) +
                          g0[c1 - 1] * w12;
              }
            } else {
              const double* __restrict__ xa = xb - cols;
              a01 += g0[0] * xa[0];
              a02 += g0[0] * xa[1];
              a11 += g0[0] * xb[0];
              a12 += g0[0] * xb[1];
              for (int q = 1; q < c1; ++q) {
                a00 += g0[q] * xa[q - 1];
                a01 += g0[q] * xa[q];
                a02 += g0[q] * xa[q + 1];
                a10 += g0[q] * xb[q - 1];
                a11 += g0[q] * xb[q];
                a12 += g0[q] * xb[q + 1];
              }
              a00 += g0[c1] * xa[c1 - 1];
              a01 += g0[c1] * xa[c1];
              a10 += g0[c1] * xb[c1 - 1];
              a11 += g0[c1] * xb[c1];
              if (gxr != nullptr) {
                const double* __restrict__ gm1 = g0 - cols;
                gxr[0] = (((gxr[0] + g0[1] * w10) + g0[0] * w11) +
                          gm1[1] * w20) +
                         gm1[0] * w21;
                for (int q = 1; q < c1; ++q) {
                  gxr[q] = ((((((gxr[q] + g0[q + 1] * w10) + g0[q] * w11) +
                               g0[q - 1] * w12) +
                              gm1[q + 1] * w20) +
                             gm1[q] * w21) +
                            gm1[q - 1] * w22);
                }
                gxr[c1] = (((gxr[c1] + g0[c1] * w11) + g0[c1 - 1] * w12) +
                           gm1[c1] * w21) +
                          gm1[c1 - 1] * w22;
              }
            }
          }
        } else {
          for (int p = 0; p < rows; ++p) {
            const std::size_t off = static_cast<std::size_t>(p) * cols;
            const double* __restrict__ g0 = gplane + off;
            const double* __restrict__ xb = xplane + off;
            const double* __restrict__ k00 = ft + off;
            const double* __restrict__ k01 = k00 + plane;
            const double* __restrict__ k02 = k01 + plane;
            const double* __restrict__ k10 = k02 + plane;
            const double* __restrict__ k11 = k10 + plane;
            const double* __restrict__ k12 = k11 + plane;
            const double* __restrict__ k20 = k12 + plane;
            const double* __restrict__ k21 = k20 + plane;
            const double* __restrict__ k22 = k21 + plane;
            double* __restrict__ gxr =
                gxplane != nullptr ? gxplane + off : nullptr;
            if (p > 0 && p < r1) {
              const double* __restrict__ xa = xb - cols;
              const double* __restrict__ xc = xb + cols;
              a01 += g0[0] * xa[0] * k01[0];
              a02 += g0[0] * xa[1] * k02[0];
              a11 += g0[0] * xb[0] * k11[0];
              a12 += g0[0] * xb[1] * k12[0];
              a21 += g0[0] * xc[0] * k21[0];
              a22 += g0[0] * xc[1] * k22[0];
              for (int q = 1; q < c1; ++q) {
                a00 += g0[q] * xa[q - 1] * k00[q];
                a01 += g0[q] * xa[q] * k01[q];
                a02 += g0[q] * xa[q + 1] * k02[q];
                a10 += g0[q] * xb[q - 1] * k10[q];
                a11 += g0[q] * xb[q] * k11[q];
                a12 += g0[q] * xb[q + 1] * k12[q];
                a20 += g0[q] * xc[q - 1] * k20[q];
                a21 += g0[q] * xc[q] * k21[q];
                a22 += g0[q] * xc[q + 1] * k22[q];
              }
              a00 += g0[c1] * xa[c1 - 1] * k00[c1];
              a01 += g0[c1] * xa[c1] * k01[c1];
              a10 += g0[c1] * xb[c1 - 1] * k10[c1];
              a11 += g0[c1] * xb[c1] * k11[c1];
              a20 += g0[c1] * xc[c1 - 1] * k20[c1];
              a21 += g0[c1] * xc[c1] * k21[c1];
              if (gft != nullptr) {
                double* __restrict__ gk00 = gft + off;
                double* __restrict__ gk01 = gk00 + plane;
                double* __restrict__ gk02 = gk01 + plane;
                double* __restrict__ gk10 = gk02 + plane;
                double* __restrict__ gk11 = gk10 + plane;
                double* __restrict__ gk12 = gk11 + plane;
                double* __restrict__ gk20 = gk12 + plane;
                double* __restrict__ gk21 = gk20 + plane;
                double* __restrict__ gk22 = gk21 + plane;
                gk01[0] += g0[0] * w01 * xa[0];
                gk02[0] += g0[0] * w02 * xa[1];
                gk11[0] += g0[0] * w11 * xb[0];
                gk12[0] += g0[0] * w12 * xb[1];
                gk21[0] += g0[0] * w21 * xc[0];
                gk22[0] += g0[0] * w22 * xc[1];
                for (int q = 1; q < c1; ++q) {
                  gk00[q] += g0[q] * w00 * xa[q - 1];
                  gk01[q] += g0[q] * w01 * xa[q];
                  gk02[q] += g0[q] * w02 * xa[q + 1];
                  gk10[q] += g0[q] * w10 * xb[q - 1];
                  gk11[q] += g0[q] * w11 * xb[q];
                  gk12[q] += g0[q] * w12 * xb[q + 1];
                  gk20[q] += g0[q] * w20 * xc[q - 1];
                  gk21[q] += g0[q] * w21 * xc[q];
                  gk22[q] += g0[q] * w22 * xc[q + 1];
                }
                gk00[c1] += g0[c1] * w00 * xa[c1 - 1];
                gk01[c1] += g0[c1] * w01 * xa[c1];
                gk10[c1] += g0[c1] * w10 * xb[c1 - 1];
                gk11[c1] += g0[c1] * w11 * xb[c1];
                gk20[c1] += g0[c1] * w20 * xc[c1 - 1];
                gk21[c1] += g0[c1] * w21 * xc[c1];
              }
              if (gxr != nullptr) {
                const double* __restrict__ gm1 = g0 - cols;
                const double* __restrict__ gp1 = g0 + cols;
                const double* __restrict__ ka0 = k00 + cols;
                const double* __restrict__ ka1 = k01 + cols;
                const double* __restrict__ ka2 = k02 + cols;
                const double* __restrict__ kc0 = k20 - cols;
                const double* __restrict__ kc1 = k21 - cols;
                const double* __restrict__ kc2 = k22 - cols;
                gxr[0] = (((((gxr[0] + gp1[1] * w00 * ka0[1]) +
                             gp1[0] * w01 * ka1[0]) +
                            g0[1] * w10 * k10[1]) +
                           g0[0] * w11 * k11[0]) +
                          gm1[1] * w20 * kc0[1]) +
                         gm1[0] * w21 * kc1[0];
                for (int q = 1; q < c1; ++q) {
                  gxr[q] = ((((((((gxr[q] + gp1[q + 1] * w00 * ka0[q + 1]) +
                                  gp1[q] * w01 * ka1[q]) +
                                 gp1[q - 1] * w02 * ka2[q - 1]) +
                                g0[q + 1] * w10 * k10[q + 1]) +
                               g0[q] * w11 * k11[q]) +
                              g0[q - 1] * w12 * k12[q - 1]) +
                             gm1[q + 1] * w20 * kc0[q + 1]) +
                            gm1[q] * w21 * kc1[q]) +
                           gm1[q - 1] * w22 * kc2[q - 1];
                }
                gxr[c1] = (((((gxr[c1] + gp1[c1] * w01 * ka1[c1]) +
                              gp1[c1 - 1] * w02 * ka2[c1 - 1]) +
                             g0[c1] * w11 * k11[c1]) +
                            g0[c1 - 1] * w12 * k12[c1 - 1]) +
                           gm1[c1] * w21 * kc1[c1]) +
                          gm1[c1 - 1] * w22 * kc2[c1 - 1];
              }
            } else if (p == 0) {
              const double* __restrict__ xc = xb + cols;
              a11 += g0[0] * xb[0] * k11[0];
              a12 += g0[0] * xb[1] * k12[0];
              a21 += g0[0] * xc[0] * k21[0];
              a22 += g0[0] * xc[1] * k22[0];
              for (int q = 1; q < c1; ++q) {
                a10 += g0[q] * xb[q - 1] * k10[q];
                a11 += g0[q] * xb[q] * k11[q];
                a12 += g0[q] * xb[q + 1] * k12[q];
                a20 += g0[q] * xc[q - 1] * k20[q];
                a21 += g0[q] * xc[q] * k21[q];
                a22 += g0[q] * xc[q + 1] * k22[q];
              }
              a10 += g0[c1] * xb[c1 - 1] * k10[c1];
              a11 += g0[c1] * xb[c1] * k11[c1];
              a20 += g0[c1] * xc[c1 - 1] * k20[c1];
              a21 += g0[c1] * xc[c1] * k21[c1];
              if (gft != nullptr) {
                double* __restrict__ gk10 = gft + 3 * plane + off;
                double* __restrict__ gk11 = gk10 + plane;
                double* __restrict__ gk12 = gk11 + plane;
                double* __restrict__ gk20 = gk12 + plane;
                double* __restrict__ gk21 = gk20 + plane;
                double* __restrict__ gk22 = gk21 + plane;
                gk11[0] += g0[0] * w11 * xb[0];
                gk12[0] += g0[0] * w12 * xb[1];
                gk21[0] += g0[0] * w21 * xc[0];
                gk22[0] += g0[0] * w22 * xc[1];
                for (int q = 1; q < c1; ++q) {
                  gk10[q] += g0[q] * w10 * xb[q - 1];
                  gk11[q] += g0[q] * w11 * xb[q];
                  gk12[q] += g0[q] * w12 * xb[q + 1];
                  gk20[q] += g0[q] * w20 * xc[q - 1];
                  gk21[q] += g0[q] * w21 * xc[q];
                  gk22[q] += g0[q] * w22 * xc[q + 1];
                }
                gk10[c1] += g0[c1] * w10 * xb[c1 - 1];
                gk11[c1] += g0[c1] * w11 * xb[c1];
                gk20[c1] += g0[c1] * w20 * xc[c1 - 1];
                gk21[c1] += g0[c1] * w21 * xc[c1];
              }
              if (gxr != nullptr) {
                const double* __restrict__ gp1 = g0 + cols;
                const double* __restrict__ ka0 = k00 + cols;
                const double* __restrict__ ka1 = k01 + cols;
                const double* __restrict__ ka2 = k02 + cols;
                gxr[0] = (((gxr[0] + gp1[1] * w00 * ka0[1]) +
                           gp1[0] * w01 * ka1[0]) +
                          g0[1] * w10 * k10[1]) +
                         g0[0] * w11 * k11[0];
                for (int q = 1; q < c1; ++q) {
                  gxr[q] = ((((((gxr[q] + gp1[q + 1] * w00 * ka0[q + 1]) +
                                gp1[q] * w01 * ka1[q]) +
                               gp1[q - 1] * w02 * ka2[q - 1]) +
                              g0[q + 1] * w10 * k10[q + 1]) +
                             g0[q] * w11 * k11[q]) +
                            g0[q - 1] * w12 * k12[q - 1]);
                }
                gxr[c1] = (((gxr[c1] + gp1[c1] * w01 * ka1[c1]) +
                            gp1[c1 - 1] * w02 * ka2[c1 - 1]) +
                           g0[c1] * w11 * k11[c1]) +
                          g0[c1 - 1] * w12 * k12[c1 - 1];
              }
            } else {
              const double* __restrict__ xa = xb - cols;
              a01 += g0[0] * xa[0] * k01[0];
              a02 += g0[0] * xa[1] * k02[0];
              a11 += g0[0] * xb[0] * k11[0];
              a12 += g0[0] * xb[1] * k12[0];
              for (int q = 1; q < c1; ++q) {
                a00 += g0[q] * xa[q - 1] * k00[q];
                a01 += g0[q] * xa[q] * k01[q];
                a02 += g0[q] * xa[q + 1] * k02[q];
                a10 += g0[q] * xb[q - 1] * k10[q];
                a11 += g0[q] * xb[q] * k11[q];
                a12 += g0[q] * xb[q + 1] * k12[q];
              }
              a00 += g0[c1] * xa[c1 - 1] * k00[c1];
              a01 += g0[c1] * xa[c1] * k01[c1];
              a10 += g0[c1] * xb[c1 - 1] * k10[c1];
              a11 += g0[c1] * xb[c1] * k11[c1];
              if (gft != nullptr) {
                double* __restrict__ gk00 = gft + off;
                double* __restrict__ gk01 = gk00 + plane;
                double* __restrict__ gk02 = gk01 + plane;
                double* __restrict__ gk10 = gk02 + plane;
                double* __restrict__ gk11 = gk10 + plane;
                double* __restrict__ gk12 = gk11 + plane;
                gk01[0] += g0[0] * w01 * xa[0];
                gk02[0] += g0[0] * w02 * xa[1];
                gk11[0] += g0[0] * w11 * xb[0];
                gk12[0] += g0[0] * w12 * xb[1];
                for (int q = 1; q < c1; ++q) {
                  gk00[q] += g0[q] * w00 * xa[q - 1];
                  gk01[q] += g0[q] * w01 * xa[q];
                  gk02[q] += g0[q] * w02 * xa[q + 1];
                  gk10[q] += g0[q] * w10 * xb[q - 1];
                  gk11[q] += g0[q] * w11 * xb[q];
                  gk12[q] += g0[q] * w12 * xb[q + 1];
                }
                gk00[c1] += g0[c1] * w00 * xa[c1 - 1];
                gk01[c1] += g0[c1] * w01 * xa[c1];
                gk10[c1] += g0[c1] * w10 * xb[c1 - 1];
                gk11[c1] += g0[c1] * w11 * xb[c1];
              }
              if (gxr != nullptr) {
                const double* __restrict__ gm1 = g0 - cols;
                const double* __restrict__ kc0 = k20 - cols;
                const double* __restrict__ kc1 = k21 - cols;
                const double* __restrict__ kc2 = k22 - cols;
                gxr[0] = (((gxr[0] + g0[1] * w10 * k10[1]) +
                           g0[0] * w11 * k11[0]) +
                          gm1[1] * w20 * kc0[1]) +
                         gm1[0] * w21 * kc1[0];
                for (int q = 1; q < c1; ++q) {
                  gxr[q] = ((((((gxr[q] + g0[q + 1] * w10 * k10[q + 1]) +
                                g0[q] * w11 * k11[q]) +
                               g0[q - 1] * w12 * k12[q - 1]) +
                              gm1[q + 1] * w20 * kc0[q + 1]) +
                             gm1[q] * w21 * kc1[q]) +
                            gm1[q - 1] * w22 * kc2[q - 1]);
                }
                gxr[c1] = (((gxr[c1] + g0[c1] * w11 * k11[c1]) +
                            g0[c1 - 1] * w12 * k12[c1 - 1]) +
                           gm1[c1] * w21 * kc1[c1]) +
                          gm1[c1 - 1] * w22 * kc2[c1 - 1];
              }
            }
          }
        }
        if (grad_w != nullptr) {
          (*grad_w)[wbase] += a00;
          (*grad_w)[wbase + 1] += a01;
          (*grad_w)[wbase + 2] += a02;
          (*grad_w)[wbase + 3] += a10;
          (*grad_w)[wbase + 4] += a11;
          (*grad_w)[wbase + 5] += a12;
          (*grad_w)[wbase + 6] += a20;
          (*grad_w)[wbase + 7] += a21;
          (*grad_w)[wbase + 8] += a22;
        }
      }
    }
  } else {
    for (int m = 0; m < out_ch; ++m) {
      const double* gplane = gd + static_cast<std::size_t>(m) * plane;
      for (int n = 0; n < in_ch; ++n) {
        const double* xplane = xd + static_cast<std::size_t>(n) * plane;
        double* gxplane = grad_x != nullptr
                              ? grad_x->data() + static_cast<std::size_t>(n) * plane
                              : nullptr;
        const std::size_t wbase =
            (static_cast<std::size_t>(m) * in_ch + n) * v * v;
        for (int i = 0; i < v; ++i) {
          const int di = i - half;
          for (int j = 0; j < v; ++j) {
            const int dj = j - half;
            const std::size_t widx =
                wbase + static_cast<std::size_t>(i) * v + j;
            const double wv = wd[widx];
            const int p0 = di < 0 ? -di : 0;
            const int p1 = di > 0 ? rows - di : rows;
            const int q0 = dj < 0 ? -dj : 0;
            const int q1 = dj > 0 ? cols - dj : cols;
            const std::size_t fbase =
                static_cast<std::size_t>(i * v + j) * plane;
            double wacc = 0.0;
            for (int p = p0; p < p1; ++p) {
              const double* grow = gplane + static_cast<std::size_t>(p) * cols;
              const double* xrow =
                  xplane + static_cast<std::size_t>(p + di) * cols + dj;
              double* gxrow =
                  gxplane != nullptr
                      ? gxplane + static_cast<std::size_t>(p + di) * cols + dj
                      : nullptr;
              if (ft == nullptr) {
                for (int q = q0; q < q1; ++q) {
                  const double g = grow[q];
                  wacc += g * xrow[q];
                  if (gxrow != nullptr) gxrow[q] += g * wv;
                }
              } else {
                const double* krow =
                    ft + fbase + static_cast<std::size_t>(p) * cols;
                double* gkrow =
                    gft != nullptr
                        ? gft + fbase + static_cast<std::size_t>(p) * cols
                        : nullptr;
                for (int q = q0; q < q1; ++q) {
                  const double g = grow[q];
                  const double k = krow[q];
                  wacc += g * xrow[q] * k;
                  if (gxrow != nullptr) gxrow[q] += g * wv * k;
                  if (gkrow != nullptr) gkrow[q] += g * wv * xrow[q];
                }
              }
            }
            if (grad_w != nullptr) (*grad_w)[widx] += wacc;
          }
        }
      }
    }
  }
  if (gft != nullptr) {
    for (std::size_t t = 0; t < plane; ++t) {
      double* dst = grad_field + t * v * v;
      for (int k = 0; k < v * v; ++k) {
        dst[k] += gft[static_cast<std::size_t>(k) * plane + t];
      }
    }
  }
}

void linear_rows_forward(Tensor& y, const Tensor& x, const Tensor& w,
                         const Tensor& bias) {
  const int r = x.shape().extent(0), k = x.shape().extent(1);
  const int j = w.shape().extent(0);
  require(w.shape().extent(1) == k, "dense: weight/input size mismatch");
  require(bias.shape() == Shape{j}, "dense: bias size mismatch");
  require(y.shape() == (Shape{r, j}), "dense: bad output shape");
  for (int row = 0; row < r; ++row) {
    const double* xrow = x.data() + static_cast<std::size_t>(row) * k;
    double* yrow = y.data() + static_cast<std::size_t>(row) * j;
    for (int out = 0; out < j; ++out) {
      const double* wrow = w.data() + static_cast<std::size_t>(out) * k;
      double acc = bias[static_cast<std::size_t>(out)];
      for (int in = 0; in < k; ++in) acc += wrow[in] * xrow[in];
      yrow[out] = acc;
    }
  }
  y.check_finite("dense");
}

void linear_rows_backward(const Tensor& grad_y, const Tensor& x,
                          const Tensor& w, Tensor* grad_x, Tensor* grad_w,
                          Tensor* grad_bias) {
  const int r = x.shape().extent(0), k = x.shape().extent(1);
  const int j = w.shape().extent(0);
  for (int row = 0; row < r; ++row) {
    const double* grow = grad_y.data() + static_cast<std::size_t>(row) * j;
    const double* xrow = x.data() + static_cast<std::size_t>(row) * k;
    for (int out = 0; out < j; ++out) {
      const double g = grow[out];
      const double* wrow = w.data() + static_cast<std::size_t>(out) * k;
      if (grad_bias != nullptr) (*grad_bias)[static_cast<std::size_t>(out)] += g;
      if (grad_w != nullptr) {
        double* gwrow = grad_w->data() + static_cast<std::size_t>(out) * k;
        for (int in = 0; in < k; ++in) gwrow[in] += g * xrow[in];
      }
      if (grad_x != nullptr) {
        double* gxrow = grad_x->data() + static_cast<std::size_t>(row) * k;
        for (int in = 0; in < k; ++in) gxrow[in] += g * wrow[in];
      }
    }
  }
}

}  // namespace detail

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  detail::require(x.shape().rank() == 3 && w.shape().rank() == 4,
                  "conv2d: x must be IxMxN, w OxIxVxV");
  Tensor y = Tensor::zeros(
      Shape{w.shape().extent(0), x.shape().extent(1), x.shape().extent(2)});
  detail::conv2d_forward(y, x, w, bias, nullptr);
  return y;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  detail::require(a.shape() == b.shape(), "hadamard: shape mismatch " +
                                              a.shape().to_string() + " vs " +
                                              b.shape().to_string());
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& bias) {
  detail::require(x.shape().rank() == 1 && w.shape().rank() == 2,
                  "dense: x must be a vector, w a JxK matrix");
  Tensor x2(Shape{1, x.shape().extent(0)},
            std::vector<double>(x.data(), x.data() + x.size()));
  Tensor y = Tensor::zeros(Shape{1, w.shape().extent(0)});
  detail::linear_rows_forward(y, x2, w, bias);
  return Tensor(Shape{w.shape().extent(0)},
                std::vector<double>(y.data(), y.data() + y.size()));
}

Tensor activate(const Tensor& x, Act kind) {
  Tensor out = Tensor::zeros(x.shape());
  if (kind == Act::kSigmoid) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid_scalar(x[i]);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  }
  return out;
}

}  // namespace sanet
