#ifndef SANET_TENSOR_HPP_
#define SANET_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace sanet {

// Ordered list of positive extents. Layout of all tensors is row-major over
// these extents.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims);
  explicit Shape(std::vector<int> dims);

  int rank() const { return static_cast<int>(dims_.size()); }
  int extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t count() const;
  bool operator==(const Shape&) const = default;
  std::string to_string() const;

 private:
  std::vector<int> dims_;
};

// Dense 64-bit float array. Values are finite by construction; a NaN or Inf
// anywhere (including results of internal ops) throws.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return full(Shape{1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double at2(int i, int j) const;
  double at3(int i, int j, int k) const;

  // Throws std::domain_error naming `what` if any value is non-finite.
  void check_finite(const char* what) const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

enum class Act { kSigmoid, kTanh };

// Eq.-level primitive ops on plain tensors. Activation is never fused into
// conv2d/dense; callers apply it.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor activate(const Tensor& x, Act kind);

double sigmoid_scalar(double x);

namespace detail {

// Shared forward/backward kernels. `field`, when non-null, is the flattened
// [M,N,V,V] adapting-kernel raster; null means the spatially-invariant
// convolution. Both paths add terms in the identical (n,i,j) order per output
// cell so a field of ones is bitwise equal to the plain convolution.
void conv2d_forward(Tensor& y, const Tensor& x, const Tensor& w,
                    const Tensor& bias, const double* field);
void conv2d_backward(const Tensor& grad_y, const Tensor& x, const Tensor& w,
                     const double* field, Tensor* grad_x, Tensor* grad_w,
                     Tensor* grad_bias, double* grad_field);

// y[r,j] = sum_k w[j,k] * x[r,k] + bias[j], rows handled independently.
void linear_rows_forward(Tensor& y, const Tensor& x, const Tensor& w,
                         const Tensor& bias);
void linear_rows_backward(const Tensor& grad_y, const Tensor& x,
                          const Tensor& w, Tensor* grad_x, Tensor* grad_w,
                          Tensor* grad_bias);

void require(bool cond, const std::string& message);

}  // namespace detail

}  // namespace sanet

#endif  // SANET_TENSOR_HPP_
