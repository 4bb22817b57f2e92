#ifndef SANET_TAPE_HPP_
#define SANET_TAPE_HPP_

#include <deque>
#include <functional>

#include "sanet/tensor.hpp"

namespace sanet {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  const Tensor& value() const;
  bool valid() const { return tape != nullptr && idx >= 0; }
};

// Dynamic reverse-mode tape. Nodes are appended in forward order, which is a
// topological order by construction; backward() walks it in reverse and
// accumulates gradients additively. Single-threaded.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, int self)>;

  Var leaf(Tensor value, bool requires_grad = false);
  Var emit(Tensor value, bool requires_grad, BackFn back);

  const Tensor& value(Var v) const { return nodes_[v.idx].value; }
  bool requires_grad(Var v) const { return nodes_[v.idx].requires_grad; }

  // Lazily allocated zero-filled gradient accumulator.
  Tensor& grad_buf(int idx);
  Tensor& grad_buf(Var v) { return grad_buf(v.idx); }
  bool has_grad(int idx) const { return !nodes_[idx].grad.empty(); }

  // Gradient of the last backward() w.r.t. v; zeros if none flowed.
  Tensor grad(Var v);

  // Reverse sweep from a scalar-valued root. Throws on non-scalar roots.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackFn back;
  };
  std::deque<Node> nodes_;  // deque: stable references across emits
};

// Elementwise / structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // Hadamard product
Var scale(Var a, double s);
Var affine(Var a, double mul, double add);  // mul * a + add, elementwise
Var activate(Var a, Act kind);
Var square(Var a);
Var abs_elem(Var a);  // subgradient 0 at 0
Var sum(Var a);       // -> scalar
Var reshape(Var a, Shape shape);
Var replicate_spatial(Var scalar_v, int rows, int cols);

// Linear maps. x may be a K-vector (result: J-vector) or an RxK matrix whose
// rows are mapped independently (result: RxJ).
Var linear(Var x, Var w, Var bias);

// Spatially-invariant convolution, zero padding of width V/2, no activation.
Var conv2d(Var x, Var w, Var bias);

// Convolution modulated by an adapting-kernel field node of shape [M,N,V,V].
Var sac_conv2d(Var x, Var w, Var bias, Var field);

}  // namespace sanet

#endif  // SANET_TAPE_HPP_
