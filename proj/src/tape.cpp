#include "sanet/tape.hpp"

#include <cmath>
#include <utility>

namespace sanet {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Tensor value, bool requires_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(int idx) {
  Node& n = nodes_[static_cast<std::size_t>(idx)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

Tensor Tape::grad(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.idx)];
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(Var root) {
  detail::require(root.tape == this, "backward: root from another tape");
  detail::require(nodes_[static_cast<std::size_t>(root.idx)].value.size() == 1,
                  "backward: root must be scalar");
  grad_buf(root.idx)[0] += 1.0;
  for (int i = root.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.empty() || !n.back) continue;
    n.back(*this, i);
  }
}

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  detail::require(a.tape != nullptr && a.tape == b.tape,
                  std::string(op) + ": operands on different tapes");
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  detail::require(av.shape() == bv.shape(), "add: shape mismatch");
  Tensor y = av;
  accumulate(y, bv);
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  int ai = a.idx, bi = b.idx;
  return t.emit(std::move(y), rg, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    if (t.requires_grad(Var{&t, ai})) accumulate(t.grad_buf(ai), g);
    if (t.requires_grad(Var{&t, bi})) accumulate(t.grad_buf(bi), g);
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  detail::require(av.shape() == bv.shape(), "sub: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  int ai = a.idx, bi = b.idx;
  return t.emit(std::move(y), rg, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    if (t.requires_grad(Var{&t, ai})) accumulate(t.grad_buf(ai), g);
    if (t.requires_grad(Var{&t, bi})) {
      Tensor& gb = t.grad_buf(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  detail::require(av.shape() == bv.shape(), "mul: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  int ai = a.idx, bi = b.idx;
  return t.emit(std::move(y), rg, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    const Tensor& av = t.value(Var{&t, ai});
    const Tensor& bv = t.value(Var{&t, bi});
    if (t.requires_grad(Var{&t, ai})) {
      Tensor& ga = t.grad_buf(ai);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(Var{&t, bi})) {
      Tensor& gb = t.grad_buf(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double mul, double add) {
  Tape& t = *a.tape;
  detail::require(std::isfinite(mul) && std::isfinite(add),
                  "affine: non-finite coefficient");
  Tensor y = t.value(a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = mul * y[i] + add;
  y.check_finite("affine");
  int ai = a.idx;
  return t.emit(std::move(y), t.requires_grad(a), [ai, mul](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    Tensor& ga = t.grad_buf(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += mul * g[i];
  });
}

Var activate(Var a, Act kind) {
  Tape& t = *a.tape;
  Tensor y = activate(t.value(a), kind);
  int ai = a.idx;
  return t.emit(std::move(y), t.requires_grad(a), [ai, kind](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    const Tensor& y = t.value(Var{&t, self});
    Tensor& ga = t.grad_buf(ai);
    if (kind == Act::kSigmoid) {
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += g[i] * y[i] * (1.0 - y[i]);
    } else {
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += g[i] * (1.0 - y[i] * y[i]);
    }
  });
}

Var square(Var a) {
  Tape& t = *a.tape;
  Tensor y = t.value(a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
  int ai = a.idx;
  return t.emit(std::move(y), t.requires_grad(a), [ai](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    const Tensor& av = t.value(Var{&t, ai});
    Tensor& ga = t.grad_buf(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * 2.0 * av[i];
  });
}

Var abs_elem(Var a) {
  Tape& t = *a.tape;
  Tensor y = t.value(a);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::fabs(y[i]);
  int ai = a.idx;
  return t.emit(std::move(y), t.requires_grad(a), [ai](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    const Tensor& av = t.value(Var{&t, ai});
    Tensor& ga = t.grad_buf(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
      ga[i] += g[i] * s;
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i];
  int ai = a.idx;
  return t.emit(Tensor::scalar(acc), t.requires_grad(a),
                [ai](Tape& t, int self) {
                  double g = t.grad_buf(self)[0];
                  Tensor& ga = t.grad_buf(ai);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
                });
}

Var reshape(Var a, Shape shape) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  detail::require(shape.count() == av.size(),
                  "reshape: element count mismatch");
  Tensor y(std::move(shape),
           std::vector<double>(av.data(), av.data() + av.size()));
  int ai = a.idx;
  return t.emit(std::move(y), t.requires_grad(a), [ai](Tape& t, int self) {
    const Tensor& g = t.grad_buf(self);
    Tensor& ga = t.grad_buf(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var replicate_spatial(Var scalar_v, int rows, int cols) {
  Tape& t = *scalar_v.tape;
  const Tensor& sv = t.value(scalar_v);
  detail::require(sv.size() == 1, "replicate_spatial: input must be scalar");
  Tensor y = Tensor::full(Shape{rows, cols}, sv[0]);
  int ai = scalar_v.idx;
  return t.emit(std::move(y), t.requires_grad(scalar_v),
                [ai](Tape& t, int self) {
                  const Tensor& g = t.grad_buf(self);
                  double acc = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
                  t.grad_buf(ai)[0] += acc;
                });
}

Var linear(Var x, Var w, Var bias) {
  check_same_tape(x, w, "dense");
  check_same_tape(x, bias, "dense");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(bias);
  detail::require(xv.shape().rank() == 1 || xv.shape().rank() == 2,
                  "dense: x must be rank 1 or 2");
  const bool vec = xv.shape().rank() == 1;
  const int rows = vec ? 1 : xv.shape().extent(0);
  const int k = vec ? xv.shape().extent(0) : xv.shape().extent(1);
  detail::require(wv.shape().rank() == 2 && wv.shape().extent(1) == k,
                  "dense: weight/input size mismatch");
  const int j = wv.shape().extent(0);
  detail::require(bv.shape() == Shape{j}, "dense: bias size mismatch");

  Tensor x2(Shape{rows, k},
            std::vector<double>(xv.data(), xv.data() + xv.size()));
  Tensor y2 = Tensor::zeros(Shape{rows, j});
  detail::linear_rows_forward(y2, x2, wv, bv);
  Tensor y = vec ? Tensor(Shape{j}, std::vector<double>(
                                        y2.data(), y2.data() + y2.size()))
                 : std::move(y2);

  bool rg = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias);
  int xi = x.idx, wi = w.idx, bi = bias.idx;
  return t.emit(
      std::move(y), rg, [xi, wi, bi, rows, k, j](Tape& t, int self) {
        const Tensor& gy = t.grad_buf(self);
        const Tensor& xv = t.value(Var{&t, xi});
        Tensor g2(Shape{rows, j},
                  std::vector<double>(gy.data(), gy.data() + gy.size()));
        Tensor x2(Shape{rows, k},
                  std::vector<double>(xv.data(), xv.data() + xv.size()));
        const bool need_x = t.requires_grad(Var{&t, xi});
        const bool need_w = t.requires_grad(Var{&t, wi});
        const bool need_b = t.requires_grad(Var{&t, bi});
        Tensor gx2 = Tensor::zeros(Shape{rows, k});
        detail::linear_rows_backward(g2, x2, t.value(Var{&t, wi}),
                                     need_x ? &gx2 : nullptr,
                                     need_w ? &t.grad_buf(wi) : nullptr,
                                     need_b ? &t.grad_buf(bi) : nullptr);
        if (need_x) accumulate(t.grad_buf(xi), gx2);
      });
}

namespace {

Var conv2d_impl(Var x, Var w, Var bias, Var field, bool adapting) {
  check_same_tape(x, w, "conv2d");
  check_same_tape(x, bias, "conv2d");
  if (adapting) check_same_tape(x, field, "sac_conv2d");
  Tape& t = *x.tape;
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(bias);
  detail::require(xv.shape().rank() == 3 && wv.shape().rank() == 4,
                  "conv2d: x must be IxMxN, w OxIxVxV");
  const double* fptr = nullptr;
  if (adapting) {
    const Tensor& fv = t.value(field);
    detail::require(fv.shape().rank() == 4 &&
                        fv.shape().extent(0) == xv.shape().extent(1) &&
                        fv.shape().extent(1) == xv.shape().extent(2) &&
                        fv.shape().extent(2) == wv.shape().extent(2) &&
                        fv.shape().extent(3) == wv.shape().extent(3),
                    "sac_conv2d: field shape mismatch");
    fptr = fv.data();
  }
  Tensor y = Tensor::zeros(Shape{wv.shape().extent(0), xv.shape().extent(1),
                                 xv.shape().extent(2)});
  detail::conv2d_forward(y, xv, wv, bv, fptr);

  bool rg = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias) ||
            (adapting && t.requires_grad(field));
  int xi = x.idx, wi = w.idx, bi = bias.idx;
  int fi = adapting ? field.idx : -1;
  return t.emit(std::move(y), rg, [xi, wi, bi, fi](Tape& t, int self) {
    const Tensor& gy = t.grad_buf(self);
    const Tensor& xv = t.value(Var{&t, xi});
    const Tensor& wv = t.value(Var{&t, wi});
    const double* fptr = fi >= 0 ? t.value(Var{&t, fi}).data() : nullptr;
    Tensor* gx = t.requires_grad(Var{&t, xi}) ? &t.grad_buf(xi) : nullptr;
    Tensor* gw = t.requires_grad(Var{&t, wi}) ? &t.grad_buf(wi) : nullptr;
    Tensor* gb = t.requires_grad(Var{&t, bi}) ? &t.grad_buf(bi) : nullptr;
    double* gf = (fi >= 0 && t.requires_grad(Var{&t, fi}))
                     ? t.grad_buf(fi).data()
                     : nullptr;
    detail::conv2d_backward(gy, xv, wv, fptr, gx, gw, gb, gf);
  });
}

}  // namespace

Var conv2d(Var x, Var w, Var bias) {
  return conv2d_impl(x, w, bias, Var{}, false);
}

Var sac_conv2d(Var x, Var w, Var bias, Var field) {
  return conv2d_impl(x, w, bias, field, true);
}

}  // namespace sanet
