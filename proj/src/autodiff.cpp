#include "deepalloc/autodiff.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "deepalloc/errors.hpp"
#include "deepalloc/kernels.hpp"

namespace deepalloc::ad {

using tensor::shape_string;

const Tensor& Var::value() const {
  if (tape == nullptr) throw UsageError("use of an unrecorded autodiff variable");
  return tape->value(*this);
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape (was the forward pass recorded?)");
  }
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

const Tensor& Tape::grad(Var v) const {
  check(v);
  if (!backward_done_) throw UsageError("gradient requested before backward()");
  return nodes_[v.id].grad;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id].requires_grad;
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, Backprop backprop) {
  bool needs = false;
  for (auto p : parents) needs = needs || nodes_.at(p).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backprop) : Backprop{}});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

void Tape::backward(Var output) {
  if (nodes_.empty()) throw UsageError("backward() called before any forward pass was recorded");
  check(output);
  if (backward_done_) throw UsageError("backward() already ran on this tape");
  if (nodes_[output.id].value.size() != 1) {
    throw UsageError(fmt::format("backward() needs a scalar output, got shape {}",
                                 shape_string(nodes_[output.id].value.shape())));
  }
  backward_done_ = true;
  for (std::size_t i = 0; i < nodes_.size(); ++i) grad_buffer(i);
  nodes_[output.id].grad[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.backprop) node.backprop(*this, i);
  }
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) throw UsageError(fmt::format("{}: operands on different tapes", op));
  if (a.shape() != b.shape()) {
    throw UsageError(fmt::format("{}: shape mismatch {} vs {}", op, shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
}

template <typename Fwd, typename Bwd>
Var unary(Var a, Fwd fwd, Bwd bwd) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const auto ia = a.id;
  return a.tape->record(std::move(y), {ia}, [ia, bwd](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& x = t.value_of(ia);
    const Tensor& y = t.value_of(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * bwd(x[i], y[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    for (auto p : {ia, ib}) {
      if (!t.needs_grad(p)) continue;
      Tensor& gp = t.grad_buffer(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& va = t.value_of(ia);
    const Tensor& vb = t.value_of(ib);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var div(Var a, Var b) {
  same_shape(a, b, "div");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] / b.value()[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& va = t.value_of(ia);
    const Tensor& vb = t.value_of(ib);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * va[i] / (vb[i] * vb[i]);
    }
  });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softmax(Var x) {
  const Tensor& v = x.value();
  if (v.rank() == 0) throw UsageError("softmax of a scalar");
  const std::size_t k = v.shape().back();
  const std::size_t rows = v.size() / k;
  Tensor y(v.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * k;
    double* out = y.data() + r * k;
    const double top = *std::max_element(in, in + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = std::exp(in[j] - top);
      total += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= total;
  }
  const auto ix = x.id;
  return x.tape->record(std::move(y), {ix}, [ix, k, rows](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& y = t.value_of(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += g[r * k + j] * y[r * k + j];
      for (std::size_t j = 0; j < k; ++j) gx[r * k + j] += y[r * k + j] * (g[r * k + j] - dot);
    }
  });
}

namespace {

Var conv_impl(Var x, Var kernels, std::optional<Var> bias, kernels::ConvDims d, Shape out_shape) {
  const auto& w = kernels.value();
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != d.out_ch)) {
    throw UsageError(fmt::format("convolution bias must have shape [{}]", d.out_ch));
  }
  Tensor y(std::move(out_shape));
  kernels::omp::conv_forward(d, x.value().values(), w.values(),
                             bias ? bias->value().values() : std::span<const double>{}, y.values());
  const auto ix = x.id, iw = kernels.id;
  const std::size_t ib = bias ? bias->id : std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parents{ix, iw};
  if (bias) parents.push_back(ib);
  return x.tape->record(std::move(y), std::move(parents), [ix, iw, ib, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(ix)) {
      kernels::omp::conv_backward_input(d, t.value_of(iw).values(), g.values(),
                                        t.grad_buffer(ix).values());
    }
    const bool want_b = ib != std::numeric_limits<std::size_t>::max() && t.needs_grad(ib);
    if (t.needs_grad(iw) || want_b) {
      Tensor scratch_w;
      std::span<double> dw;
      if (t.needs_grad(iw)) {
        dw = t.grad_buffer(iw).values();
      } else {
        scratch_w = Tensor({d.weight_size()});
        dw = scratch_w.values();
      }
      kernels::omp::conv_backward_weight(d, t.value_of(ix).values(), g.values(), dw,
                                         want_b ? t.grad_buffer(ib).values() : std::span<double>{});
    }
  });
}

}  // namespace

Var conv1d(Var x, Var kernels, std::optional<Var> bias) {
  const auto& xs = x.shape();
  const auto& ws = kernels.shape();
  if ((xs.size() != 2 && xs.size() != 3) || ws.size() != 3) {
    throw UsageError(fmt::format("conv1d expects input [C,L] or [N,C,L] and kernels [O,C,K], got {} and {}",
                                 shape_string(xs), shape_string(ws)));
  }
  const bool batched = xs.size() == 3;
  kernels::ConvDims d;
  d.batch = batched ? xs[0] : 1;
  d.in_ch = xs[xs.size() - 2];
  d.height = 1;
  d.width = xs.back();
  d.out_ch = ws[0];
  d.kernel_h = 1;
  d.kernel_w = ws[2];
  if (ws[1] != d.in_ch) {
    throw UsageError(fmt::format("conv1d: kernels expect {} input channels, input has {}", ws[1], d.in_ch));
  }
  if (d.kernel_w > d.width || d.kernel_w == 0) {
    throw UsageError(fmt::format("conv1d: kernel length {} exceeds input length {}", d.kernel_w, d.width));
  }
  Shape out = batched ? Shape{d.batch, d.out_ch, d.out_w()} : Shape{d.out_ch, d.out_w()};
  return conv_impl(x, kernels, bias, d, std::move(out));
}

Var conv2d(Var x, Var kernels, std::optional<Var> bias) {
  const auto& xs = x.shape();
  const auto& ws = kernels.shape();
  if ((xs.size() != 3 && xs.size() != 4) || ws.size() != 4) {
    throw UsageError(fmt::format(
        "conv2d expects input [C,H,W] or [N,C,H,W] and kernels [O,C,KH,KW], got {} and {}",
        shape_string(xs), shape_string(ws)));
  }
  const bool batched = xs.size() == 4;
  const std::size_t off = batched ? 1 : 0;
  kernels::ConvDims d;
  d.batch = batched ? xs[0] : 1;
  d.in_ch = xs[off];
  d.height = xs[off + 1];
  d.width = xs[off + 2];
  d.out_ch = ws[0];
  d.kernel_h = ws[2];
  d.kernel_w = ws[3];
  if (ws[1] != d.in_ch) {
    throw UsageError(fmt::format("conv2d: kernels expect {} input channels, input has {}", ws[1], d.in_ch));
  }
  if (d.kernel_h > d.height || d.kernel_w > d.width || d.kernel_h == 0 || d.kernel_w == 0) {
    throw UsageError(fmt::format("conv2d: kernel {}x{} exceeds input {}x{}", d.kernel_h, d.kernel_w,
                                 d.height, d.width));
  }
  Shape out = batched ? Shape{d.batch, d.out_ch, d.out_h(), d.out_w()}
                      : Shape{d.out_ch, d.out_h(), d.out_w()};
  return conv_impl(x, kernels, bias, d, std::move(out));
}

Var dense(Var x, Var weights, std::optional<Var> bias) {
  const auto& xs = x.shape();
  const auto& ws = weights.shape();
  if ((xs.size() != 1 && xs.size() != 2) || ws.size() != 2) {
    throw UsageError(fmt::format("dense expects input [I] or [N,I] and weights [O,I], got {} and {}",
                                 shape_string(xs), shape_string(ws)));
  }
  kernels::DenseDims d;
  d.batch = xs.size() == 2 ? xs[0] : 1;
  d.in = xs.back();
  d.out = ws[0];
  if (ws[1] != d.in) {
    throw UsageError(fmt::format("dense: weights expect {} inputs, got {}", ws[1], d.in));
  }
  if (bias && (bias->value().rank() != 1 || bias->value().dim(0) != d.out)) {
    throw UsageError(fmt::format("dense bias must have shape [{}]", d.out));
  }
  Tensor y(xs.size() == 2 ? Shape{d.batch, d.out} : Shape{d.out});
  kernels::omp::dense_forward(d, x.value().values(), weights.value().values(),
                              bias ? bias->value().values() : std::span<const double>{}, y.values());
  const auto ix = x.id, iw = weights.id;
  const std::size_t ib = bias ? bias->id : std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parents{ix, iw};
  if (bias) parents.push_back(ib);
  return x.tape->record(std::move(y), std::move(parents), [ix, iw, ib, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(ix)) {
      kernels::omp::dense_backward_input(d, t.value_of(iw).values(), g.values(),
                                         t.grad_buffer(ix).values());
    }
    const bool want_b = ib != std::numeric_limits<std::size_t>::max() && t.needs_grad(ib);
    if (t.needs_grad(iw) || want_b) {
      Tensor scratch_w;
      std::span<double> dw;
      if (t.needs_grad(iw)) {
        dw = t.grad_buffer(iw).values();
      } else {
        scratch_w = Tensor({d.out * d.in});
        dw = scratch_w.values();
      }
      kernels::omp::dense_backward_weight(d, t.value_of(ix).values(), g.values(), dw,
                                          want_b ? t.grad_buffer(ib).values() : std::span<double>{});
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  const auto ix = x.id;
  return x.tape->record(std::move(y), {ix}, [ix](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var flatten(Var x) {
  const auto& s = x.shape();
  if (s.size() < 2) return reshape(x, Shape{x.value().size()});
  return reshape(x, Shape{s[0], x.value().size() / s[0]});
}

Var concat(Var a, Var b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.empty() || sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    throw UsageError(fmt::format("concat: incompatible shapes {} and {}", shape_string(sa), shape_string(sb)));
  }
  const std::size_t ka = sa.back(), kb = sb.back();
  const std::size_t rows = ka > 0 ? a.value().size() / ka : b.value().size() / std::max<std::size_t>(kb, 1);
  Shape out = sa;
  out.back() = ka + kb;
  Tensor y(out);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * ka, ka, y.data() + r * (ka + kb));
    std::copy_n(b.value().data() + r * kb, kb, y.data() + r * (ka + kb) + ka);
  }
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {ia, ib}, [ia, ib, ka, kb, rows](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < ka; ++j) ga[r * ka + j] += g[r * (ka + kb) + j];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < kb; ++j) gb[r * kb + j] += g[r * (ka + kb) + ka + j];
    }
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const auto ix = x.id;
  return x.tape->record(Tensor::scalar(total), {ix}, [ix](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    for (double& v : t.grad_buffer(ix).values()) v += g;
  });
}

Var mean(Var x) {
  const auto n = x.value().size();
  if (n == 0) throw UsageError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var sum_last(Var x) {
  const auto& s = x.shape();
  if (s.empty()) throw UsageError("sum_last of a scalar");
  const std::size_t k = s.back();
  const std::size_t rows = k > 0 ? x.value().size() / k : 0;
  Tensor y(Shape(s.begin(), s.end() - 1));
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += x.value()[r * k + j];
    y[r] = total;
  }
  const auto ix = x.id;
  return x.tape->record(std::move(y), {ix}, [ix, k, rows](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < k; ++j) gx[r * k + j] += g[r];
  });
}

Var product(Var x) {
  const Tensor& v = x.value();
  double total = 1.0;
  for (double e : v.values()) total *= e;
  const auto ix = x.id;
  return x.tape->record(Tensor::scalar(total), {ix}, [ix](Tape& t, std::size_t self) {
    // d/dx_i = prod_{j != i} x_j via prefix and suffix products (exact with zeros).
    const double g = t.grad_of(self)[0];
    const Tensor& v = t.value_of(ix);
    Tensor& gx = t.grad_buffer(ix);
    const std::size_t n = v.size();
    std::vector<double> suffix(n + 1, 1.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] * v[i];
    double prefix = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      gx[i] += g * prefix * suffix[i + 1];
      prefix *= v[i];
    }
  });
}

Var sum_squares(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v * v;
  const auto ix = x.id;
  return x.tape->record(Tensor::scalar(total), {ix}, [ix](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    const Tensor& v = t.value_of(ix);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < v.size(); ++i) gx[i] += 2.0 * g * v[i];
  });
}

}  // namespace deepalloc::ad
