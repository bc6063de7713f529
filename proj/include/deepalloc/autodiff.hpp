#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "deepalloc/tensor.hpp"

namespace deepalloc::ad {

using tensor::Shape;
using tensor::Tensor;

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Operations append nodes in evaluation order, so the
/// node list is already topologically sorted; backward() walks it once in
/// reverse. A tape is single-threaded and single-use.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var variable(Tensor value);
  /// Leaf treated as a constant.
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  /// Gradient of the backward() output w.r.t. `v`; zeros if unreached.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Propagates d(output)/d(node) to every node. Output must be a single value.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }

  // Used by operations to record themselves.
  using Backprop = std::function<void(Tape&, std::size_t self)>;
  Var record(Tensor value, std::vector<std::size_t> parents, Backprop backprop);
  Tensor& grad_buffer(std::size_t id);
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  void check(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Elementwise arithmetic (shapes must match exactly; no broadcasting).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var square(Var a);
Var sqrt(Var a);

// Activations.
Var relu(Var x);
Var sigmoid(Var x);
/// Softmax over the last axis, computed with max-subtraction.
Var softmax(Var x);

// Layers. Inputs may be unbatched or carry a leading batch axis.
/// x [C, L] or [N, C, L]; kernels [O, C, K]; bias [O] or none.
Var conv1d(Var x, Var kernels, std::optional<Var> bias = std::nullopt);
/// x [C, H, W] or [N, C, H, W]; kernels [O, C, KH, KW]; bias [O] or none.
Var conv2d(Var x, Var kernels, std::optional<Var> bias = std::nullopt);
/// x [I] or [N, I]; weights [O, I]; bias [O].
Var dense(Var x, Var weights, std::optional<Var> bias = std::nullopt);

// Shape manipulation.
Var reshape(Var x, Shape shape);
/// Keeps the leading (batch) axis and flattens the rest: [N, ...] -> [N, prod(...)].
Var flatten(Var x);
/// Concatenates along the last axis; leading axes must agree.
Var concat(Var a, Var b);

// Reductions.
Var sum(Var x);
Var mean(Var x);
/// Sum over the last axis: [N, K] -> [N].
Var sum_last(Var x);
/// Product of all entries, to a scalar.
Var product(Var x);
Var sum_squares(Var x);

}  // namespace deepalloc::ad
