#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "scratchlab/numerics/tensor.hpp"

namespace scratchlab::numerics {

template <class T>
class Tape;

/// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape->requires_grad(id); }
};

/// Reverse-mode tape. Nodes are appended in creation order, and every op's
/// inputs exist before its output, so reverse creation order is a reverse
/// topological order. Single-threaded per tape.
template <class T>
class Tape {
 public:
  /// Backward closure: receives this tape and the gradient of the node's
  /// output, and accumulates into its inputs via `accumulate_grad`.
  using Backward = std::function<void(Tape&, const Tensor<T>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient.
  Var<T> constant(Tensor<T> value) { return push(std::move(value), nullptr, false, {}); }

  /// Leaf referencing caller-owned storage (e.g. a parameter). The referenced
  /// tensor must outlive the tape and must not change while it is in use.
  Var<T> leaf(const Tensor<T>& ref, bool requires_grad = true) {
    return push(Tensor<T>{}, &ref, requires_grad, {});
  }

  /// Leaf owning its value.
  Var<T> owned_leaf(Tensor<T> value, bool requires_grad = true) {
    return push(std::move(value), nullptr, requires_grad, {});
  }

  /// Record an op output. When `requires_grad` is false the closure is dropped.
  Var<T> record(Tensor<T> value, bool requires_grad, Backward backward) {
    return push(std::move(value), nullptr, requires_grad,
                requires_grad ? std::move(backward) : Backward{});
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient buffer for a node, allocated as zeros on first use.
  Tensor<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(value(id).shape());
    return n.grad;
  }

  /// Add `g` into the gradient of node `id` (no-op when it needs no gradient).
  void accumulate_grad(std::size_t id, const Tensor<T>& g) {
    Node& n = nodes_.at(id);
    if (!n.requires_grad) return;
    if (n.grad.empty() && g.shape() == value(id).shape() && !g.empty()) {
      n.grad = g;
      return;
    }
    Tensor<T>& buf = grad_buffer(id);
    if (buf.shape() != g.shape()) {
      throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value " +
                       shape_str(buf.shape()));
    }
    T* d = buf.ptr();
    const T* s = g.ptr();
    for (std::size_t i = 0; i < buf.numel(); ++i) d[i] = d[i] + s[i];
  }

  /// As above; the first gradient to reach a node is moved in.
  void accumulate_grad(std::size_t id, Tensor<T>&& g) {
    Node& n = nodes_.at(id);
    if (!n.requires_grad) return;
    if (n.grad.empty() && g.shape() == value(id).shape() && !g.empty()) {
      n.grad = std::move(g);
      return;
    }
    accumulate_grad(id, static_cast<const Tensor<T>&>(g));
  }

  /// Gradient of node `id`, or nullptr when none reached it.
  const Tensor<T>* grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.grad.empty() ? nullptr : &n.grad;
  }

  /// Run the backward pass from a scalar loss.
  void backward(Var<T> loss) {
    if (loss.tape != this) throw ShapeError("backward: loss belongs to another tape");
    if (value(loss.id).numel() != 1) {
      throw ShapeError("backward: loss must be a scalar, got shape " +
                       shape_str(value(loss.id).shape()));
    }
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id).fill(T{1});
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var<T> push(Tensor<T> value, const Tensor<T>* external, bool requires_grad, Backward bw) {
    nodes_.push_back(Node{std::move(value), external, Tensor<T>{}, requires_grad, std::move(bw)});
    return Var<T>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace scratchlab::numerics
