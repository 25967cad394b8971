#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lens/errors.hpp"
#include "lens/tensor.hpp"

namespace lens {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t index = 0;
  friend bool operator==(Var, Var) = default;
};

/// Per-variable gradient slots produced by Tape::backward. A slot is empty
/// until some node accumulates into it.
template <class T>
class Gradients {
 public:
  explicit Gradients(std::size_t n) : slots_(n), present_(n, false) {}

  bool has(Var v) const { return v.index < slots_.size() && present_[v.index]; }

  const Tensor<T>& at(Var v) const {
    if (!has(v)) throw StateError("no gradient recorded for variable " + std::to_string(v.index));
    return slots_[v.index];
  }

  /// Gradient of `v`, or zeros of `shape` when nothing flowed into it.
  Tensor<T> get_or_zero(Var v, const Shape& shape) const {
    return has(v) ? slots_[v.index] : Tensor<T>(shape);
  }

  Tensor<T>& slot(Var v, const Shape& shape) {
    if (!present_[v.index]) {
      slots_[v.index] = Tensor<T>(shape);
      present_[v.index] = true;
    }
    return slots_[v.index];
  }

  Tensor<T> take(Var v) {
    present_.at(v.index) = false;
    return std::move(slots_[v.index]);
  }

 private:
  std::vector<Tensor<T>> slots_;
  std::vector<bool> present_;
};

/// Ordered record of primitive applications. Values are kept by value; each
/// node carries the closure that maps its output gradient onto its inputs.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(const Tape&, const Tensor<T>& grad_out, Gradients<T>&)>;

  Var leaf(Tensor<T> value, bool requires_grad = true) {
    if (!value.all_finite()) throw NumericError("non-finite value in leaf tensor");
    nodes_.push_back(Node{"leaf", std::move(value), {}, {}, requires_grad});
    return Var{nodes_.size() - 1};
  }

  Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// Records `output` as produced by `op` from `inputs`. The backward closure
  /// is dropped when no input needs a gradient.
  Var record(const char* op, Tensor<T> output, std::vector<Var> inputs, BackwardFn fn) {
    if (!output.all_finite()) {
      throw NumericError(std::string("non-finite output from ") + op);
    }
    bool needs = false;
    for (Var in : inputs) needs = needs || nodes_.at(in.index).requires_grad;
    if (!needs) fn = nullptr;
    nodes_.push_back(Node{op, std::move(output), std::move(inputs), std::move(fn), needs});
    return Var{nodes_.size() - 1};
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.index).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  const char* op_name(Var v) const { return nodes_.at(v.index).op; }
  const std::vector<Var>& inputs(Var v) const { return nodes_.at(v.index).inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Drops every node recorded after the first `n`. Used to reuse parameter
  /// leaves across many independent forward passes.
  void truncate(std::size_t n) {
    if (n < nodes_.size()) nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(n), nodes_.end());
  }

  /// Reverse sweep from `output` seeded with `seed`. Nodes recorded after
  /// `output` are ignored; each earlier node is visited once.
  Gradients<T> backward(Var output, const Tensor<T>& seed) const {
    if (nodes_.empty()) throw StateError("backward called on an empty tape");
    if (output.index >= nodes_.size()) throw StateError("backward output is not on this tape");
    if (seed.shape() != value(output).shape()) {
      throw DimensionError("seed shape " + shape_string(seed.shape()) + " does not match output " +
                           shape_string(value(output).shape()));
    }
    Gradients<T> grads(nodes_.size());
    grads.slot(output, seed.shape()) = seed;
    for (std::size_t i = output.index + 1; i-- > 0;) {
      const Node& node = nodes_[i];
      if (!node.backward || !grads.has(Var{i})) continue;
      node.backward(*this, grads.at(Var{i}), grads);
    }
    return grads;
  }

 private:
  struct Node {
    const char* op;
    Tensor<T> value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad;
  };
  std::vector<Node> nodes_;
};

}  // namespace lens
