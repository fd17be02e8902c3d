/*
 * Copyright 2026 The dasnas Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dense 64-bit tensors and the reverse-mode gradient tape that records
// operations on them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasnas/errors.hpp"

namespace dasnas {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

class Tape;

/// Row-major array of doubles. Copies share storage until one side writes
/// through mutable_values(), so tensors behave as values. A tensor produced by
/// a watched input or a recorded operation also refers to its tape node.
class Tensor {
 public:
  Tensor() : data_(std::make_shared<std::vector<double>>(1, 0.0)) {}

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_dims();
    data_ = std::make_shared<std::vector<double>>(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
    check_dims();
    if (values.size() != shape_size(shape_)) {
      throw DimensionError("tensor of shape " + to_string(shape_) + " given " +
                           std::to_string(values.size()) + " values");
    }
    data_ = std::make_shared<std::vector<double>>(std::move(values));
  }

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= shape_.size()) throw DimensionError("axis out of range for " + to_string(shape_));
    return shape_[axis];
  }
  std::size_t size() const noexcept { return data_->size(); }

  std::span<const double> values() const noexcept { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }

  double item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape_));
    return (*data_)[0];
  }

  /// Writable view. Detaches from the tape and from any storage shared with
  /// other tensors (including values captured by recorded operations).
  std::span<double> mutable_values() {
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
    tape_ = nullptr;
    return *data_;
  }

  bool tracked() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t node() const noexcept { return node_; }

  /// Same values, no tape membership.
  Tensor detach() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    return t;
  }

  /// Bitwise value equality (shape and data).
  bool same_values(const Tensor& other) const {
    return shape_ == other.shape_ && *data_ == *other.data_;
  }

 private:
  friend class Tape;

  void check_dims() const {
    for (auto d : shape_) {
      if (d == 0) throw ArgumentError("tensor dimensions must be positive, got " + to_string(shape_));
    }
  }

  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Gradients of one backward pass, keyed by the watched tensors.
class Gradients {
 public:
  /// Gradient of `param`, which must have been watched on the tape that ran
  /// backward. Parameters the loss does not depend on get zeros.
  const Tensor& of(const Tensor& param) const {
    if (param.tape() != tape_ || param.node() >= by_node_.size() || !by_node_[param.node()]) {
      throw ArgumentError("tensor is not a watched parameter of this tape");
    }
    return *by_node_[param.node()];
  }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::optional<Tensor>> by_node_;
};

/// Append-only record of operations. Nodes are appended in evaluation order,
/// so reverse append order is a valid reverse topological order.
class Tape {
 public:
  /// Receives the output gradient and one accumulation pointer per operation
  /// input (nullptr for inputs that need no gradient). Rules add into the
  /// pointed-to buffers, which have the size of the corresponding input.
  using Rule = std::function<void(std::span<const double> grad_out, std::span<double* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `value` as a differentiable leaf. Storage is shared, not copied.
  Tensor watch(const Tensor& value) {
    Tensor t = value;
    t.tape_ = this;
    t.node_ = nodes_.size();
    nodes_.push_back(Node{t.shape_, t.size(), {}, {}, true});
    return t;
  }

  /// Returns the tape shared by the tracked inputs, or nullptr when none is
  /// tracked. Mixing tensors from different tapes is a state error.
  static Tape* common(std::initializer_list<const Tensor*> inputs) {
    Tape* found = nullptr;
    for (const Tensor* t : inputs) {
      if (!t || !t->tape_) continue;
      if (found && found != t->tape_) throw StateError("operands belong to different tapes");
      found = t->tape_;
    }
    return found;
  }

  static Tape* common(std::span<const Tensor> inputs) {
    Tape* found = nullptr;
    for (const Tensor& t : inputs) {
      if (!t.tape_) continue;
      if (found && found != t.tape_) throw StateError("operands belong to different tapes");
      found = t.tape_;
    }
    return found;
  }

  /// Appends a node producing `value` from `inputs` and returns `value`
  /// attached to it. Untracked inputs are treated as constants.
  Tensor record(Tensor value, std::vector<const Tensor*> inputs, Rule rule) {
    Node node;
    node.shape = value.shape_;
    node.size = value.size();
    node.rule = std::move(rule);
    node.parents.reserve(inputs.size());
    for (const Tensor* in : inputs) {
      if (in && in->tape_ == this) {
        node.parents.push_back(in->node_);
      } else if (in && in->tape_) {
        throw StateError("operand belongs to a different tape");
      } else {
        node.parents.push_back(kNone);
      }
    }
    value.tape_ = this;
    value.node_ = nodes_.size();
    nodes_.push_back(std::move(node));
    return value;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Gradients of fan-out inputs accumulate.
  Gradients backward(const Tensor& loss) const {
    if (loss.size() != 1) throw ArgumentError("loss must be a scalar, got shape " + to_string(loss.shape()));
    if (loss.tape_ != this) throw StateError("loss was not recorded on this tape");

    std::vector<std::vector<double>> grads(nodes_.size());
    grads[loss.node_].assign(1, 1.0);
    std::vector<double*> slots;
    for (std::size_t i = loss.node_ + 1; i-- > 0;) {
      const Node& node = nodes_[i];
      if (grads[i].empty() || node.leaf) continue;
      slots.assign(node.parents.size(), nullptr);
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        const std::size_t p = node.parents[k];
        if (p == kNone) continue;
        if (grads[p].empty()) grads[p].assign(nodes_[p].size, 0.0);
        slots[k] = grads[p].data();
      }
      node.rule(grads[i], slots);
      std::vector<double>().swap(grads[i]);
    }

    Gradients out;
    out.tape_ = this;
    out.by_node_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!nodes_[i].leaf) continue;
      if (grads[i].empty()) grads[i].assign(nodes_[i].size, 0.0);
      out.by_node_[i] = Tensor(nodes_[i].shape, std::move(grads[i]));
    }
    return out;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Shape shape;
    std::size_t size = 0;
    std::vector<std::size_t> parents;
    Rule rule;
    bool leaf = false;
  };

  std::vector<Node> nodes_;
};

}  // namespace dasnas
