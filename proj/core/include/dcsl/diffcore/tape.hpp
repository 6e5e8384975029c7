// Copyright 2026 The DCSL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DCSL_DIFFCORE_TAPE_HPP_
#define DCSL_DIFFCORE_TAPE_HPP_

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcsl/diffcore/param_tree.hpp"
#include "dcsl/diffcore/tensor.hpp"

namespace dcsl {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
// tape that produced it.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode recorder. Every operation appends a node holding its value and,
// when any input is differentiable, a closure that pushes the node's gradient
// back to its inputs.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Non-differentiable view onto an existing matrix, which must outlive the tape.
  Var constant_ref(const Matrix& value);
  // Differentiable leaf whose gradient can be read with grad().
  Var variable(Matrix value);
  // Differentiable reference to a parameter leaf. Repeated calls for the same
  // (tree, name) return the same Var.
  Var param(const ParamTree& tree, const std::string& name);

  // Used by ops: records a node computed from `inputs`.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  const Matrix& value(const Var& v) const;
  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }

  // Propagates d(loss)/d(node) through the tape. `loss` must be 1x1.
  void backward(const Var& loss);

  // Gradient of the last backward() for a node; zeros if unreachable.
  Matrix grad(const Var& v) const;

  // Gradients for every leaf in `tree`; leaves not reached are zero.
  ParamTree gradients(const ParamTree& tree) const;

  // Adds `g` to the gradient slot of `v` (for use inside backward closures).
  void accumulate(const Var& v, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  const Matrix& node_value(int id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamTree*, std::size_t>, int> param_nodes_;
  bool backward_done_ = false;
};

// Runs backward on `loss` and returns gradients for `tree`.
ParamTree backprop(Tape& tape, const Var& loss, const ParamTree& tree);

namespace ad {

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// a (m x n) + row (1 x n) broadcast over rows.
Var add_row(const Var& a, const Var& row);
// a (m x n) * column (m x 1) broadcast over columns.
Var mul_col(const Var& a, const Var& col);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);

Var relu(const Var& a);
Var elu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);
// Gradient is passed only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);

Var sum(const Var& a);
Var mean(const Var& a);
// Per-row sum: m x n -> m x 1.
Var row_sum(const Var& a);
// Per-row dot product: (m x n, m x n) -> m x 1.
Var row_dot(const Var& a, const Var& b);

Var concat_cols(std::span<const Var> parts);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::span<const int> rows);
Var stop_gradient(const Var& a);

}  // namespace ad

inline Var operator+(const Var& a, const Var& b) { return ad::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ad::sub(a, b); }
inline Var operator-(const Var& a) { return ad::neg(a); }
inline Var operator*(double s, const Var& a) { return ad::scale(a, s); }
inline Var operator*(const Var& a, double s) { return ad::scale(a, s); }

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_TAPE_HPP_
