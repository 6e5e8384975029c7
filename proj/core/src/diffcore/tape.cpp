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

#include "dcsl/diffcore/tape.hpp"

#include <cmath>
#include <string>

#include "dcsl/error.hpp"

namespace dcsl {

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw PreconditionError("Var::scalar on a " + std::to_string(v.rows()) + "x" +
                            std::to_string(v.cols()) + " value");
  }
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant_ref(const Matrix& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const ParamTree& tree, const std::string& name) {
  const std::size_t index = tree.index_of(name);
  auto key = std::make_pair(&tree, index);
  auto it = param_nodes_.find(key);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.ref = &tree.at(index);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(key, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw PreconditionError("Tape::record: input from another tape");
    if (nodes_[in.id_].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Tape::value(const Var& v) const { return node_value(v.id_); }

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw PreconditionError("backward: loss from another tape");
  const Matrix& lv = node_value(loss.id_);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw PreconditionError("backward: loss must be scalar, got " + std::to_string(lv.rows()) +
                            "x" + std::to_string(lv.cols()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (backward_done_ && n.has_grad) return n.grad;
  const Matrix& val = node_value(v.id_);
  return Matrix::Zero(val.rows(), val.cols());
}

ParamTree Tape::gradients(const ParamTree& tree) const {
  ParamTree out = tree.zeros_like();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    auto it = param_nodes_.find(std::make_pair(&tree, i));
    if (it == param_nodes_.end()) continue;
    const Node& n = nodes_[it->second];
    if (backward_done_ && n.has_grad) out.mut(i) = n.grad;
  }
  return out;
}

ParamTree backprop(Tape& tape, const Var& loss, const ParamTree& tree) {
  tape.backward(loss);
  return tape.gradients(tree);
}

namespace ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw PreconditionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                            "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr(fwd);
  const Var inputs[] = {a};
  return t.record(std::move(out), inputs, [a, deriv](Tape& tape, const Matrix& g) {
    // deriv(x, y) gives dy/dx from the input and the output value.
    const Matrix& x = a.value();
    Matrix d(x.rows(), x.cols());
    const double* xp = x.data();
    double* dp = d.data();
    for (Eigen::Index i = 0; i < x.size(); ++i) dp[i] = deriv(xp[i]);
    tape.accumulate(a, g.cwiseProduct(d));
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw PreconditionError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()));
  }
  Tape& t = *a.tape();
  Matrix out = a.value() * b.value();
  const Var inputs[] = {a, b};
  return t.record(std::move(out), inputs, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  const Var inputs[] = {a, b};
  return a.tape()->record(a.value() + b.value(), inputs, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  const Var inputs[] = {a, b};
  return a.tape()->record(a.value() - b.value(), inputs, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(b)) tape.accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  const Var inputs[] = {a, b};
  return a.tape()->record(a.value().cwiseProduct(b.value()), inputs,
                          [a, b](Tape& tape, const Matrix& g) {
                            if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseProduct(b.value()));
                            if (tape.requires_grad(b)) tape.accumulate(b, g.cwiseProduct(a.value()));
                          });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw PreconditionError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                            std::to_string(row.rows()) + "x" + std::to_string(row.cols()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  const Var inputs[] = {a, row};
  return a.tape()->record(std::move(out), inputs, [a, row](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(row)) tape.accumulate(row, g.colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw PreconditionError("mul_col: expected " + std::to_string(a.rows()) + "x1 column");
  }
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  const Var inputs[] = {a, col};
  return a.tape()->record(std::move(out), inputs, [a, col](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) {
      Matrix ga = g.array().colwise() * col.value().col(0).array();
      tape.accumulate(a, ga);
    }
    if (tape.requires_grad(col)) {
      Matrix gc = g.cwiseProduct(a.value()).rowwise().sum();
      tape.accumulate(col, gc);
    }
  });
}

Var scale(const Var& a, double s) {
  const Var inputs[] = {a};
  return a.tape()->record(a.value() * s, inputs,
                          [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, g * s); });
}

Var add_scalar(const Var& a, double s) {
  const Var inputs[] = {a};
  Matrix out = a.value().array() + s;
  return a.tape()->record(std::move(out), inputs,
                          [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double y = std::tanh(x);
        return 1.0 - y * y;
      });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace

Var sigmoid(const Var& a) {
  return unary(a, stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var softplus(const Var& a) { return unary(a, stable_softplus, stable_sigmoid); }

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw PreconditionError("mean of empty value");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  const Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs, [a](Tape& tape, const Matrix& g) {
    Matrix ga = g.col(0).replicate(1, a.cols());
    tape.accumulate(a, ga);
  });
}

Var row_dot(const Var& a, const Var& b) { return row_sum(mul(a, b)); }

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw PreconditionError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw PreconditionError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), inputs, [inputs](Tape& tape, const Matrix& g) {
    Eigen::Index c0 = 0;
    for (const Var& p : inputs) {
      if (tape.requires_grad(p)) tape.accumulate(p, g.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw PreconditionError("slice_cols: range out of bounds");
  }
  Matrix out = a.value().middleCols(start, count);
  const Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs,
                          [a, start, count](Tape& tape, const Matrix& g) {
                            Matrix ga = Matrix::Zero(a.rows(), a.cols());
                            ga.middleCols(start, count) = g;
                            tape.accumulate(a, ga);
                          });
}

Var gather_rows(const Var& a, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw PreconditionError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  const Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs, [a, idx](Tape& tape, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    tape.accumulate(a, ga);
  });
}

Var stop_gradient(const Var& a) { return a.tape()->constant(a.value()); }

}  // namespace ad
}  // namespace dcsl
