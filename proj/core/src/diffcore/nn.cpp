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

#include "dcsl/diffcore/nn.hpp"

#include <cmath>

#include "dcsl/error.hpp"

namespace dcsl {

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::kLinear;
  if (name == "relu") return Activation::kRelu;
  if (name == "elu") return Activation::kElu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kElu: return "elu";
    case Activation::kTanh: return "tanh";
  }
  return "linear";
}

MlpSpec make_mlp_spec(std::string name, int in, int hidden_width, int layers, int out,
                      Activation hidden) {
  if (layers < 1) throw ConfigError("mlp '" + name + "' needs at least one layer");
  MlpSpec spec;
  spec.name = std::move(name);
  spec.hidden = hidden;
  spec.sizes.push_back(in);
  for (int i = 0; i + 1 < layers; ++i) spec.sizes.push_back(hidden_width);
  spec.sizes.push_back(out);
  return spec;
}

void init_mlp(ParamTree& params, const MlpSpec& spec, Rng& rng) {
  for (int l = 0; l < spec.layers(); ++l) {
    const int in = spec.sizes[l];
    const int out = spec.sizes[l + 1];
    if (in <= 0 || out <= 0) throw ConfigError("mlp '" + spec.name + "': non-positive width");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
    params.add(spec.name + "/w" + std::to_string(l), std::move(w));
    params.add(spec.name + "/b" + std::to_string(l), Matrix::Zero(1, out));
  }
}

Var apply_activation(const Var& x, Activation a) {
  switch (a) {
    case Activation::kLinear: return x;
    case Activation::kRelu: return ad::relu(x);
    case Activation::kElu: return ad::elu(x);
    case Activation::kTanh: return ad::tanh(x);
  }
  return x;
}

Var mlp_apply(Tape& tape, const ParamTree& params, const MlpSpec& spec, const Var& input) {
  Var h = input;
  for (int l = 0; l < spec.layers(); ++l) {
    const std::string layer = spec.name + "/w" + std::to_string(l);
    Var w = tape.param(params, layer);
    Var b = tape.param(params, spec.name + "/b" + std::to_string(l));
    if (h.cols() != w.rows()) {
      throw ConfigError("layer " + layer + ": expected input width " + std::to_string(w.rows()) +
                        ", got " + std::to_string(h.cols()));
    }
    h = ad::add_row(ad::matmul(h, w), b);
    h = apply_activation(h, l + 1 == spec.layers() ? spec.output : spec.hidden);
  }
  return h;
}

Matrix mlp_eval(const ParamTree& params, const MlpSpec& spec, const Matrix& input) {
  Tape tape;
  return mlp_apply(tape, params, spec, tape.constant_ref(input)).value();
}

namespace {

Matrix orthogonal(Rng& rng, int n) {
  Matrix g = standard_normal_matrix(rng, n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix makes the draw uniform over the orthogonal group.
  Eigen::MatrixXd r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

void init_lstm(ParamTree& params, const LstmSpec& spec, Rng& rng) {
  if (spec.input <= 0 || spec.hidden <= 0) throw ConfigError("lstm '" + spec.name + "': bad size");
  const int h = spec.hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.input));
  Matrix wx(spec.input, 4 * h);
  for (Eigen::Index i = 0; i < wx.size(); ++i) wx.data()[i] = uniform(rng, -bound, bound);
  Matrix wh(h, 4 * h);
  for (int g = 0; g < 4; ++g) wh.middleCols(g * h, h) = orthogonal(rng, h);
  params.add(spec.name + "/wx", std::move(wx));
  params.add(spec.name + "/wh", std::move(wh));
  params.add(spec.name + "/b", Matrix::Zero(1, 4 * h));
}

Var lstm_apply(Tape& tape, const ParamTree& params, const LstmSpec& spec,
               std::span<const Var> steps) {
  if (steps.empty()) throw PreconditionError("lstm '" + spec.name + "': empty sequence");
  Var wx = tape.param(params, spec.name + "/wx");
  Var wh = tape.param(params, spec.name + "/wh");
  Var b = tape.param(params, spec.name + "/b");
  const Eigen::Index batch = steps[0].rows();
  const int h = spec.hidden;
  Var hidden;
  Var cell;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const Var& x = steps[t];
    if (x.cols() != wx.rows()) {
      throw ConfigError("layer " + spec.name + "/wx: expected input width " +
                        std::to_string(wx.rows()) + ", got " + std::to_string(x.cols()));
    }
    if (x.rows() != batch) throw PreconditionError("lstm: non-uniform batch across steps");
    Var pre = ad::add_row(ad::matmul(x, wx), b);
    if (t > 0) pre = ad::add(pre, ad::matmul(hidden, wh));
    Var i = ad::sigmoid(ad::slice_cols(pre, 0, h));
    Var g = ad::tanh(ad::slice_cols(pre, 2 * h, h));
    Var o = ad::sigmoid(ad::slice_cols(pre, 3 * h, h));
    if (t == 0) {
      cell = ad::mul(i, g);
    } else {
      Var f = ad::sigmoid(ad::slice_cols(pre, h, h));
      cell = ad::add(ad::mul(f, cell), ad::mul(i, g));
    }
    hidden = ad::mul(o, ad::tanh(cell));
  }
  return hidden;
}

Matrix lstm_eval(const ParamTree& params, const LstmSpec& spec, std::span<const Matrix> steps) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(steps.size());
  for (const Matrix& s : steps) vars.push_back(tape.constant_ref(s));
  return lstm_apply(tape, params, spec, vars).value();
}

}  // namespace dcsl
