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

#ifndef DCSL_DIFFCORE_NN_HPP_
#define DCSL_DIFFCORE_NN_HPP_

#include <span>
#include <string>
#include <vector>

#include "dcsl/diffcore/param_tree.hpp"
#include "dcsl/diffcore/tape.hpp"

namespace dcsl {

enum class Activation { kLinear, kRelu, kElu, kTanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

// Fully connected stack. `sizes` lists input width, hidden widths, and output
// width; layer i maps sizes[i] -> sizes[i+1]. Hidden layers use `hidden`, the
// last layer uses `output`. Leaves are "<name>/w<i>" (in x out) and "<name>/b<i>" (1 x out).
struct MlpSpec {
  std::string name;
  std::vector<int> sizes;
  Activation hidden = Activation::kElu;
  Activation output = Activation::kLinear;

  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }
  int layers() const { return static_cast<int>(sizes.size()) - 1; }
};

// Convenience: `layers` linear layers of width `hidden_width` between in and out.
MlpSpec make_mlp_spec(std::string name, int in, int hidden_width, int layers, int out,
                      Activation hidden);

// Fan-in scaled uniform weights U(-1/sqrt(in), 1/sqrt(in)), zero biases.
void init_mlp(ParamTree& params, const MlpSpec& spec, Rng& rng);

Var mlp_apply(Tape& tape, const ParamTree& params, const MlpSpec& spec, const Var& input);
Matrix mlp_eval(const ParamTree& params, const MlpSpec& spec, const Matrix& input);

// Single-layer LSTM. Leaves: "<name>/wx" (in x 4H), "<name>/wh" (H x 4H),
// "<name>/b" (1 x 4H); gate blocks ordered input, forget, cell, output.
struct LstmSpec {
  std::string name;
  int input = 0;
  int hidden = 0;
};

// wx fan-in uniform, each H x H block of wh orthogonal, zero biases.
void init_lstm(ParamTree& params, const LstmSpec& spec, Rng& rng);

// Runs the recurrence from zero state over `steps` (each batch x input) and
// returns the final hidden state (batch x hidden).
Var lstm_apply(Tape& tape, const ParamTree& params, const LstmSpec& spec,
               std::span<const Var> steps);
Matrix lstm_eval(const ParamTree& params, const LstmSpec& spec, std::span<const Matrix> steps);

Var apply_activation(const Var& x, Activation a);

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_NN_HPP_
