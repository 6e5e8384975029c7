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

#include "dcsl/diffcore/adam.hpp"

#include <cmath>

#include "dcsl/error.hpp"

namespace dcsl {

AdamState AdamState::zeros_like(const ParamTree& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(AdamState& state, ParamTree& params, const ParamTree& grads, double lr,
               const AdamConfig& config) {
  if (!(lr > 0.0)) throw PreconditionError("adam_step: learning rate must be positive");
  if (!params.same_structure(grads) || !params.same_structure(state.first_moment) ||
      !params.same_structure(state.second_moment)) {
    throw PreconditionError("adam_step: parameter, gradient and moment shapes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads.at(i).allFinite()) {
      throw TrainingError("non-finite gradient in leaf '" + grads.names()[i] + "'");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads.at(i);
    auto m = state.first_moment.mut(i);
    auto v = state.second_moment.mut(i);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    auto p = params.mut(i);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.eps);
  }
}

std::pair<ParamTree, AdamState> adam_update(const AdamState& state, const ParamTree& params,
                                            const ParamTree& grads, double lr,
                                            const AdamConfig& config) {
  ParamTree p = params;
  AdamState s = state;
  adam_step(s, p, grads, lr, config);
  return {std::move(p), std::move(s)};
}

double clip_global_norm(ParamTree& grads, double max_norm) {
  const double n = grads.norm();
  if (max_norm > 0.0 && n > max_norm) {
    const double s = max_norm / n;
    for (std::size_t i = 0; i < grads.size(); ++i) grads.mut(i) *= s;
  }
  return n;
}

}  // namespace dcsl
