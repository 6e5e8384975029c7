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

#ifndef DCSL_DIFFCORE_ADAM_HPP_
#define DCSL_DIFFCORE_ADAM_HPP_

#include <cstdint>
#include <utility>

#include "dcsl/diffcore/param_tree.hpp"

namespace dcsl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamTree first_moment;
  ParamTree second_moment;
  std::int64_t step = 0;

  static AdamState zeros_like(const ParamTree& params);
};

// One bias-corrected Adam update applied in place. Throws TrainingError
// naming the first leaf with a non-finite gradient; nothing is modified then.
void adam_step(AdamState& state, ParamTree& params, const ParamTree& grads, double lr,
               const AdamConfig& config = {});

// Value-returning form of adam_step.
std::pair<ParamTree, AdamState> adam_update(const AdamState& state, const ParamTree& params,
                                            const ParamTree& grads, double lr,
                                            const AdamConfig& config = {});

// Rescales `grads` so that their global norm is at most `max_norm`; returns the
// norm before clipping.
double clip_global_norm(ParamTree& grads, double max_norm);

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_ADAM_HPP_
