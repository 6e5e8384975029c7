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

#include "dcsl/envs/gripper.hpp"

#include <algorithm>
#include <cmath>

namespace dcsl {

GripperEnv::GripperEnv() {
  spec_.name = "gripper";
  spec_.state_dim = 6;
  spec_.action_dim = 3;
  spec_.termination_features = {0, 1, 2};
  spec_.distance_threshold = 0.02;
  spec_.max_episode_steps = 200;
  spec_.validate();
}

State GripperEnv::reset(std::uint64_t seed) const {
  Rng rng(mix_seed(seed, 0x6772697070ULL));
  State s = State::Zero(6);
  s[0] = kStartX;
  s[1] = kStartY;
  s[3] = uniform(rng, kSpawnMinX, kSpawnMaxX);
  s[4] = uniform(rng, kSpawnMinY, kSpawnMaxY);
  return s;
}

Vector GripperEnv::target() const {
  Vector t(2);
  t << kTargetX, kTargetY;
  return t;
}

bool GripperEnv::goal_reached(const State& state) const {
  return (state.segment(3, 2) - target()).norm() <= kGoalRadius;
}

std::unique_ptr<Environment> GripperEnv::clone() const { return std::make_unique<GripperEnv>(*this); }

StepResult GripperEnv::step(const State& state, const Vector& action) const {
  StepResult r;
  const Vector a = clip_action(action, &r.clipped);
  State n = state;
  n[0] = std::clamp(state[0] + kMoveScale * a[0], 0.0, 1.0);
  n[1] = std::clamp(state[1] + kMoveScale * a[1], 0.0, 1.0);
  n[2] = std::clamp(state[2] + kGripRate * a[2], 0.0, 1.0);
  const bool was_holding = state[5] > 0.5;
  bool holding = was_holding;
  if (!was_holding && state[2] <= 0.5 && n[2] > 0.5) {
    const double d = std::hypot(n[0] - state[3], n[1] - state[4]);
    holding = d <= kGraspRadius;
  } else if (was_holding && n[2] <= 0.5) {
    holding = false;
  }
  n[5] = holding ? 1.0 : 0.0;
  if (holding) {
    n[3] = n[0];
    n[4] = n[1];
  }
  r.next_state = n;
  r.goal_reached = goal_reached(n);
  r.reward = (r.goal_reached && !goal_reached(state)) ? 1.0 : 0.0;
  return r;
}

KitchenEnv::KitchenEnv() {
  spec_.name = "kitchen";
  spec_.state_dim = 3 + kStations;
  spec_.action_dim = 3;
  spec_.termination_features = {0, 1, 2};
  spec_.distance_threshold = 0.1;
  spec_.max_episode_steps = 400;
  spec_.validate();
}

std::array<double, 2> KitchenEnv::station(int i) {
  static constexpr std::array<std::array<double, 2>, kStations> kSites = {
      {{0.15, 0.15}, {0.85, 0.15}, {0.15, 0.85}, {0.85, 0.85}}};
  return kSites[static_cast<std::size_t>(i)];
}

State KitchenEnv::reset(std::uint64_t /*seed*/) const {
  State s = State::Zero(spec_.state_dim);
  s[0] = 0.5;
  s[1] = 0.5;
  return s;
}

bool KitchenEnv::goal_reached(const State& state) const {
  for (int i = 0; i < kStations; ++i) {
    if (state[3 + i] < 0.5) return false;
  }
  return true;
}

std::unique_ptr<Environment> KitchenEnv::clone() const { return std::make_unique<KitchenEnv>(*this); }

StepResult KitchenEnv::step(const State& state, const Vector& action) const {
  StepResult r;
  const Vector a = clip_action(action, &r.clipped);
  State n = state;
  n[0] = std::clamp(state[0] + kMoveScale * a[0], 0.0, 1.0);
  n[1] = std::clamp(state[1] + kMoveScale * a[1], 0.0, 1.0);
  n[2] = std::clamp(state[2] + kGripRate * a[2], 0.0, 1.0);
  if (state[2] <= 0.5 && n[2] > 0.5) {
    for (int i = 0; i < kStations; ++i) {
      const auto site = station(i);
      if (n[3 + i] < 0.5 && std::hypot(n[0] - site[0], n[1] - site[1]) <= kToggleRadius) {
        n[3 + i] = 1.0;
        r.reward += 1.0 / kStations;
      }
    }
  }
  r.next_state = n;
  r.goal_reached = goal_reached(n);
  return r;
}

}  // namespace dcsl
