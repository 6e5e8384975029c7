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

#ifndef DCSL_ENVS_GRIPPER_HPP_
#define DCSL_ENVS_GRIPPER_HPP_

#include <array>

#include "dcsl/envs/env.hpp"

namespace dcsl {

// Planar pick-and-place on the unit square.
// State (gx, gy, grip, ox, oy, holding); action (dx, dy, dgrip).
// Closing the gripper (grip rising through 0.5) within kGraspRadius of the
// object grasps it; opening releases it. Success: object within kGoalRadius of
// the target.
class GripperEnv : public Environment {
 public:
  static constexpr double kMoveScale = 0.02;
  static constexpr double kGripRate = 0.5;
  static constexpr double kGraspRadius = 0.05;
  static constexpr double kGoalRadius = 0.05;
  static constexpr double kSpawnMinX = 0.1, kSpawnMaxX = 0.4;
  static constexpr double kSpawnMinY = 0.4, kSpawnMaxY = 0.9;
  static constexpr double kTargetX = 0.8, kTargetY = 0.2;
  static constexpr double kStartX = 0.5, kStartY = 0.5;

  GripperEnv();

  const EnvSpec& spec() const override { return spec_; }
  // Gripper at the fixed start, open; object uniform in the spawn box.
  State reset(std::uint64_t seed) const override;
  StepResult step(const State& state, const Vector& action) const override;
  bool goal_reached(const State& state) const override;
  std::unique_ptr<Environment> clone() const override;

  Vector target() const;

 private:
  EnvSpec spec_;
};

// Four stations toggled by closing the gripper on them, in any order.
// State (gx, gy, grip, done1..done4); each newly toggled station pays 0.25.
class KitchenEnv : public Environment {
 public:
  static constexpr double kMoveScale = 0.02;
  static constexpr double kGripRate = 0.5;
  static constexpr double kToggleRadius = 0.05;
  static constexpr int kStations = 4;

  KitchenEnv();

  const EnvSpec& spec() const override { return spec_; }
  State reset(std::uint64_t seed) const override;
  StepResult step(const State& state, const Vector& action) const override;
  bool goal_reached(const State& state) const override;
  std::unique_ptr<Environment> clone() const override;

  static std::array<double, 2> station(int i);

 private:
  EnvSpec spec_;
};

}  // namespace dcsl

#endif  // DCSL_ENVS_GRIPPER_HPP_
