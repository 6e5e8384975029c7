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

#ifndef DCSL_ENVS_POINT_MAZE_HPP_
#define DCSL_ENVS_POINT_MAZE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dcsl/envs/env.hpp"

namespace dcsl {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Point mass in a walled grid of unit cells. State (x, y, vx, vy) with x along
// columns and y along rows; action is an acceleration command in [-1, 1]^2.
class PointMazeEnv : public Environment {
 public:
  enum class Layout { kMedium, kLarge };

  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.85;
  static constexpr double kAccel = 0.3;
  static constexpr double kMaxSpeed = 2.0;
  static constexpr double kGoalRadius = 0.5;

  explicit PointMazeEnv(Layout layout);

  const EnvSpec& spec() const override { return spec_; }
  // Always the start cell centre at rest; the seed is accepted for interface parity.
  State reset(std::uint64_t seed) const override;
  StepResult step(const State& state, const Vector& action) const override;
  bool goal_reached(const State& state) const override;
  std::unique_ptr<Environment> clone() const override;

  int rows() const { return static_cast<int>(walls_.size()); }
  int cols() const { return static_cast<int>(walls_[0].size()); }
  bool is_wall(int row, int col) const;
  Cell start_cell() const { return start_; }
  Cell goal_cell() const { return goal_; }
  std::vector<Cell> free_cells() const;
  Cell cell_of(double x, double y) const;
  State state_at(const Cell& c) const;
  Vector cell_center(const Cell& c) const;

  // First cell on a shortest 4-connected path from `from` to `to`; `from`
  // itself when equal, nullopt when unreachable.
  std::optional<Cell> next_cell_toward(const Cell& from, const Cell& to) const;
  int path_length(const Cell& from, const Cell& to) const;

 private:
  std::vector<std::vector<bool>> walls_;
  Cell start_;
  Cell goal_;
  EnvSpec spec_;
};

}  // namespace dcsl

#endif  // DCSL_ENVS_POINT_MAZE_HPP_
