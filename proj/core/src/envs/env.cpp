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

#include "dcsl/envs/env.hpp"

#include <algorithm>

#include "dcsl/envs/gripper.hpp"
#include "dcsl/envs/point_maze.hpp"
#include "dcsl/error.hpp"

namespace dcsl {

void EnvSpec::validate() const {
  if (state_dim <= 0 || action_dim <= 0) throw ConfigError("env '" + name + "': dims must be positive");
  if (!(distance_threshold > 0.0)) throw ConfigError("env '" + name + "': threshold must be positive");
  if (max_episode_steps <= 0) throw ConfigError("env '" + name + "': max steps must be positive");
  for (int i : termination_features) {
    if (i < 0 || i >= state_dim) throw ConfigError("env '" + name + "': bad termination feature index");
  }
}

std::unique_ptr<Environment> make_env(const std::string& name) {
  if (name == "pointmaze-medium") return std::make_unique<PointMazeEnv>(PointMazeEnv::Layout::kMedium);
  if (name == "pointmaze-large") return std::make_unique<PointMazeEnv>(PointMazeEnv::Layout::kLarge);
  if (name == "gripper") return std::make_unique<GripperEnv>();
  if (name == "kitchen") return std::make_unique<KitchenEnv>();
  throw ConfigError("unknown environment '" + name + "'");
}

std::vector<std::string> env_names() {
  return {"pointmaze-medium", "pointmaze-large", "gripper", "kitchen"};
}

Vector termination_features(const EnvSpec& spec, const State& state) {
  Vector f(static_cast<Eigen::Index>(spec.termination_features.size()));
  for (std::size_t i = 0; i < spec.termination_features.size(); ++i) {
    f[static_cast<Eigen::Index>(i)] = state[spec.termination_features[i]];
  }
  return f;
}

double termination_distance(const EnvSpec& spec, const State& a, const State& b) {
  return (termination_features(spec, a) - termination_features(spec, b)).norm();
}

Vector clip_action(const Vector& action, bool* clipped) {
  Vector out = action.cwiseMax(-1.0).cwiseMin(1.0);
  if (clipped) *clipped = (out != action);
  return out;
}

EpisodeSession::EpisodeSession(const Environment& env, std::uint64_t seed)
    : env_(&env), state_(env.reset(seed)) {}

EpisodeSession::EpisodeSession(const Environment& env, State start)
    : env_(&env), state_(std::move(start)) {}

StepResult EpisodeSession::step(const Vector& action) {
  if (done_) throw PreconditionError("EpisodeSession::step after episode end");
  StepResult r = env_->step(state_, action);
  state_ = r.next_state;
  ++steps_;
  total_reward_ += r.reward;
  if (r.goal_reached) success_ = true;
  done_ = r.goal_reached || steps_ >= env_->spec().max_episode_steps;
  return r;
}

}  // namespace dcsl
