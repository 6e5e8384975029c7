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

#ifndef DCSL_ENVS_ENV_HPP_
#define DCSL_ENVS_ENV_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dcsl/diffcore/tensor.hpp"

namespace dcsl {

using State = Vector;

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  // State indices compared when testing whether a skill reached its target.
  std::vector<int> termination_features;
  double distance_threshold = 0.0;
  int max_episode_steps = 0;

  void validate() const;
};

struct StepResult {
  State next_state;
  double reward = 0.0;
  bool goal_reached = false;
  // True when the action had components outside [-1, 1].
  bool clipped = false;
};

// Deterministic environment: step() is a pure function of (state, action) and
// the environment carries no RNG after reset(). Rewards are sparse and only
// paid on the step where progress toward the task is first made.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual State reset(std::uint64_t seed) const = 0;
  virtual StepResult step(const State& state, const Vector& action) const = 0;
  virtual bool goal_reached(const State& state) const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

// Names: "pointmaze-medium", "pointmaze-large", "gripper", "kitchen".
std::unique_ptr<Environment> make_env(const std::string& name);
std::vector<std::string> env_names();

Vector termination_features(const EnvSpec& spec, const State& state);
double termination_distance(const EnvSpec& spec, const State& a, const State& b);

Vector clip_action(const Vector& action, bool* clipped = nullptr);

// One episode: tracks the step count and ends on goal or on the step cap.
class EpisodeSession {
 public:
  EpisodeSession(const Environment& env, std::uint64_t seed);
  EpisodeSession(const Environment& env, State start);

  const State& state() const { return state_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  double total_reward() const { return total_reward_; }
  const Environment& env() const { return *env_; }

  StepResult step(const Vector& action);

 private:
  const Environment* env_;
  State state_;
  int steps_ = 0;
  bool done_ = false;
  bool success_ = false;
  double total_reward_ = 0.0;
};

}  // namespace dcsl

#endif  // DCSL_ENVS_ENV_HPP_
