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

#ifndef DCSL_DOWNSTREAM_EXECUTION_HPP_
#define DCSL_DOWNSTREAM_EXECUTION_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsl/envs/env.hpp"
#include "dcsl/skillmodel/skill_model.hpp"

namespace dcsl {

// One high-level decision: skill z run from s for k low-level steps.
struct HLTransition {
  State s;
  Vector z;
  // Sum of gamma^j r_j over the executed steps.
  double reward = 0.0;
  int k = 0;
  State s_next;
  bool done = false;

  void validate(int max_steps) const;
};

struct ExecutionConfig {
  int max_steps = 30;
  double gamma = 0.99;
  // Negative selects the environment's own threshold.
  double threshold = -1.0;
  bool sample_actions = false;

  void validate() const;
};

// Runs z from the session's current state until O(T(E(s0), z)) is reached on
// the termination features, max_steps elapse, or the episode ends.
// `rng` is needed only when actions are sampled.
HLTransition execute_skill(EpisodeSession& session, const SkillModel& model, const Vector& z,
                           const ExecutionConfig& cfg, Rng* rng = nullptr);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin_episode(const State& /*start*/) {}
  // Advances the session by at least one step.
  virtual HLTransition act(EpisodeSession& session, Rng& rng) = 0;
};

using SkillSelector = std::function<Vector(const State&, Rng&)>;

class SkillController : public Controller {
 public:
  SkillController(const SkillModel& model, SkillSelector select, ExecutionConfig exec);
  HLTransition act(EpisodeSession& session, Rng& rng) override;

 private:
  const SkillModel* model_;
  SkillSelector select_;
  ExecutionConfig exec_;
};

// Skills drawn uniformly from (-1, 1)^Z.
SkillSelector random_skill_selector(int skill_dim);

// A low-level state -> action rule executed as one skill lasting the episode.
class ScriptedController : public Controller {
 public:
  explicit ScriptedController(std::function<Vector(const State&)> policy);
  HLTransition act(EpisodeSession& session, Rng& rng) override;

 private:
  std::function<Vector(const State&)> policy_;
};

struct EpisodeRecord {
  int episode = 0;
  bool success = false;
  int steps = 0;
  // Steps counted toward mean_timesteps: the cap for failed episodes.
  int timesteps = 0;
  double total_return = 0.0;
  int decisions = 0;
};

struct EvalResult {
  double success_rate = 0.0;
  double mean_timesteps = 0.0;
  std::vector<EpisodeRecord> episodes;

  nlohmann::json to_json() const;
};

EpisodeRecord run_episode(Controller& controller, const Environment& env, std::uint64_t episode_seed, Rng& rng,
                          std::vector<HLTransition>* transitions = nullptr);
EvalResult evaluate(Controller& controller, const Environment& env, int episodes, std::uint64_t seed);

}  // namespace dcsl

#endif  // DCSL_DOWNSTREAM_EXECUTION_HPP_
