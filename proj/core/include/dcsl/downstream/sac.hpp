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

#ifndef DCSL_DOWNSTREAM_SAC_HPP_
#define DCSL_DOWNSTREAM_SAC_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsl/diffcore/adam.hpp"
#include "dcsl/diffcore/distributions.hpp"
#include "dcsl/diffcore/nn.hpp"
#include "dcsl/downstream/execution.hpp"

namespace dcsl {

struct SacConfig {
  int hidden = 64;
  int layers = 3;
  double gamma = 0.99;
  double tau = 0.005;
  double alpha_kl = 0.1;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  int batch_size = 128;

  void validate() const;
  nlohmann::json to_json() const;
  static SacConfig from_json(const nlohmann::json& j);
};

// Actor s -> tanh-Gaussian over z, twin critics Q(s, z) and their targets.
// Leaf prefixes: "actor/", "q1/", "q2/"; target critics reuse the critic names.
class HLPolicy {
 public:
  HLPolicy(int state_dim, int skill_dim, const SacConfig& cfg, std::uint64_t seed);
  // Actor shaped like the skill prior and initialised to its weights.
  HLPolicy(const SkillModel& model, const SacConfig& cfg, std::uint64_t seed);

  int state_dim() const { return state_dim_; }
  int skill_dim() const { return skill_dim_; }
  const SacConfig& config() const { return cfg_; }

  TanhGaussian distribution(const State& s) const;
  Vector act(const State& s, Rng& rng, bool deterministic) const;
  // min(Q1, Q2) for each row of (states, skills).
  Vector q_value(const Matrix& states, const Matrix& skills, bool target = false) const;

  GaussianVar actor(Tape& tape, const Var& states) const;
  Var critic(Tape& tape, const ParamTree& tree, int which, const Var& states, const Var& skills) const;

  ParamTree& actor_params() { return actor_; }
  const ParamTree& actor_params() const { return actor_; }
  ParamTree& critic_params() { return critics_; }
  const ParamTree& critic_params() const { return critics_; }
  ParamTree& target_params() { return targets_; }
  const ParamTree& target_params() const { return targets_; }
  AdamState& actor_optimizer() { return actor_adam_; }
  AdamState& critic_optimizer() { return critic_adam_; }

  void save(const std::filesystem::path& prefix, const nlohmann::json& extra = nlohmann::json::object()) const;
  static HLPolicy load(const std::filesystem::path& prefix, nlohmann::json* metadata = nullptr);

 private:
  void init(std::uint64_t seed);

  int state_dim_;
  int skill_dim_;
  SacConfig cfg_;
  MlpSpec actor_spec_;
  MlpSpec q_spec_[2];
  ParamTree actor_;
  ParamTree critics_;
  ParamTree targets_;
  AdamState actor_adam_;
  AdamState critic_adam_;
};

struct SacLosses {
  double critic = 0.0;
  double actor = 0.0;
  double kl = 0.0;
  double q_mean = 0.0;
};

// KL(pi(.|s) || prior(.|s)) per row, as pre-tanh Gaussians.
Vector policy_prior_kl(const HLPolicy& policy, const SkillModel& model, const Matrix& states);

// Critic regression onto R + gamma^k (1 - done) (min Q'(s', z') - alpha KL'),
// then the actor step on alpha KL(pi || prior) - min Q, then the soft target update.
SacLosses sac_update(HLPolicy& policy, const std::vector<HLTransition>& batch, const SkillModel& model, Rng& rng);

// theta' <- (1 - tau) theta' + tau theta, leaf by leaf.
void soft_update(ParamTree& target, const ParamTree& online, double tau);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void push(HLTransition t);
  std::vector<HLTransition> sample(std::size_t n, Rng& rng) const;
  std::size_t size() const { return items_.size(); }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<HLTransition> items_;
};

}  // namespace dcsl

#endif  // DCSL_DOWNSTREAM_SAC_HPP_
