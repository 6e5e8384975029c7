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

#ifndef DCSL_DOWNSTREAM_CEM_HPP_
#define DCSL_DOWNSTREAM_CEM_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsl/diffcore/adam.hpp"
#include "dcsl/diffcore/nn.hpp"
#include "dcsl/downstream/execution.hpp"

namespace dcsl {

struct CEMConfig {
  int horizon = 3;
  int population = 128;
  int elites = 12;
  int iterations = 5;
  double init_std = 0.5;
  double min_std = 0.05;

  void validate() const;
  nlohmann::json to_json() const;
  static CEMConfig from_json(const nlohmann::json& j);
};

// Scores a population: rows are flattened K x Z skill sequences.
using SequenceScore = std::function<Vector(const Matrix& population)>;

struct CemResult {
  // horizon x skill_dim.
  Matrix mean;
  Matrix std;
  // Mean score of the elite set after each iteration.
  std::vector<double> elite_mean;
  std::vector<double> elite_best;
};

// Gaussian search over sequences in (-1, 1)^(K x Z); proposals are clamped.
CemResult cem_optimize(const SequenceScore& score, int skill_dim, const CEMConfig& cfg, Rng& rng,
                       const std::optional<Matrix>& init_mean = std::nullopt);

struct ModelBasedConfig {
  int hidden = 64;
  double lambda_latent = 1.0;
  double lambda_reward = 1.0;
  double lambda_value = 1.0;
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 128;
  // Planning discounts one skill by gamma^skill_steps.
  int skill_steps = 10;
  // Gaussian noise added to planned skills while collecting experience.
  double exploration_std = 0.3;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelBasedConfig from_json(const nlohmann::json& j);
};

struct ModelBasedLosses {
  double latent = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double total = 0.0;
};

// Latent dynamics T (initialised from the skill model and fine-tuned), a
// reward head R(h, z), a value head Q(h, z) and its target. E stays frozen.
// Leaf prefixes: "T/", "R/", "Q/".
class ModelBasedAgent {
 public:
  ModelBasedAgent(const SkillModel& model, const ModelBasedConfig& cfg, std::uint64_t seed);

  const ModelBasedConfig& config() const { return cfg_; }
  const SkillModel& model() const { return *model_; }
  ParamTree& params() { return params_; }
  const ParamTree& params() const { return params_; }
  ParamTree& target_params() { return target_; }
  const ParamTree& target_params() const { return target_; }
  AdamState& optimizer() { return adam_; }

  Var dynamics(Tape& tape, const Var& latent, const Var& z) const;
  Var reward(Tape& tape, const Var& latent, const Var& z) const;
  Var value(Tape& tape, const ParamTree& tree, const Var& latent, const Var& z) const;

  Matrix latent(const Matrix& states) const;
  // tanh of the skill prior's mean at the decoded observation O(h).
  Matrix prior_skill_from_latent(const Matrix& latent) const;
  Matrix prior_skill(const Matrix& states) const;

  // Predicted discounted rewards plus terminal value for each row of a
  // flattened population of skill sequences starting at `state`.
  Vector score(const State& state, const Matrix& population, int horizon) const;
  Vector plan(const State& state, const CEMConfig& cem, Rng& rng) const;

  void save(const std::filesystem::path& prefix, const nlohmann::json& extra = nlohmann::json::object()) const;
  void load_params(const std::filesystem::path& prefix);

 private:
  const SkillModel* model_;
  ModelBasedConfig cfg_;
  MlpSpec reward_spec_;
  MlpSpec value_spec_;
  ParamTree params_;
  ParamTree target_;
  AdamState adam_;
};

struct ModelBasedGraph {
  Var total;
  ModelBasedLosses values;
};

// lambda_L |T(h, z) - h'|^2 + lambda_R (R - R(h, z))^2 + lambda_V (Q(h, z) - y)^2
// averaged over the batch, with h = E(s), h' = E(s') and
// y = R + gamma^k (1 - done) Q'(h', tanh(prior mean at s')).
ModelBasedGraph model_based_graph(Tape& tape, const ModelBasedAgent& agent, const std::vector<HLTransition>& batch);
ModelBasedLosses model_based_update(ModelBasedAgent& agent, const std::vector<HLTransition>& batch);

}  // namespace dcsl

#endif  // DCSL_DOWNSTREAM_CEM_HPP_
