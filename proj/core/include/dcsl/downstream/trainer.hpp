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

#ifndef DCSL_DOWNSTREAM_TRAINER_HPP_
#define DCSL_DOWNSTREAM_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dcsl/downstream/cem.hpp"
#include "dcsl/downstream/sac.hpp"

namespace dcsl {

struct DownstreamConfig {
  int episodes = 2000;
  // Episodes driven by the skill prior before the learner takes over.
  int warmup_episodes = 20;
  int updates_per_episode = 1;
  int buffer_capacity = 100000;
  ExecutionConfig exec;
  SacConfig sac;
  CEMConfig cem;
  ModelBasedConfig model_based;

  void validate() const;
};

// One training episode; loss columns average the updates that followed it.
struct CurveRow {
  int episode = 0;
  double episode_return = 0.0;
  bool success = false;
  int steps = 0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double kl = 0.0;
};

using EpisodeCallback = std::function<void(const CurveRow&)>;

std::vector<CurveRow> train_sac(HLPolicy& policy, const SkillModel& model, const Environment& env,
                                const DownstreamConfig& cfg, std::uint64_t seed, const EpisodeCallback& cb = {});

// Columns for this controller: actor_loss holds the latent plus reward terms,
// critic_loss the value term, and kl stays zero.
std::vector<CurveRow> train_cem(ModelBasedAgent& agent, const Environment& env, const DownstreamConfig& cfg,
                                std::uint64_t seed, const EpisodeCallback& cb = {});

// Uniformly random skills with no learning.
std::vector<CurveRow> run_random_skills(const SkillModel& model, const Environment& env, const DownstreamConfig& cfg,
                                        std::uint64_t seed);

class SacController : public Controller {
 public:
  SacController(const HLPolicy& policy, const SkillModel& model, ExecutionConfig exec, bool deterministic);
  HLTransition act(EpisodeSession& session, Rng& rng) override;

 private:
  const HLPolicy* policy_;
  const SkillModel* model_;
  ExecutionConfig exec_;
  bool deterministic_;
};

class CemController : public Controller {
 public:
  CemController(const ModelBasedAgent& agent, CEMConfig cem, ExecutionConfig exec, double exploration_std = 0.0);
  HLTransition act(EpisodeSession& session, Rng& rng) override;

 private:
  const ModelBasedAgent* agent_;
  CEMConfig cem_;
  ExecutionConfig exec_;
  double exploration_std_;
};

// Mean success over the last `window` rows.
double final_success(std::span<const CurveRow> rows, int window);
double final_timesteps(std::span<const CurveRow> rows, int window, int cap);

void write_curve_csv(const std::filesystem::path& path, std::span<const CurveRow> rows);
std::vector<CurveRow> read_curve_csv(const std::filesystem::path& path);

}  // namespace dcsl

#endif  // DCSL_DOWNSTREAM_TRAINER_HPP_
