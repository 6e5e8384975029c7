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

#ifndef DCSL_HARNESS_CONFIG_HPP_
#define DCSL_HARNESS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsl/downstream/trainer.hpp"
#include "dcsl/skillmodel/training.hpp"

namespace dcsl {

std::string version();

// Everything one experiment needs. Serialised as a flat JSON object whose
// keys are dotted paths ("train.max_steps", "sac.alpha_kl", ...).
struct ExperimentConfig {
  std::string env = "pointmaze-medium";
  std::string tier = "expert";
  int data_episodes = 200;
  // Collection horizon per episode; 0 selects the environment's step cap.
  int data_horizon = 100;
  // Dataset prefix; "{seed}" is substituted. Empty means <run>/data.
  std::string data_path;
  SkillModelConfig model;
  TrainConfig train;
  // Skill checkpoints every this many steps; 0 follows the relabel interval.
  long checkpoint_interval = 0;
  DownstreamConfig downstream;
  // Trailing episodes averaged into the final success and timesteps.
  int final_window = 100;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir = "runs/default";

  // Defaults for `env`, with the per-environment batch size and skill dimension.
  static ExperimentConfig defaults(const std::string& env);
  // Starts from defaults(value of "env.name") and applies every key.
  // Throws ConfigError on unknown keys and on ill-typed or invalid values.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
  void validate() const;
  // FNV-1a of the canonical serialisation, as 16 hex digits.
  std::string hash() const;

  // Model config with the environment's state and action sizes filled in.
  SkillModelConfig model_for_env() const;
};

}  // namespace dcsl

#endif  // DCSL_HARNESS_CONFIG_HPP_
