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

#ifndef DCSL_HARNESS_PIPELINE_HPP_
#define DCSL_HARNESS_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dcsl/envs/collector.hpp"
#include "dcsl/harness/config.hpp"

namespace dcsl {

using Logger = std::function<void(const std::string&)>;

enum class DownstreamMode { kSac, kCem };
DownstreamMode parse_mode(const std::string& s);
std::string to_string(DownstreamMode m);

// Per-seed layout under output_dir:
//   seed_<s>/data.{manifest.json,blob}
//   seed_<s>/skills/{model.*, model_step<N>.*, loss.csv, relabel.csv, lengths.csv}
//   seed_<s>/downstream_<mode>/{policy.*, curve.csv, summary.json}
//   seed_<s>/manifest.json
struct RunLayout {
  std::filesystem::path run;

  static RunLayout of(const ExperimentConfig& cfg, std::uint64_t seed);
  std::filesystem::path dataset(const ExperimentConfig& cfg, std::uint64_t seed) const;
  std::filesystem::path skills_dir() const { return run / "skills"; }
  std::filesystem::path skill_model() const { return skills_dir() / "model"; }
  std::filesystem::path downstream_dir(DownstreamMode m) const { return run / ("downstream_" + to_string(m)); }
  std::filesystem::path policy(DownstreamMode m) const { return downstream_dir(m) / "policy"; }
};

GenerationSummary generate_data(const std::string& env, const std::string& tier, int episodes, int horizon,
                                std::uint64_t seed, const std::filesystem::path& prefix);
// Generates the dataset for one seed of `cfg` and records the stage.
GenerationSummary run_gen_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct SkillStageResult {
  long steps = 0;
  LossBreakdown final_loss;
  std::vector<RelabelReport> relabels;
};
// Needs the seed's dataset; throws FileError when it is missing.
SkillStageResult run_train_skills(const ExperimentConfig& cfg, std::uint64_t seed, const Logger& log = {});

struct DownstreamStageResult {
  std::vector<CurveRow> rows;
  double final_success = 0.0;
  double final_timesteps = 0.0;
};
// Needs the seed's skill checkpoint; throws FileError when it is missing.
DownstreamStageResult run_train_downstream(const ExperimentConfig& cfg, std::uint64_t seed, DownstreamMode mode,
                                           const Logger& log = {});

struct EvalOptions {
  // Empty fields fall back to what the checkpoint recorded.
  std::string env;
  std::filesystem::path skills;
  int episodes = 100;
  std::uint64_t seed = 0;
  // Uniformly random skills from the skill model at `checkpoint` (or `skills`).
  bool random_skills = false;
  bool stochastic = false;
};
// Accepts an "hl-policy", an "mb-agent", or (with random_skills) a "skill-model" checkpoint.
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint, const EvalOptions& opts);

nlohmann::json execution_to_json(const ExecutionConfig& e);
ExecutionConfig execution_from_json(const nlohmann::json& j);

}  // namespace dcsl

#endif  // DCSL_HARNESS_PIPELINE_HPP_
