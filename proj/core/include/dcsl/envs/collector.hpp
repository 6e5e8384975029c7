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

#ifndef DCSL_ENVS_COLLECTOR_HPP_
#define DCSL_ENVS_COLLECTOR_HPP_

#include <cstdint>
#include <memory>
#include <string>

#include "dcsl/dataset/dataset.hpp"
#include "dcsl/envs/env.hpp"
#include "dcsl/envs/point_maze.hpp"

namespace dcsl {

enum class PolicyKind { kNavigator, kPickPlace, kStations };
enum class TierKind { kExpert, kMixed, kReplay };

PolicyKind default_policy(const std::string& env_name);
PolicyKind parse_policy(const std::string& s);
std::string to_string(PolicyKind k);
TierKind parse_tier(const std::string& s);
std::string to_string(TierKind k);

struct NoiseProfile {
  TierKind kind = TierKind::kExpert;
  double action_std = 0.05;
  double segment_prob = 0.3;
  int segment_min = 5;
  int segment_max = 20;

  static NoiseProfile expert();
  static NoiseProfile mixed();
  static NoiseProfile replay();
  static NoiseProfile for_tier(TierKind kind);
  void validate() const;
};

// Noise-free scripted rule. For the navigator, `goal` is the destination cell;
// the other controllers read their targets from the state.
Vector expert_action(PolicyKind kind, const Environment& env, const State& state, const Cell& goal);

// Adds the tier's perturbations to a scripted controller. Under a profile that
// splices random walks, the episode is cut into segments of uniform length in
// [segment_min, segment_max]; each segment is a random walk with probability
// segment_prob and noisy expert control otherwise.
class NoisyController {
 public:
  NoisyController(PolicyKind kind, const Environment& env, NoiseProfile noise, std::uint64_t seed);

  // Destination for the navigator; ignored by the other controllers.
  void set_goal(const Cell& goal) { goal_ = goal; }
  // Overrides the kitchen visiting order (a permutation of 0..3).
  void set_station_order(const std::array<int, 4>& order) { order_ = order; }

  Vector act(const State& state);
  bool in_random_segment() const { return random_segment_; }

 private:
  Vector expert(const State& state) const;

  PolicyKind kind_;
  const Environment* env_;
  NoiseProfile noise_;
  Rng rng_;
  Cell goal_{};
  std::array<int, 4> order_{0, 1, 2, 3};
  int segment_left_ = 0;
  bool random_segment_ = false;
};

// One stateless scripted decision (fresh controller per call).
Vector scripted_action(PolicyKind kind, const Environment& env, const State& state, const NoiseProfile& noise,
                       std::uint64_t seed);

struct GenerationSummary {
  int episodes = 0;
  int dropped = 0;
  long steps = 0;
  double goal_fraction = 0.0;
};

// Rolls out `episodes` episodes. Navigator episodes start and end at distinct
// random free cells; the success flag records whether that episode's goal was
// reached. States and actions are rounded to float32 so the dataset
// round-trips exactly. Under the mixed tier even episodes are expert and odd
// ones replay. Episodes are truncated after `horizon` steps (0 selects the
// environment's step cap).
TrajectoryDataset generate_dataset(const Environment& env, PolicyKind kind, int episodes,
                                   const NoiseProfile& noise, std::uint64_t seed,
                                   GenerationSummary* summary = nullptr, int horizon = 0);

}  // namespace dcsl

#endif  // DCSL_ENVS_COLLECTOR_HPP_
