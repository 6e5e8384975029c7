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

#ifndef DCSL_DATASET_DATASET_HPP_
#define DCSL_DATASET_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dcsl/diffcore/tensor.hpp"

namespace dcsl {

inline constexpr int kInitialSkillLength = 10;
inline constexpr int kDatasetFormatVersion = 1;

// One episode. Row i of `states` is s_i and row i of `actions` is the action
// taken in s_i; skill_length[i] is H_i.
struct Trajectory {
  Matrix states;
  Matrix actions;
  std::vector<int> skill_length;
  bool reached_goal = false;

  int length() const { return static_cast<int>(states.rows()); }
  void validate() const;
  bool operator==(const Trajectory& other) const;
};

struct Provenance {
  std::string env;
  std::string tier;
  std::string policy;
  std::uint64_t seed = 0;
  std::string generator_version;
};

struct TrajectoryDataset {
  std::vector<Trajectory> episodes;
  int state_dim = 0;
  int action_dim = 0;
  Provenance provenance;

  std::size_t size() const { return episodes.size(); }
  long total_steps() const;
  double goal_fraction() const;
  void validate() const;
  bool operator==(const TrajectoryDataset& other) const;
};

struct SkillWindow {
  int episode = 0;
  int start = 0;
  int length = 0;
  // Absolute indices (t, t+a, t+b, t+H-1).
  std::array<int, 4> keys{};

  int end() const { return start + length; }
  bool contains(int ep, int index) const { return ep == episode && index >= start && index < end(); }
};

// Key-state indices for a window of length h starting at t. The two interior
// offsets are distinct uniform draws from {1, ..., h-2}, sorted.
std::array<int, 4> select_key_states(int t, int h, Rng& rng);
std::array<int, 4> select_key_states(int t, int h, std::uint64_t seed);

// Enumerates the starts t with t + H_t <= episode length and H_t >= min_length.
class WindowSampler {
 public:
  explicit WindowSampler(const TrajectoryDataset& dataset, int min_length = 4);

  std::size_t size() const { return starts_.size(); }
  const std::vector<std::pair<int, int>>& starts() const { return starts_; }

  SkillWindow sample(Rng& rng) const;
  SkillWindow window_at(std::size_t i, Rng& rng) const;
  std::pair<int, int> negative(const SkillWindow& current, Rng& rng) const;

 private:
  const TrajectoryDataset* dataset_;
  std::vector<std::pair<int, int>> starts_;
  std::vector<long> offsets_;
};

SkillWindow sample_skill_window(const TrajectoryDataset& dataset, std::uint64_t batch_seed);

// Uniform over every (episode, index) outside the window's [t, t+H-1].
std::pair<int, int> sample_negative_index(const TrajectoryDataset& dataset, const SkillWindow& current,
                                          Rng& rng);
Vector sample_negative(const TrajectoryDataset& dataset, const SkillWindow& current, std::uint64_t seed);

// Two files: `<prefix>.manifest.json` and `<prefix>.blob`. The blob holds, per
// episode in order, float32 states, float32 actions and int32 skill lengths;
// the manifest records each section's byte offset.
void save_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& prefix);
TrajectoryDataset load_dataset(const std::filesystem::path& prefix);

// Accepts either a prefix or a path ending in ".manifest.json".
std::filesystem::path dataset_prefix(const std::filesystem::path& path);

std::vector<long> length_histogram(const TrajectoryDataset& dataset, int max_length);

}  // namespace dcsl

#endif  // DCSL_DATASET_DATASET_HPP_
