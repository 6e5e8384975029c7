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

#ifndef DCSL_RELABEL_RELABEL_HPP_
#define DCSL_RELABEL_RELABEL_HPP_

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "dcsl/dataset/dataset.hpp"
#include "dcsl/skillmodel/skill_model.hpp"

namespace dcsl {

struct RelabelConfig {
  double epsilon = 0.0;
  int delta_min = 4;
  int delta_max = 30;
  // Use the largest alpha above epsilon instead of stopping at the first miss.
  bool set_max = false;

  void validate() const;
};

struct RelabelReport {
  int pass = 0;
  long relabeled = 0;
  std::vector<long> old_histogram;
  std::vector<long> new_histogram;
  double mean_abs_change = 0.0;
  double mean = 0.0;
  double median = 0.0;
  int min = 0;
  int max = 0;
  double frac_at_min = 0.0;
  double frac_at_max = 0.0;
  // Share of relabeled starts with delta_min < H' < delta_max.
  double frac_interior = 0.0;
};

// New length from the similarities f[k] = f(s_t, z_t, s_{t+k+1}) for
// k = 0 .. remaining-2, where remaining = episode_length - t. The result is
// 1 + (number of leading entries above epsilon), or 1 + the largest such
// offset under set_max, clamped to [delta_min, min(delta_max, remaining)].
int relabel_length(std::span<const double> similarities, int remaining, const RelabelConfig& cfg);

// Key indices used to encode the window [t, t+w) during relabeling:
// t, t + (w-1)/3, t + 2(w-1)/3, t + w - 1.
std::array<int, 4> relabel_key_states(int t, int w);

// T x T table of f(s_t, z_t, s_j). z_t is tanh of q's mean over the stored
// window min(H_t, T - t); rows whose window is shorter than four steps are NaN.
Matrix similarity_table(const SkillModel& model, const Trajectory& episode);

// True when start t is rewritten by a relabel pass.
bool relabel_eligible(const Trajectory& episode, int t, const RelabelConfig& cfg);

int relabel_one(const SkillModel& model, const Trajectory& episode, int t, const RelabelConfig& cfg);

// Rewrites H_t for every eligible start (T - t >= delta_min) of every episode.
RelabelReport relabel_dataset(const SkillModel& model, TrajectoryDataset& dataset, const RelabelConfig& cfg,
                              int pass = 0);
// Same pass driven by precomputed tables (one per episode).
RelabelReport relabel_with_tables(std::span<const Matrix> tables, TrajectoryDataset& dataset,
                                  const RelabelConfig& cfg, int pass = 0);

void write_relabel_csv(const std::filesystem::path& path, std::span<const RelabelReport> reports);
void write_length_histogram_csv(const std::filesystem::path& path, const RelabelReport& report);

}  // namespace dcsl

#endif  // DCSL_RELABEL_RELABEL_HPP_
