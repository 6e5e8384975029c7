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

#ifndef DCSL_SKILLMODEL_TRAINING_HPP_
#define DCSL_SKILLMODEL_TRAINING_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dcsl/dataset/dataset.hpp"
#include "dcsl/error.hpp"
#include "dcsl/relabel/relabel.hpp"
#include "dcsl/skillmodel/skill_model.hpp"

namespace dcsl {

struct TrainConfig {
  double lambda_bc = 2.0;
  double lambda_sp = 1.0;
  double lambda_cl = 1.0;
  double lambda_re = 1.0;
  double lambda_st = 2.0;
  double beta = 0.001;
  int batch_size = 256;
  long max_steps = 100000;
  long relabel_interval = 20000;
  bool relabel = true;
  double learning_rate = 3e-4;
  // Detach E(s_{t+H}) in the latent target term.
  bool freeze_target_encoder = false;
  RelabelConfig relabel_cfg;

  void validate() const;
};

struct LossBreakdown {
  double embedding = 0.0;
  double contrastive = 0.0;
  double target = 0.0;
  double total = 0.0;
  double bc = 0.0;
  double kl_prior = 0.0;
  double skill_prior = 0.0;
  double reconstruction = 0.0;
  double target_prediction = 0.0;
};

// Raised when a step produces a non-finite loss; carries the last finite one.
class NumericAbort : public TrainingError {
 public:
  NumericAbort(const std::string& what, LossBreakdown last) : TrainingError(what), last_finite(last) {}
  LossBreakdown last_finite;
};

// Everything one optimisation step consumes, gathered from the dataset.
// Row i of the per-window matrices belongs to windows[i]; the per-step rows
// cover every (s, a) pair inside every window.
struct SkillBatch {
  std::vector<SkillWindow> windows;
  std::array<Matrix, 4> keys;
  Matrix positive;
  Matrix negative;
  Matrix successor;
  Matrix step_states;
  Matrix step_actions;
  Matrix step_offsets;
  std::vector<int> step_window;
  // Standard-normal draws for the reparameterised skill, batch x Z.
  Matrix noise;

  int size() const { return static_cast<int>(windows.size()); }
};

// Gathers a batch from explicit windows and negative indices.
SkillBatch make_batch(const TrajectoryDataset& dataset, const std::vector<SkillWindow>& windows,
                      const std::vector<std::pair<int, int>>& negatives, const Matrix& noise);
SkillBatch sample_batch(const TrajectoryDataset& dataset, const WindowSampler& sampler, int batch_size, int skill_dim,
                        Rng& rng);

struct LossGraph {
  Var embedding;
  Var contrastive;
  Var target;
  Var total;
  LossBreakdown values;
};

// Records every loss term on `tape`. All terms are in minimisation form and
// total = embedding + contrastive + target.
LossGraph build_losses(Tape& tape, const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg);

double embedding_loss(const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg,
                      LossBreakdown* parts = nullptr);
double contrastive_loss(const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg);
double target_loss(const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg);
// Contrastive term from raw similarity values: lambda * mean(softplus(-f+) + softplus(f-)).
double contrastive_from_scores(const Vector& f_pos, const Vector& f_neg, double lambda);

struct StepOutcome {
  LossBreakdown loss;
  std::optional<RelabelReport> relabel;
};

// One update of every network on a fresh batch; relabels the dataset when
// step_index is a positive multiple of the relabel interval.
StepOutcome train_step(SkillModel& model, TrajectoryDataset& dataset, const TrainConfig& cfg, long step_index,
                       Rng& rng);

class SkillTrainer {
 public:
  SkillTrainer(SkillModel& model, TrajectoryDataset& dataset, TrainConfig cfg, std::uint64_t seed);

  // Runs steps 1..max_steps (or the next `steps` of them).
  void run(long steps = -1);
  StepOutcome step();

  long steps_done() const { return step_; }
  const std::vector<LossBreakdown>& history() const { return history_; }
  const std::vector<RelabelReport>& relabels() const { return relabels_; }

  void write_loss_csv(const std::filesystem::path& path) const;

 private:
  SkillModel* model_;
  TrajectoryDataset* dataset_;
  TrainConfig cfg_;
  Rng rng_;
  std::optional<WindowSampler> sampler_;
  long step_ = 0;
  std::vector<LossBreakdown> history_;
  std::vector<RelabelReport> relabels_;
  LossBreakdown last_finite_;
};

}  // namespace dcsl

#endif  // DCSL_SKILLMODEL_TRAINING_HPP_
