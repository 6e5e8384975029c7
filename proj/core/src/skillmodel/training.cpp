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

#include "dcsl/skillmodel/training.hpp"

#include <cmath>
#include <sstream>

#include "dcsl/diffcore/checkpoint.hpp"

namespace dcsl {
namespace {

constexpr double kActionClip = 0.995;

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total) && std::isfinite(l.embedding) && std::isfinite(l.contrastive) &&
         std::isfinite(l.target);
}

}  // namespace

void TrainConfig::validate() const {
  for (double v : {lambda_bc, lambda_sp, lambda_cl, lambda_re, lambda_st, beta}) {
    if (!(v >= 0.0)) throw ConfigError("train: loss weights must be >= 0");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  if (relabel_interval < 1) throw ConfigError("train: relabel_interval must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  relabel_cfg.validate();
}

SkillBatch make_batch(const TrajectoryDataset& ds, const std::vector<SkillWindow>& windows,
                      const std::vector<std::pair<int, int>>& negatives, const Matrix& noise) {
  if (windows.empty()) throw PreconditionError("make_batch: empty batch");
  if (negatives.size() != windows.size()) throw PreconditionError("make_batch: one negative per window");
  const auto b = static_cast<Eigen::Index>(windows.size());
  const int s = ds.state_dim;
  SkillBatch batch;
  batch.windows = windows;
  batch.noise = noise;
  for (auto& k : batch.keys) k.resize(b, s);
  batch.positive.resize(b, s);
  batch.negative.resize(b, s);
  batch.successor.resize(b, s);
  long steps = 0;
  for (const auto& w : windows) steps += w.length;
  batch.step_states.resize(steps, s);
  batch.step_actions.resize(steps, ds.action_dim);
  batch.step_offsets.resize(steps, 1);
  batch.step_window.reserve(static_cast<std::size_t>(steps));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const SkillWindow& w = windows[static_cast<std::size_t>(i)];
    const Trajectory& ep = ds.episodes[static_cast<std::size_t>(w.episode)];
    for (int j = 0; j < 4; ++j) batch.keys[static_cast<std::size_t>(j)].row(i) = ep.states.row(w.keys[static_cast<std::size_t>(j)]);
    batch.positive.row(i) = ep.states.row(w.keys[2]);
    const auto [ne, ni] = negatives[static_cast<std::size_t>(i)];
    batch.negative.row(i) = ds.episodes[static_cast<std::size_t>(ne)].states.row(ni);
    batch.successor.row(i) = ep.states.row(std::min(w.end(), ep.length() - 1));
    batch.step_states.middleRows(r, w.length) = ep.states.middleRows(w.start, w.length);
    batch.step_actions.middleRows(r, w.length) = ep.actions.middleRows(w.start, w.length);
    for (int j = 0; j < w.length; ++j) {
      batch.step_offsets(r + j, 0) = j;
      batch.step_window.push_back(static_cast<int>(i));
    }
    r += w.length;
  }
  return batch;
}

SkillBatch sample_batch(const TrajectoryDataset& ds, const WindowSampler& sampler, int batch_size, int skill_dim,
                        Rng& rng) {
  std::vector<SkillWindow> windows;
  std::vector<std::pair<int, int>> negatives;
  for (int i = 0; i < batch_size; ++i) {
    windows.push_back(sampler.sample(rng));
    negatives.push_back(sampler.negative(windows.back(), rng));
  }
  const Matrix noise = standard_normal_matrix(rng, batch_size, skill_dim);
  return make_batch(ds, windows, negatives, noise);
}

LossGraph build_losses(Tape& tape, const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg) {
  std::vector<Var> keys;
  for (const Matrix& k : batch.keys) keys.push_back(tape.constant_ref(k));
  const GaussianVar q = model.encode(tape, keys);
  const Var u = reparameterize(q, batch.noise);
  const Var z = ad::tanh(u);

  // Embedding: behaviour cloning over every step of every window.
  const Var z_steps = ad::gather_rows(z, batch.step_window);
  const GaussianVar pi = model.decode(tape, tape.constant_ref(batch.step_states), z_steps,
                                      tape.constant_ref(batch.step_offsets));
  const Matrix a = batch.step_actions.cwiseMax(-kActionClip).cwiseMin(kActionClip);
  const Matrix pre = a.array().atanh().matrix();
  const Matrix log_det = (1.0 - a.array().square()).log().matrix().rowwise().sum();
  const Var log_pi = ad::sub(gaussian_log_prob(pi, tape.constant(pre)), tape.constant(log_det));
  const Var bc = ad::neg(ad::mean(log_pi));
  const Var kl_prior = ad::mean(kl_standard_normal(q));
  const GaussianVar q_sg{ad::stop_gradient(q.mean), ad::stop_gradient(q.log_std)};
  const Var start = tape.constant_ref(batch.keys[0]);
  const Var skill_prior = ad::mean(kl_diag_gaussian(q_sg, model.prior(tape, start)));
  const Var embedding = cfg.lambda_bc * bc + cfg.beta * kl_prior + cfg.lambda_sp * skill_prior;

  // Contrastive: positive s_{t+b}, one negative per window.
  const Var phi = model.phi(tape, start, z);
  const Var f_pos = ad::row_dot(phi, model.psi(tape, tape.constant_ref(batch.positive)));
  const Var f_neg = ad::row_dot(phi, model.psi(tape, tape.constant_ref(batch.negative)));
  const Var contrastive = cfg.lambda_cl * ad::mean(ad::softplus(ad::neg(f_pos)) + ad::softplus(f_neg));

  // Target: reconstruction of s_t and latent prediction of s_{t+H}.
  const Var h = model.state_latent(tape, start);
  const Var recon = ad::mean(ad::row_sum(ad::square(model.observe(tape, h) - start)));
  Var h_next = model.state_latent(tape, tape.constant_ref(batch.successor));
  if (cfg.freeze_target_encoder) h_next = ad::stop_gradient(h_next);
  const Var pred = ad::mean(ad::row_sum(ad::square(model.predict_latent(tape, h, z) - h_next)));
  const Var target = cfg.lambda_re * recon + cfg.lambda_st * pred;

  LossGraph g;
  g.embedding = embedding;
  g.contrastive = contrastive;
  g.target = target;
  g.total = embedding + contrastive + target;
  g.values.embedding = embedding.scalar();
  g.values.contrastive = contrastive.scalar();
  g.values.target = target.scalar();
  g.values.total = g.total.scalar();
  g.values.bc = bc.scalar();
  g.values.kl_prior = kl_prior.scalar();
  g.values.skill_prior = skill_prior.scalar();
  g.values.reconstruction = recon.scalar();
  g.values.target_prediction = pred.scalar();
  return g;
}

double embedding_loss(const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg,
                      LossBreakdown* parts) {
  Tape tape;
  const LossGraph g = build_losses(tape, model, batch, cfg);
  if (parts) *parts = g.values;
  return g.values.embedding;
}

double contrastive_loss(const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg) {
  Tape tape;
  return build_losses(tape, model, batch, cfg).values.contrastive;
}

double target_loss(const SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg) {
  Tape tape;
  return build_losses(tape, model, batch, cfg).values.target;
}

double contrastive_from_scores(const Vector& f_pos, const Vector& f_neg, double lambda) {
  auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f_pos.size(); ++i) sum += softplus(-f_pos[i]) + softplus(f_neg[i]);
  return lambda * sum / static_cast<double>(f_pos.size());
}

namespace {

LossBreakdown apply_update(SkillModel& model, const SkillBatch& batch, const TrainConfig& cfg) {
  Tape tape;
  const LossGraph g = build_losses(tape, model, batch, cfg);
  if (!finite(g.values)) return g.values;
  const ParamTree grads = backprop(tape, g.total, model.params());
  adam_step(model.optimizer(), model.mutable_params(), grads, cfg.learning_rate);
  return g.values;
}

}  // namespace

StepOutcome train_step(SkillModel& model, TrajectoryDataset& dataset, const TrainConfig& cfg, long step_index,
                       Rng& rng) {
  cfg.validate();
  const WindowSampler sampler(dataset, cfg.relabel_cfg.delta_min);
  StepOutcome out;
  const SkillBatch batch = sample_batch(dataset, sampler, cfg.batch_size, model.config().skill_dim, rng);
  out.loss = apply_update(model, batch, cfg);
  if (!finite(out.loss)) throw NumericAbort("non-finite loss at step " + std::to_string(step_index), LossBreakdown{});
  if (cfg.relabel && step_index > 0 && step_index % cfg.relabel_interval == 0) {
    out.relabel = relabel_dataset(model, dataset, cfg.relabel_cfg, static_cast<int>(step_index / cfg.relabel_interval));
  }
  return out;
}

SkillTrainer::SkillTrainer(SkillModel& model, TrajectoryDataset& dataset, TrainConfig cfg, std::uint64_t seed)
    : model_(&model), dataset_(&dataset), cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
  dataset_->validate();
  if (dataset_->state_dim != model.config().state_dim || dataset_->action_dim != model.config().action_dim) {
    throw ConfigError("skill trainer: dataset dimensions do not match the model");
  }
}

StepOutcome SkillTrainer::step() {
  if (!sampler_) sampler_.emplace(*dataset_, cfg_.relabel_cfg.delta_min);
  ++step_;
  StepOutcome out;
  const SkillBatch batch = sample_batch(*dataset_, *sampler_, cfg_.batch_size, model_->config().skill_dim, rng_);
  out.loss = apply_update(*model_, batch, cfg_);
  if (!finite(out.loss)) {
    throw NumericAbort("non-finite loss at step " + std::to_string(step_), last_finite_);
  }
  last_finite_ = out.loss;
  history_.push_back(out.loss);
  if (cfg_.relabel && step_ % cfg_.relabel_interval == 0) {
    out.relabel = relabel_dataset(*model_, *dataset_, cfg_.relabel_cfg, static_cast<int>(step_ / cfg_.relabel_interval));
    relabels_.push_back(*out.relabel);
    sampler_.reset();
  }
  return out;
}

void SkillTrainer::run(long steps) {
  const long until = steps < 0 ? cfg_.max_steps : std::min(cfg_.max_steps, step_ + steps);
  while (step_ < until) step();
}

void SkillTrainer::write_loss_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out.precision(10);
  out << "step,embedding,contrastive,target,total,bc,kl_prior,skill_prior,reconstruction,target_prediction\n";
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const LossBreakdown& l = history_[i];
    out << i + 1 << ',' << l.embedding << ',' << l.contrastive << ',' << l.target << ',' << l.total << ',' << l.bc
        << ',' << l.kl_prior << ',' << l.skill_prior << ',' << l.reconstruction << ',' << l.target_prediction << '\n';
  }
  write_text_atomic(path, out.str());
}

}  // namespace dcsl
