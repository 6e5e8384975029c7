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

#include "dcsl/downstream/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"

namespace dcsl {
namespace {

Vector prior_sample(const SkillModel& model, const State& s, Rng& rng) {
  return tanh_gaussian_sample(TanhGaussian{model.skill_prior(s)}, rng).sample;
}

CurveRow row_from(const EpisodeRecord& rec, int episode) {
  CurveRow row;
  row.episode = episode;
  row.episode_return = rec.total_return;
  row.success = rec.success;
  row.steps = rec.steps;
  return row;
}

}  // namespace

void DownstreamConfig::validate() const {
  if (episodes < 1) throw ConfigError("downstream: episodes must be >= 1");
  if (warmup_episodes < 0) throw ConfigError("downstream: warmup_episodes must be >= 0");
  if (updates_per_episode < 0) throw ConfigError("downstream: updates_per_episode must be >= 0");
  if (buffer_capacity < 1) throw ConfigError("downstream: buffer_capacity must be >= 1");
  exec.validate();
  sac.validate();
  cem.validate();
  model_based.validate();
}

SacController::SacController(const HLPolicy& policy, const SkillModel& model, ExecutionConfig exec,
                             bool deterministic)
    : policy_(&policy), model_(&model), exec_(exec), deterministic_(deterministic) {
  exec_.validate();
}

HLTransition SacController::act(EpisodeSession& session, Rng& rng) {
  const Vector z = policy_->act(session.state(), rng, deterministic_);
  return execute_skill(session, *model_, z, exec_, &rng);
}

CemController::CemController(const ModelBasedAgent& agent, CEMConfig cem, ExecutionConfig exec,
                             double exploration_std)
    : agent_(&agent), cem_(cem), exec_(exec), exploration_std_(exploration_std) {
  cem_.validate();
  exec_.validate();
}

HLTransition CemController::act(EpisodeSession& session, Rng& rng) {
  Vector z = agent_->plan(session.state(), cem_, rng);
  if (exploration_std_ > 0.0) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      z[i] = std::clamp(z[i] + exploration_std_ * standard_normal(rng), -1.0 + 1e-6, 1.0 - 1e-6);
    }
  }
  return execute_skill(session, agent_->model(), z, exec_, &rng);
}

std::vector<CurveRow> train_sac(HLPolicy& policy, const SkillModel& model, const Environment& env,
                                const DownstreamConfig& cfg, std::uint64_t seed, const EpisodeCallback& cb) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x7a1));
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  SkillController warm(model, [&model](const State& s, Rng& r) { return prior_sample(model, s, r); }, cfg.exec);
  SacController learner(policy, model, cfg.exec, false);
  std::vector<CurveRow> rows;
  for (int e = 0; e < cfg.episodes; ++e) {
    std::vector<HLTransition> transitions;
    Controller& ctl = e < cfg.warmup_episodes ? static_cast<Controller&>(warm) : learner;
    const EpisodeRecord rec = run_episode(ctl, env, mix_seed(seed, static_cast<std::uint64_t>(e)), rng, &transitions);
    for (auto& t : transitions) buffer.push(std::move(t));
    CurveRow row = row_from(rec, e);
    if (e + 1 >= cfg.warmup_episodes && cfg.updates_per_episode > 0) {
      for (int u = 0; u < cfg.updates_per_episode; ++u) {
        const SacLosses l = sac_update(policy, buffer.sample(static_cast<std::size_t>(cfg.sac.batch_size), rng), model, rng);
        row.actor_loss += l.actor / cfg.updates_per_episode;
        row.critic_loss += l.critic / cfg.updates_per_episode;
        row.kl += l.kl / cfg.updates_per_episode;
      }
    }
    rows.push_back(row);
    if (cb) cb(row);
  }
  return rows;
}

std::vector<CurveRow> train_cem(ModelBasedAgent& agent, const Environment& env, const DownstreamConfig& cfg,
                                std::uint64_t seed, const EpisodeCallback& cb) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0xc3a));
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  const SkillModel& model = agent.model();
  SkillController warm(model, [&model](const State& s, Rng& r) { return prior_sample(model, s, r); }, cfg.exec);
  CemController planner(agent, cfg.cem, cfg.exec, cfg.model_based.exploration_std);
  std::vector<CurveRow> rows;
  for (int e = 0; e < cfg.episodes; ++e) {
    std::vector<HLTransition> transitions;
    Controller& ctl = e < cfg.warmup_episodes ? static_cast<Controller&>(warm) : planner;
    const EpisodeRecord rec = run_episode(ctl, env, mix_seed(seed, static_cast<std::uint64_t>(e)), rng, &transitions);
    for (auto& t : transitions) buffer.push(std::move(t));
    CurveRow row = row_from(rec, e);
    if (e + 1 >= cfg.warmup_episodes && cfg.updates_per_episode > 0) {
      for (int u = 0; u < cfg.updates_per_episode; ++u) {
        const auto batch = buffer.sample(static_cast<std::size_t>(cfg.model_based.batch_size), rng);
        const ModelBasedLosses l = model_based_update(agent, batch);
        row.actor_loss += (l.latent + l.reward) / cfg.updates_per_episode;
        row.critic_loss += l.value / cfg.updates_per_episode;
      }
    }
    rows.push_back(row);
    if (cb) cb(row);
  }
  return rows;
}

std::vector<CurveRow> run_random_skills(const SkillModel& model, const Environment& env, const DownstreamConfig& cfg,
                                        std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x7a1));
  SkillController ctl(model, random_skill_selector(model.config().skill_dim), cfg.exec);
  std::vector<CurveRow> rows;
  for (int e = 0; e < cfg.episodes; ++e) {
    rows.push_back(row_from(run_episode(ctl, env, mix_seed(seed, static_cast<std::uint64_t>(e)), rng), e));
  }
  return rows;
}

double final_success(std::span<const CurveRow> rows, int window) {
  if (rows.empty()) return 0.0;
  const std::size_t n = std::min(rows.size(), static_cast<std::size_t>(std::max(window, 1)));
  double s = 0.0;
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) s += rows[i].success ? 1.0 : 0.0;
  return s / static_cast<double>(n);
}

double final_timesteps(std::span<const CurveRow> rows, int window, int cap) {
  if (rows.empty()) return cap;
  const std::size_t n = std::min(rows.size(), static_cast<std::size_t>(std::max(window, 1)));
  double s = 0.0;
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) s += rows[i].success ? rows[i].steps : cap;
  return s / static_cast<double>(n);
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurveRow> rows) {
  std::ostringstream out;
  out.precision(10);
  out << "episode,return,success,steps,actor_loss,critic_loss,kl\n";
  for (const auto& r : rows) {
    out << r.episode << ',' << r.episode_return << ',' << (r.success ? 1 : 0) << ',' << r.steps << ','
        << r.actor_loss << ',' << r.critic_loss << ',' << r.kl << '\n';
  }
  write_text_atomic(path, out.str());
}

std::vector<CurveRow> read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open curve CSV " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "episode,return,success,steps,actor_loss,critic_loss,kl") {
    throw FormatError("curve CSV header mismatch in " + path.string());
  }
  std::vector<CurveRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    CurveRow r;
    char c1, c2, c3, c4, c5, c6;
    int success = 0;
    ss >> r.episode >> c1 >> r.episode_return >> c2 >> success >> c3 >> r.steps >> c4 >> r.actor_loss >> c5 >>
        r.critic_loss >> c6 >> r.kl;
    if (ss.fail()) throw FormatError("malformed curve CSV row in " + path.string() + ": " + line);
    r.success = success != 0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dcsl
