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

#include "dcsl/downstream/execution.hpp"

#include <cmath>

#include "dcsl/diffcore/distributions.hpp"
#include "dcsl/error.hpp"

namespace dcsl {

void HLTransition::validate(int max_steps) const {
  if (k < 1 || k > max_steps) throw PreconditionError("HLTransition: k outside [1, max_steps]");
  if (!std::isfinite(reward)) throw PreconditionError("HLTransition: non-finite reward");
}

void ExecutionConfig::validate() const {
  if (max_steps < 1) throw ConfigError("execution: max_steps must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("execution: gamma must lie in (0, 1]");
}

HLTransition execute_skill(EpisodeSession& session, const SkillModel& model, const Vector& z,
                           const ExecutionConfig& cfg, Rng* rng) {
  if (session.done()) throw PreconditionError("execute_skill: episode already finished");
  if (cfg.sample_actions && rng == nullptr) throw PreconditionError("execute_skill: sampling needs an rng");
  const EnvSpec& spec = session.env().spec();
  const double threshold = cfg.threshold < 0.0 ? spec.distance_threshold : cfg.threshold;
  HLTransition tr;
  tr.s = session.state();
  tr.z = z;
  const State target = model.predict_target_state(tr.s, z);
  double discount = 1.0;
  while (tr.k < cfg.max_steps && !session.done()) {
    const TanhGaussian pi = model.decode_action(session.state(), z, tr.k);
    const Vector action = cfg.sample_actions ? tanh_gaussian_sample(pi, *rng).sample : pi.mode();
    const StepResult r = session.step(action);
    tr.reward += discount * r.reward;
    discount *= cfg.gamma;
    ++tr.k;
    if (termination_distance(spec, session.state(), target) <= threshold) break;
  }
  tr.s_next = session.state();
  tr.done = session.done();
  return tr;
}

SkillController::SkillController(const SkillModel& model, SkillSelector select, ExecutionConfig exec)
    : model_(&model), select_(std::move(select)), exec_(exec) {
  exec_.validate();
}

HLTransition SkillController::act(EpisodeSession& session, Rng& rng) {
  const Vector z = select_(session.state(), rng);
  return execute_skill(session, *model_, z, exec_, &rng);
}

SkillSelector random_skill_selector(int skill_dim) {
  return [skill_dim](const State&, Rng& rng) {
    Vector z(skill_dim);
    for (int i = 0; i < skill_dim; ++i) z[i] = uniform(rng, -1.0, 1.0);
    return z;
  };
}

ScriptedController::ScriptedController(std::function<Vector(const State&)> policy) : policy_(std::move(policy)) {}

HLTransition ScriptedController::act(EpisodeSession& session, Rng& /*rng*/) {
  HLTransition tr;
  tr.s = session.state();
  while (!session.done()) {
    tr.reward += session.step(policy_(session.state())).reward;
    ++tr.k;
  }
  tr.s_next = session.state();
  tr.done = true;
  return tr;
}

EpisodeRecord run_episode(Controller& controller, const Environment& env, std::uint64_t episode_seed, Rng& rng,
                          std::vector<HLTransition>* transitions) {
  EpisodeSession session(env, episode_seed);
  controller.begin_episode(session.state());
  EpisodeRecord rec;
  while (!session.done()) {
    HLTransition tr = controller.act(session, rng);
    ++rec.decisions;
    if (transitions != nullptr) transitions->push_back(std::move(tr));
  }
  rec.success = session.success();
  rec.steps = session.steps();
  rec.timesteps = rec.success ? rec.steps : env.spec().max_episode_steps;
  rec.total_return = session.total_reward();
  return rec;
}

EvalResult evaluate(Controller& controller, const Environment& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw PreconditionError("evaluate: episodes must be >= 1");
  Rng rng(mix_seed(seed, 0xe7a1));
  EvalResult out;
  double successes = 0.0, steps = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EpisodeRecord rec = run_episode(controller, env, mix_seed(seed, static_cast<std::uint64_t>(e)), rng);
    rec.episode = e;
    successes += rec.success ? 1.0 : 0.0;
    steps += rec.timesteps;
    out.episodes.push_back(rec);
  }
  out.success_rate = successes / episodes;
  out.mean_timesteps = steps / episodes;
  return out;
}

nlohmann::json EvalResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : episodes) {
    rows.push_back({{"episode", e.episode},
                    {"success", e.success},
                    {"steps", e.steps},
                    {"timesteps", e.timesteps},
                    {"return", e.total_return},
                    {"decisions", e.decisions}});
  }
  return {{"success_rate", success_rate}, {"mean_timesteps", mean_timesteps}, {"episodes", rows}};
}

}  // namespace dcsl
