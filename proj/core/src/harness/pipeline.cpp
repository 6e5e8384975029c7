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

#include "dcsl/harness/pipeline.hpp"

#include <chrono>
#include <sstream>

#include "dcsl/dataset/dataset.hpp"
#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"
#include "dcsl/harness/manifest.hpp"

namespace dcsl {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string rel(const fs::path& p, const fs::path& base) { return fs::relative(p, base).generic_string(); }

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

SkillModel load_skills_or_throw(const fs::path& prefix) {
  if (!fs::exists(manifest_path(prefix))) throw FileError("skill checkpoint not found: " + prefix.string());
  return SkillModel::load(prefix);
}

}  // namespace

DownstreamMode parse_mode(const std::string& s) {
  if (s == "sac") return DownstreamMode::kSac;
  if (s == "cem") return DownstreamMode::kCem;
  throw UsageError("unknown downstream mode '" + s + "' (expected sac or cem)");
}

std::string to_string(DownstreamMode m) { return m == DownstreamMode::kSac ? "sac" : "cem"; }

RunLayout RunLayout::of(const ExperimentConfig& cfg, std::uint64_t seed) {
  return RunLayout{fs::path(cfg.output_dir) / ("seed_" + std::to_string(seed))};
}

fs::path RunLayout::dataset(const ExperimentConfig& cfg, std::uint64_t seed) const {
  if (cfg.data_path.empty()) return run / "data";
  std::string p = cfg.data_path;
  const std::string token = "{seed}";
  for (auto pos = p.find(token); pos != std::string::npos; pos = p.find(token)) {
    p.replace(pos, token.size(), std::to_string(seed));
  }
  return dataset_prefix(p);
}

nlohmann::json execution_to_json(const ExecutionConfig& e) {
  return {{"max_steps", e.max_steps}, {"gamma", e.gamma}, {"threshold", e.threshold},
          {"sample_actions", e.sample_actions}};
}

ExecutionConfig execution_from_json(const nlohmann::json& j) {
  ExecutionConfig e;
  e.max_steps = j.at("max_steps").get<int>();
  e.gamma = j.at("gamma").get<double>();
  e.threshold = j.at("threshold").get<double>();
  e.sample_actions = j.at("sample_actions").get<bool>();
  e.validate();
  return e;
}

GenerationSummary generate_data(const std::string& env_name, const std::string& tier, int episodes, int horizon,
                                std::uint64_t seed, const fs::path& prefix) {
  if (episodes < 1) throw UsageError("episodes must be >= 1");
  const auto env = make_env(env_name);
  GenerationSummary summary;
  const TrajectoryDataset ds = generate_dataset(*env, default_policy(env_name),
                                                episodes, NoiseProfile::for_tier(parse_tier(tier)), seed,
                                                &summary, horizon);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  save_dataset(ds, prefix);
  return summary;
}

GenerationSummary run_gen_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  const RunLayout layout = RunLayout::of(cfg, seed);
  const Stopwatch clock;
  const fs::path prefix = layout.dataset(cfg, seed);
  const GenerationSummary s =
      generate_data(cfg.env, cfg.tier, cfg.data_episodes, cfg.data_horizon, seed, prefix);
  RunManifest m = RunManifest::open(layout.run, cfg.hash());
  m.record("gen-data",
           {{"manifest", rel(manifest_path(prefix), layout.run)}, {"blob", rel(blob_path(prefix), layout.run)}},
           clock.seconds());
  return s;
}

SkillStageResult run_train_skills(const ExperimentConfig& cfg, std::uint64_t seed, const Logger& log) {
  const RunLayout layout = RunLayout::of(cfg, seed);
  const fs::path data = layout.dataset(cfg, seed);
  if (!fs::exists(manifest_path(data))) throw FileError("dataset not found: " + manifest_path(data).string());
  const Stopwatch clock;
  TrajectoryDataset ds = load_dataset(data);
  const SkillModelConfig mc = cfg.model_for_env();
  if (ds.state_dim != mc.state_dim || ds.action_dim != mc.action_dim) {
    throw FormatError("dataset dimensions do not match environment '" + cfg.env + "'");
  }
  SkillModel model(mc, mix_seed(seed, 0x5c11));
  SkillTrainer trainer(model, ds, cfg.train, mix_seed(seed, 0x7a19));
  fs::create_directories(layout.skills_dir());
  const long interval = cfg.checkpoint_interval > 0 ? cfg.checkpoint_interval : cfg.train.relabel_interval;
  const nlohmann::json meta = {{"env", cfg.env}, {"seed", seed}, {"config_hash", cfg.hash()}};
  std::map<std::string, std::string> artifacts;
  SkillStageResult out;
  while (trainer.steps_done() < cfg.train.max_steps) {
    const StepOutcome o = trainer.step();
    const long step = trainer.steps_done();
    if (o.relabel) {
      std::ostringstream msg;
      msg << "step " << step << ": relabel pass " << o.relabel->pass << " mean length " << o.relabel->mean
          << ", interior " << o.relabel->frac_interior;
      say(log, msg.str());
    }
    if (step % interval == 0 && step < cfg.train.max_steps) {
      const fs::path ck = layout.skills_dir() / ("model_step" + std::to_string(step));
      model.save(ck, meta);
      artifacts["checkpoint_step" + std::to_string(step)] = rel(manifest_path(ck), layout.run);
    }
    if (step % 1000 == 0) {
      std::ostringstream msg;
      msg << "step " << step << ": total " << o.loss.total << " bc " << o.loss.bc;
      say(log, msg.str());
    }
  }
  model.save(layout.skill_model(), meta);
  trainer.write_loss_csv(layout.skills_dir() / "loss.csv");
  write_relabel_csv(layout.skills_dir() / "relabel.csv", trainer.relabels());
  RelabelReport lengths;
  if (!trainer.relabels().empty()) {
    lengths = trainer.relabels().back();
  } else {
    lengths.old_histogram = length_histogram(ds, cfg.train.relabel_cfg.delta_max);
    lengths.new_histogram = lengths.old_histogram;
  }
  write_length_histogram_csv(layout.skills_dir() / "lengths.csv", lengths);
  artifacts["model"] = rel(manifest_path(layout.skill_model()), layout.run);
  artifacts["loss_csv"] = rel(layout.skills_dir() / "loss.csv", layout.run);
  artifacts["relabel_csv"] = rel(layout.skills_dir() / "relabel.csv", layout.run);
  artifacts["lengths_csv"] = rel(layout.skills_dir() / "lengths.csv", layout.run);
  RunManifest m = RunManifest::open(layout.run, cfg.hash());
  m.record("train-skills", artifacts, clock.seconds());
  out.steps = trainer.steps_done();
  if (!trainer.history().empty()) out.final_loss = trainer.history().back();
  out.relabels = trainer.relabels();
  return out;
}

DownstreamStageResult run_train_downstream(const ExperimentConfig& cfg, std::uint64_t seed, DownstreamMode mode,
                                           const Logger& log) {
  const RunLayout layout = RunLayout::of(cfg, seed);
  const SkillModel model = load_skills_or_throw(layout.skill_model());
  const Stopwatch clock;
  const auto env = make_env(cfg.env);
  const fs::path dir = layout.downstream_dir(mode);
  fs::create_directories(dir);
  DownstreamStageResult out;
  const EpisodeCallback cb = [&](const CurveRow& r) {
    if ((r.episode + 1) % 100 == 0) {
      std::ostringstream msg;
      msg << to_string(mode) << " episode " << r.episode + 1 << ": success " << r.success << " steps " << r.steps;
      say(log, msg.str());
    }
  };
  const nlohmann::json meta = {{"env", cfg.env},
                               {"skill_model", rel(layout.skill_model(), dir)},
                               {"exec", execution_to_json(cfg.downstream.exec)},
                               {"config_hash", cfg.hash()}};
  if (mode == DownstreamMode::kSac) {
    HLPolicy policy(model, cfg.downstream.sac, mix_seed(seed, 0x5ac0));
    out.rows = train_sac(policy, model, *env, cfg.downstream, mix_seed(seed, 0xd0), cb);
    policy.save(layout.policy(mode), meta);
  } else {
    ModelBasedAgent agent(model, cfg.downstream.model_based, mix_seed(seed, 0xce0));
    nlohmann::json m = meta;
    m["cem"] = cfg.downstream.cem.to_json();
    out.rows = train_cem(agent, *env, cfg.downstream, mix_seed(seed, 0xd0), cb);
    agent.save(layout.policy(mode), m);
  }
  const int cap = env->spec().max_episode_steps;
  out.final_success = final_success(out.rows, cfg.final_window);
  out.final_timesteps = final_timesteps(out.rows, cfg.final_window, cap);
  write_curve_csv(dir / "curve.csv", out.rows);
  const nlohmann::json summary = {{"final_success", out.final_success},
                                  {"final_timesteps", out.final_timesteps},
                                  {"window", cfg.final_window},
                                  {"episodes", out.rows.size()}};
  write_text_atomic(dir / "summary.json", summary.dump(2) + "\n");
  RunManifest man = RunManifest::open(layout.run, cfg.hash());
  man.record("train-downstream-" + to_string(mode),
             {{"policy", rel(manifest_path(layout.policy(mode)), layout.run)},
              {"curve_csv", rel(dir / "curve.csv", layout.run)},
              {"summary", rel(dir / "summary.json", layout.run)}},
             clock.seconds());
  return out;
}

EvalResult evaluate_checkpoint(const fs::path& prefix, const EvalOptions& opts) {
  if (opts.episodes < 1) throw UsageError("episodes must be >= 1");
  const Checkpoint ck = load_checkpoint(prefix);
  const nlohmann::json& meta = ck.metadata;
  auto meta_string = [&](const char* key) -> std::string {
    if (!meta.contains(key)) throw FormatError(std::string("checkpoint metadata lacks '") + key + "'");
    return meta.at(key).get<std::string>();
  };
  const std::string env_name = opts.env.empty() ? meta_string("env") : opts.env;
  const auto env = make_env(env_name);
  ExecutionConfig exec;
  if (meta.contains("exec")) exec = execution_from_json(meta.at("exec"));

  if (ck.kind == kSkillCheckpointKind) {
    if (!opts.random_skills) throw UsageError("a skill-model checkpoint can only be evaluated with random skills");
    const SkillModel model = SkillModel::load(prefix);
    SkillController ctl(model, random_skill_selector(model.config().skill_dim), exec);
    return evaluate(ctl, *env, opts.episodes, opts.seed);
  }
  const fs::path skills =
      !opts.skills.empty() ? opts.skills : prefix.parent_path() / meta_string("skill_model");
  const SkillModel model = load_skills_or_throw(skills);
  if (opts.random_skills) {
    SkillController ctl(model, random_skill_selector(model.config().skill_dim), exec);
    return evaluate(ctl, *env, opts.episodes, opts.seed);
  }
  if (ck.kind == "hl-policy") {
    const HLPolicy policy = HLPolicy::load(prefix);
    SacController ctl(policy, model, exec, !opts.stochastic);
    return evaluate(ctl, *env, opts.episodes, opts.seed);
  }
  if (ck.kind == "mb-agent") {
    try {
      ModelBasedAgent agent(model, ModelBasedConfig::from_json(meta.at("model_based")), 0);
      agent.load_params(prefix);
      CemController ctl(agent, CEMConfig::from_json(meta.at("cem")), exec);
      return evaluate(ctl, *env, opts.episodes, opts.seed);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("mb-agent metadata: ") + e.what());
    }
  }
  throw FormatError("cannot evaluate a checkpoint of kind '" + ck.kind + "'");
}

}  // namespace dcsl
