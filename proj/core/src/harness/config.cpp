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

#include "dcsl/harness/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <type_traits>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/envs/collector.hpp"
#include "dcsl/error.hpp"

namespace dcsl {
namespace {

EncoderKind parse_encoder(const std::string& s) {
  if (s == "lstm") return EncoderKind::kRecurrent;
  if (s == "mlp") return EncoderKind::kMlp;
  throw ConfigError("model.encoder must be 'lstm' or 'mlp', got '" + s + "'");
}

DecoderKind parse_decoder(const std::string& s) {
  if (s == "closed-loop") return DecoderKind::kClosedLoop;
  if (s == "open-loop") return DecoderKind::kOpenLoop;
  throw ConfigError("model.decoder must be 'closed-loop' or 'open-loop', got '" + s + "'");
}

// Calls f(key, field) for every serialised field. Enumerations pass through
// a string and are parsed back afterwards.
template <class F>
void visit_fields(ExperimentConfig& c, F&& f) {
  f("env.name", c.env);
  f("data.tier", c.tier);
  f("data.episodes", c.data_episodes);
  f("data.horizon", c.data_horizon);
  f("data.path", c.data_path);

  SkillModelConfig& m = c.model;
  f("model.skill_dim", m.skill_dim);
  f("model.hidden", m.hidden);
  f("model.mlp_layers", m.mlp_layers);
  f("model.sim_hidden", m.sim_hidden);
  f("model.sim_layers", m.sim_layers);
  f("model.rep_dim", m.rep_dim);
  f("model.lstm_hidden", m.lstm_hidden);
  f("model.latent_dim", m.latent_dim);
  f("model.max_skill_length", m.max_skill_length);
  std::string encoder = m.encoder == EncoderKind::kMlp ? "mlp" : "lstm";
  std::string decoder = m.decoder == DecoderKind::kOpenLoop ? "open-loop" : "closed-loop";
  f("model.encoder", encoder);
  f("model.decoder", decoder);
  m.encoder = parse_encoder(encoder);
  m.decoder = parse_decoder(decoder);

  TrainConfig& t = c.train;
  f("train.lambda_bc", t.lambda_bc);
  f("train.lambda_sp", t.lambda_sp);
  f("train.lambda_cl", t.lambda_cl);
  f("train.lambda_re", t.lambda_re);
  f("train.lambda_st", t.lambda_st);
  f("train.beta", t.beta);
  f("train.batch_size", t.batch_size);
  f("train.max_steps", t.max_steps);
  f("train.learning_rate", t.learning_rate);
  f("train.freeze_target_encoder", t.freeze_target_encoder);
  f("train.checkpoint_interval", c.checkpoint_interval);
  f("relabel.enabled", t.relabel);
  f("relabel.interval", t.relabel_interval);
  f("relabel.epsilon", t.relabel_cfg.epsilon);
  f("relabel.delta_min", t.relabel_cfg.delta_min);
  f("relabel.delta_max", t.relabel_cfg.delta_max);
  f("relabel.set_max", t.relabel_cfg.set_max);

  DownstreamConfig& d = c.downstream;
  f("downstream.episodes", d.episodes);
  f("downstream.warmup_episodes", d.warmup_episodes);
  f("downstream.updates_per_episode", d.updates_per_episode);
  f("downstream.buffer_capacity", d.buffer_capacity);
  f("downstream.final_window", c.final_window);
  f("exec.max_steps", d.exec.max_steps);
  f("exec.gamma", d.exec.gamma);
  f("exec.threshold", d.exec.threshold);
  f("exec.sample_actions", d.exec.sample_actions);
  f("sac.hidden", d.sac.hidden);
  f("sac.layers", d.sac.layers);
  f("sac.gamma", d.sac.gamma);
  f("sac.tau", d.sac.tau);
  f("sac.alpha_kl", d.sac.alpha_kl);
  f("sac.actor_lr", d.sac.actor_lr);
  f("sac.critic_lr", d.sac.critic_lr);
  f("sac.batch_size", d.sac.batch_size);
  f("cem.horizon", d.cem.horizon);
  f("cem.population", d.cem.population);
  f("cem.elites", d.cem.elites);
  f("cem.iterations", d.cem.iterations);
  f("cem.init_std", d.cem.init_std);
  f("cem.min_std", d.cem.min_std);
  f("mb.hidden", d.model_based.hidden);
  f("mb.lambda_latent", d.model_based.lambda_latent);
  f("mb.lambda_reward", d.model_based.lambda_reward);
  f("mb.lambda_value", d.model_based.lambda_value);
  f("mb.learning_rate", d.model_based.learning_rate);
  f("mb.gamma", d.model_based.gamma);
  f("mb.tau", d.model_based.tau);
  f("mb.batch_size", d.model_based.batch_size);
  f("mb.skill_steps", d.model_based.skill_steps);
  f("mb.exploration_std", d.model_based.exploration_std);

  f("seeds", c.seeds);
  f("output_dir", c.output_dir);
}

template <class T>
bool json_matches(const nlohmann::json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned() || v.get<long long>() >= 0);
  } else if constexpr (std::is_floating_point_v<T>) {
    return v.is_number();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string();
  } else {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<long long>() >= 0)) return false;
    }
    return true;
  }
}

}  // namespace

std::string version() { return DCSL_VERSION; }

ExperimentConfig ExperimentConfig::defaults(const std::string& env) {
  ExperimentConfig c;
  c.env = env;
  const bool pick_place = env == "gripper";
  const int batch = pick_place ? 128 : 256;
  c.model.skill_dim = pick_place ? 2 : 5;
  c.train.batch_size = batch;
  c.train.max_steps = 20000;
  c.train.relabel_interval = 4000;
  c.downstream.episodes = 4000;
  c.downstream.sac.batch_size = batch;
  c.downstream.model_based.batch_size = batch;
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  std::string env = "pointmaze-medium";
  if (j.contains("env.name")) {
    if (!j.at("env.name").is_string()) throw ConfigError("config key 'env.name' must be a string");
    env = j.at("env.name").get<std::string>();
  }
  ExperimentConfig c = defaults(env);
  std::set<std::string> known;
  visit_fields(c, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    known.insert(key);
    if (!j.contains(key)) return;
    const nlohmann::json& v = j.at(key);
    if (!json_matches<T>(v)) throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    field = v.get<T>();
  });
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  ExperimentConfig copy = *this;
  nlohmann::json j = nlohmann::json::object();
  visit_fields(copy, [&](const char* key, auto& field) { j[key] = field; });
  return j;
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  write_text_atomic(path, to_json().dump(2) + "\n");
}

void ExperimentConfig::validate() const {
  const auto names = env_names();
  if (std::find(names.begin(), names.end(), env) == names.end()) {
    throw ConfigError("unknown environment '" + env + "'");
  }
  parse_tier(tier);
  if (data_episodes < 1) throw ConfigError("data.episodes must be >= 1");
  if (data_horizon < 0) throw ConfigError("data.horizon must be >= 0");
  if (checkpoint_interval < 0) throw ConfigError("train.checkpoint_interval must be >= 0");
  if (final_window < 1) throw ConfigError("downstream.final_window must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  model_for_env().validate();
  train.validate();
  downstream.validate();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SkillModelConfig ExperimentConfig::model_for_env() const {
  const auto e = make_env(env);
  SkillModelConfig m = model;
  m.state_dim = e->spec().state_dim;
  m.action_dim = e->spec().action_dim;
  return m;
}

}  // namespace dcsl
