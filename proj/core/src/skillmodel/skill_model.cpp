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

#include "dcsl/skillmodel/skill_model.hpp"

#include <vector>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"

namespace dcsl {

void SkillModelConfig::validate() const {
  if (state_dim <= 0 || action_dim <= 0 || skill_dim <= 0) {
    throw ConfigError("skill model: state, action and skill dims must be positive");
  }
  if (hidden <= 0 || sim_hidden <= 0 || rep_dim <= 0 || lstm_hidden <= 0 || latent_dim <= 0) {
    throw ConfigError("skill model: layer widths must be positive");
  }
  if (mlp_layers < 1 || sim_layers < 1) throw ConfigError("skill model: layer counts must be >= 1");
  if (max_skill_length < 1) throw ConfigError("skill model: max_skill_length must be >= 1");
}

nlohmann::json SkillModelConfig::to_json() const {
  return {{"state_dim", state_dim},
          {"action_dim", action_dim},
          {"skill_dim", skill_dim},
          {"hidden", hidden},
          {"mlp_layers", mlp_layers},
          {"sim_hidden", sim_hidden},
          {"sim_layers", sim_layers},
          {"rep_dim", rep_dim},
          {"lstm_hidden", lstm_hidden},
          {"latent_dim", latent_dim},
          {"encoder", encoder == EncoderKind::kRecurrent ? "lstm" : "mlp"},
          {"decoder", decoder == DecoderKind::kClosedLoop ? "closed-loop" : "open-loop"},
          {"max_skill_length", max_skill_length}};
}

SkillModelConfig SkillModelConfig::from_json(const nlohmann::json& j) {
  SkillModelConfig c;
  try {
    c.state_dim = j.at("state_dim").get<int>();
    c.action_dim = j.at("action_dim").get<int>();
    c.skill_dim = j.at("skill_dim").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.mlp_layers = j.at("mlp_layers").get<int>();
    c.sim_hidden = j.at("sim_hidden").get<int>();
    c.sim_layers = j.at("sim_layers").get<int>();
    c.rep_dim = j.at("rep_dim").get<int>();
    c.lstm_hidden = j.at("lstm_hidden").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.encoder = j.at("encoder").get<std::string>() == "mlp" ? EncoderKind::kMlp : EncoderKind::kRecurrent;
    c.decoder = j.at("decoder").get<std::string>() == "open-loop" ? DecoderKind::kOpenLoop
                                                                  : DecoderKind::kClosedLoop;
    c.max_skill_length = j.at("max_skill_length").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("skill model config: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

void SkillModel::build_specs() {
  const auto& c = config_;
  const int s = c.state_dim;
  const int z = c.skill_dim;
  q_rnn_ = LstmSpec{"q_rnn", s, c.lstm_hidden};
  q_head_ = make_mlp_spec("q_head", c.lstm_hidden, c.hidden, 1, 2 * z, Activation::kElu);
  q_mlp_ = make_mlp_spec("q_mlp", 4 * s, c.hidden, c.mlp_layers, 2 * z, Activation::kElu);
  const int pi_in = s + z + (c.decoder == DecoderKind::kOpenLoop ? 1 : 0);
  pi_ = make_mlp_spec("pi", pi_in, c.hidden, c.mlp_layers, 2 * c.action_dim, Activation::kElu);
  prior_ = make_mlp_spec("prior", s, c.hidden, c.mlp_layers, 2 * z, Activation::kElu);
  phi_ = make_mlp_spec("phi", s + z, c.sim_hidden, c.sim_layers, c.rep_dim, Activation::kRelu);
  psi_ = make_mlp_spec("psi", s, c.sim_hidden, c.sim_layers, c.rep_dim, Activation::kRelu);
  encoder_ = LstmSpec{"E", s, c.latent_dim};
  obs_ = make_mlp_spec("O", c.latent_dim, c.hidden, c.mlp_layers, s, Activation::kElu);
  target_ = make_mlp_spec("T", c.latent_dim + z, c.hidden, c.mlp_layers, c.latent_dim, Activation::kElu);
}

SkillModel::SkillModel(const SkillModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  build_specs();
  Rng rng(seed);
  if (config_.encoder == EncoderKind::kRecurrent) {
    init_lstm(params_, q_rnn_, rng);
    init_mlp(params_, q_head_, rng);
  } else {
    init_mlp(params_, q_mlp_, rng);
  }
  init_mlp(params_, pi_, rng);
  init_mlp(params_, prior_, rng);
  init_mlp(params_, phi_, rng);
  init_mlp(params_, psi_, rng);
  init_lstm(params_, encoder_, rng);
  init_mlp(params_, obs_, rng);
  init_mlp(params_, target_, rng);
  adam_ = AdamState::zeros_like(params_);
}

SkillModel::SkillModel(const SkillModelConfig& config, ParamTree params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  build_specs();
  SkillModel reference(config_, 0);
  if (!reference.params_.same_structure(params_)) {
    throw FormatError("skill model parameters do not match the configured architecture");
  }
  adam_ = AdamState::zeros_like(params_);
}

GaussianVar SkillModel::encode(Tape& tape, std::span<const Var> keys) const {
  if (keys.size() != 4) throw PreconditionError("encode: expected 4 key states");
  for (const Var& k : keys) {
    if (k.cols() != config_.state_dim) throw PreconditionError("encode: key state has wrong dimension");
  }
  Var out;
  if (config_.encoder == EncoderKind::kRecurrent) {
    out = mlp_apply(tape, params_, q_head_, lstm_apply(tape, params_, q_rnn_, keys));
  } else {
    out = mlp_apply(tape, params_, q_mlp_, ad::concat_cols(keys));
  }
  return gaussian_head(out, config_.skill_dim);
}

GaussianVar SkillModel::decode(Tape& tape, const Var& states, const Var& z, const Var& offsets) const {
  Var in = ad::concat_cols(states, z);
  if (config_.decoder == DecoderKind::kOpenLoop) {
    in = ad::concat_cols(in, ad::scale(offsets, 1.0 / config_.max_skill_length));
  }
  return gaussian_head(mlp_apply(tape, params_, pi_, in), config_.action_dim);
}

GaussianVar SkillModel::prior(Tape& tape, const Var& states) const {
  return gaussian_head(mlp_apply(tape, params_, prior_, states), config_.skill_dim);
}

Var SkillModel::phi(Tape& tape, const Var& states, const Var& z) const {
  return mlp_apply(tape, params_, phi_, ad::concat_cols(states, z));
}

Var SkillModel::psi(Tape& tape, const Var& states) const { return mlp_apply(tape, params_, psi_, states); }

Var SkillModel::state_latent(Tape& tape, const Var& states) const {
  const Var steps[] = {states};
  return lstm_apply(tape, params_, encoder_, steps);
}

Var SkillModel::observe(Tape& tape, const Var& latent) const { return mlp_apply(tape, params_, obs_, latent); }

Var SkillModel::predict_latent(Tape& tape, const Var& latent, const Var& z) const {
  return mlp_apply(tape, params_, target_, ad::concat_cols(latent, z));
}

namespace {
Matrix row(const Vector& v) { return v.transpose(); }
}  // namespace

DiagGaussian SkillModel::encode_skill(const Matrix& key_states) const {
  if (key_states.rows() != 4 || key_states.cols() != config_.state_dim) {
    throw PreconditionError("encode_skill: expected 4 x " + std::to_string(config_.state_dim) + " key states");
  }
  Tape tape;
  std::vector<Var> keys;
  for (int i = 0; i < 4; ++i) keys.push_back(tape.constant(key_states.row(i)));
  const GaussianVar g = encode(tape, keys);
  return DiagGaussian(g.mean.value().row(0).transpose(), g.log_std.value().row(0).transpose());
}

Matrix SkillModel::encode_mean(std::span<const Matrix> key_states) const {
  Tape tape;
  std::vector<Var> keys;
  for (const Matrix& k : key_states) keys.push_back(tape.constant_ref(k));
  return encode(tape, keys).mean.value();
}

TanhGaussian SkillModel::decode_action(const Vector& state, const Vector& z, int offset) const {
  Tape tape;
  Matrix off(1, 1);
  off(0, 0) = offset;
  const GaussianVar g = decode(tape, tape.constant(row(state)), tape.constant(row(z)), tape.constant(off));
  return TanhGaussian{DiagGaussian(g.mean.value().row(0).transpose(), g.log_std.value().row(0).transpose())};
}

DiagGaussian SkillModel::skill_prior(const Vector& state) const {
  Tape tape;
  const GaussianVar g = prior(tape, tape.constant(row(state)));
  return DiagGaussian(g.mean.value().row(0).transpose(), g.log_std.value().row(0).transpose());
}

Matrix SkillModel::phi_eval(const Matrix& states, const Matrix& z) const {
  Tape tape;
  return phi(tape, tape.constant_ref(states), tape.constant_ref(z)).value();
}

Matrix SkillModel::psi_eval(const Matrix& states) const {
  Tape tape;
  return psi(tape, tape.constant_ref(states)).value();
}

double SkillModel::similarity(const Vector& s, const Vector& z, const Vector& s_prime) const {
  const Matrix p = phi_eval(row(s), row(z));
  const Matrix q = psi_eval(row(s_prime));
  return p.row(0).dot(q.row(0));
}

Vector SkillModel::state_latent(const Vector& state) const {
  Tape tape;
  return state_latent(tape, tape.constant(row(state))).value().row(0).transpose();
}

Vector SkillModel::predict_target_latent(const Vector& state, const Vector& z) const {
  Tape tape;
  Var h = state_latent(tape, tape.constant(row(state)));
  return predict_latent(tape, h, tape.constant(row(z))).value().row(0).transpose();
}

Vector SkillModel::predict_target_state(const Vector& state, const Vector& z) const {
  Tape tape;
  Var h = state_latent(tape, tape.constant(row(state)));
  return observe(tape, predict_latent(tape, h, tape.constant(row(z)))).value().row(0).transpose();
}

void SkillModel::save(const std::filesystem::path& prefix, const nlohmann::json& extra) const {
  nlohmann::json meta = extra;
  meta["config"] = config_.to_json();
  save_checkpoint(prefix, kSkillCheckpointKind, params_, meta);
}

SkillModel SkillModel::load(const std::filesystem::path& prefix) {
  Checkpoint ck = load_checkpoint(prefix, kSkillCheckpointKind);
  if (!ck.metadata.contains("config")) throw FormatError("skill checkpoint: missing field 'config'");
  return SkillModel(SkillModelConfig::from_json(ck.metadata["config"]), std::move(ck.params));
}

}  // namespace dcsl
