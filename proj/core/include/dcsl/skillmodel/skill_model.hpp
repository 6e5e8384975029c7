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

#ifndef DCSL_SKILLMODEL_SKILL_MODEL_HPP_
#define DCSL_SKILLMODEL_SKILL_MODEL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "dcsl/diffcore/adam.hpp"
#include "dcsl/diffcore/distributions.hpp"
#include "dcsl/diffcore/nn.hpp"
#include "dcsl/diffcore/param_tree.hpp"
#include "dcsl/diffcore/tape.hpp"

namespace dcsl {

enum class EncoderKind { kRecurrent, kMlp };
enum class DecoderKind { kClosedLoop, kOpenLoop };

struct SkillModelConfig {
  int state_dim = 0;
  int action_dim = 0;
  int skill_dim = 5;
  // q head, pi, prior, O and T.
  int hidden = 256;
  int mlp_layers = 4;
  // phi and psi.
  int sim_hidden = 128;
  int sim_layers = 2;
  int rep_dim = 16;
  // Recurrent skill encoder and the state encoder E.
  int lstm_hidden = 128;
  int latent_dim = 128;
  EncoderKind encoder = EncoderKind::kRecurrent;
  DecoderKind decoder = DecoderKind::kClosedLoop;
  // Normaliser for the open-loop decoder's step offset.
  int max_skill_length = 30;

  void validate() const;
  nlohmann::json to_json() const;
  static SkillModelConfig from_json(const nlohmann::json& j);
};

// Parameters of q, pi, p_prior, phi, psi, E, O and T in one tree, with leaf
// prefixes "q_rnn/", "q_head/" (or "q_mlp/"), "pi/", "prior/", "phi/", "psi/",
// "E/", "O/" and "T/", plus the Adam state for that tree.
//
// Skills live in pre-tanh space: q and p_prior are Gaussians over u, a skill
// is z = tanh(u), and p(z) is tanh of a standard normal.
class SkillModel {
 public:
  SkillModel(const SkillModelConfig& config, std::uint64_t seed);
  SkillModel(const SkillModelConfig& config, ParamTree params);

  const SkillModelConfig& config() const { return config_; }
  const ParamTree& params() const { return params_; }
  ParamTree& mutable_params() { return params_; }
  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }

  // Differentiable forward passes; every matrix argument is batch-major.
  GaussianVar encode(Tape& tape, std::span<const Var> key_states) const;
  GaussianVar decode(Tape& tape, const Var& states, const Var& z, const Var& offsets) const;
  GaussianVar prior(Tape& tape, const Var& states) const;
  Var phi(Tape& tape, const Var& states, const Var& z) const;
  Var psi(Tape& tape, const Var& states) const;
  Var state_latent(Tape& tape, const Var& states) const;
  Var observe(Tape& tape, const Var& latent) const;
  Var predict_latent(Tape& tape, const Var& latent, const Var& z) const;

  // Non-differentiable evaluation helpers.
  // `key_states` is 4 x state_dim.
  DiagGaussian encode_skill(const Matrix& key_states) const;
  // Batched form: four (batch x state_dim) matrices; returns the means (batch x Z).
  Matrix encode_mean(std::span<const Matrix> key_states) const;
  TanhGaussian decode_action(const Vector& state, const Vector& z, int offset = 0) const;
  DiagGaussian skill_prior(const Vector& state) const;
  double similarity(const Vector& s, const Vector& z, const Vector& s_prime) const;
  Matrix phi_eval(const Matrix& states, const Matrix& z) const;
  Matrix psi_eval(const Matrix& states) const;
  Vector state_latent(const Vector& state) const;
  Vector predict_target_latent(const Vector& state, const Vector& z) const;
  // O(T(E(s), z)): the predicted target observation.
  Vector predict_target_state(const Vector& state, const Vector& z) const;

  void save(const std::filesystem::path& prefix, const nlohmann::json& extra = nlohmann::json::object()) const;
  static SkillModel load(const std::filesystem::path& prefix);

  const MlpSpec& pi_spec() const { return pi_; }
  const MlpSpec& prior_spec() const { return prior_; }
  const MlpSpec& phi_spec() const { return phi_; }
  const MlpSpec& psi_spec() const { return psi_; }
  const MlpSpec& observe_spec() const { return obs_; }
  const MlpSpec& target_spec() const { return target_; }

 private:
  void build_specs();

  SkillModelConfig config_;
  ParamTree params_;
  AdamState adam_;
  LstmSpec q_rnn_;
  MlpSpec q_head_;
  MlpSpec q_mlp_;
  MlpSpec pi_;
  MlpSpec prior_;
  MlpSpec phi_;
  MlpSpec psi_;
  LstmSpec encoder_;
  MlpSpec obs_;
  MlpSpec target_;
};

inline constexpr const char* kSkillCheckpointKind = "skill-model";

}  // namespace dcsl

#endif  // DCSL_SKILLMODEL_SKILL_MODEL_HPP_
