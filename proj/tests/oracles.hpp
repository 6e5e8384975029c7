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

#ifndef DCSL_TESTS_ORACLES_HPP_
#define DCSL_TESTS_ORACLES_HPP_

#include <array>
#include <cmath>
#include <vector>

#include "dcsl/diffcore/adam.hpp"
#include "dcsl/skillmodel/skill_model.hpp"

namespace dcsl::testing {

// Network sizes small enough for exhaustive finite-difference checks.
inline SkillModelConfig tiny_config(int state_dim = 3, int action_dim = 2, int skill_dim = 2) {
  SkillModelConfig c;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.skill_dim = skill_dim;
  c.hidden = 4;
  c.mlp_layers = 2;
  c.sim_hidden = 4;
  c.sim_layers = 2;
  c.rep_dim = 3;
  c.lstm_hidden = 3;
  c.latent_dim = 3;
  return c;
}

// Four one-hot states, two fixed skills, and a known transition kernel
// p(s'|s,z) given as a cyclic shift of a base row per skill.
struct DensityToy {
  static constexpr int kStates = 4;
  static constexpr int kSkills = 2;
  std::array<std::array<double, kStates>, kSkills> base{{{0.1, 0.6, 0.2, 0.1}, {0.5, 0.1, 0.1, 0.3}}};
  std::array<std::array<double, 2>, kSkills> skill{{{0.6, -0.6}, {-0.6, 0.6}}};

  double transition(int s, int z, int sp) const {
    return base[static_cast<std::size_t>(z)][static_cast<std::size_t>(((sp - s) % kStates + kStates) % kStates)];
  }
  double marginal(int sp) const {
    double m = 0.0;
    for (int s = 0; s < kStates; ++s) {
      for (int z = 0; z < kSkills; ++z) m += transition(s, z, sp) / (kStates * kSkills);
    }
    return m;
  }
  // Bayes-optimal discriminator of positives versus marginal negatives.
  double optimal(int s, int z, int sp) const {
    const double p = transition(s, z, sp);
    return p / (p + marginal(sp));
  }
};

struct DensityToyResult {
  double max_abs_error = 0.0;
  Matrix sigma;    // (s*kSkills + z) x s'
  Matrix optimal;  // same layout
};

// Minimises the population NCE loss
//   sum_{s,z} p(s)p(z) sum_{s'} [p(s'|s,z) softplus(-f) + p(s') softplus(f)]
// over phi and psi, with f(s,z,s') = <phi(s,z), psi(s')>.
inline DensityToyResult run_density_toy(std::uint64_t seed, int steps, double lr) {
  const DensityToy toy;
  SkillModelConfig cfg;
  cfg.state_dim = DensityToy::kStates;
  cfg.action_dim = 1;
  cfg.skill_dim = 2;
  cfg.hidden = 8;
  cfg.mlp_layers = 2;
  cfg.sim_hidden = 32;
  cfg.rep_dim = 16;
  cfg.lstm_hidden = 4;
  cfg.latent_dim = 4;
  SkillModel model(cfg, seed);
  constexpr int kRows = DensityToy::kStates * DensityToy::kSkills * DensityToy::kStates;
  Matrix s(kRows, DensityToy::kStates), z(kRows, 2), sp(kRows, DensityToy::kStates);
  Matrix w_pos(kRows, 1), w_neg(kRows, 1);
  s.setZero();
  sp.setZero();
  int r = 0;
  for (int a = 0; a < DensityToy::kStates; ++a) {
    for (int k = 0; k < DensityToy::kSkills; ++k) {
      for (int b = 0; b < DensityToy::kStates; ++b, ++r) {
        s(r, a) = 1.0;
        sp(r, b) = 1.0;
        z(r, 0) = toy.skill[static_cast<std::size_t>(k)][0];
        z(r, 1) = toy.skill[static_cast<std::size_t>(k)][1];
        w_pos(r, 0) = toy.transition(a, k, b) / (DensityToy::kStates * DensityToy::kSkills);
        w_neg(r, 0) = toy.marginal(b) / (DensityToy::kStates * DensityToy::kSkills);
      }
    }
  }
  AdamState adam = AdamState::zeros_like(model.params());
  Matrix f;
  for (int step = 0; step <= steps; ++step) {
    Tape tape;
    Var fv = ad::row_dot(model.phi(tape, tape.constant_ref(s), tape.constant_ref(z)),
                         model.psi(tape, tape.constant_ref(sp)));
    f = fv.value();
    if (step == steps) break;
    Var loss = ad::sum(ad::mul(tape.constant_ref(w_pos), ad::softplus(ad::neg(fv))) +
                       ad::mul(tape.constant_ref(w_neg), ad::softplus(fv)));
    adam_step(adam, model.mutable_params(), backprop(tape, loss, model.params()), lr);
  }
  DensityToyResult out;
  out.sigma.resize(DensityToy::kStates * DensityToy::kSkills, DensityToy::kStates);
  out.optimal.resizeLike(out.sigma);
  r = 0;
  for (int a = 0; a < DensityToy::kStates; ++a) {
    for (int k = 0; k < DensityToy::kSkills; ++k) {
      for (int b = 0; b < DensityToy::kStates; ++b, ++r) {
        const double sig = 1.0 / (1.0 + std::exp(-f(r, 0)));
        out.sigma(a * DensityToy::kSkills + k, b) = sig;
        out.optimal(a * DensityToy::kSkills + k, b) = toy.optimal(a, k, b);
        out.max_abs_error = std::max(out.max_abs_error, std::abs(sig - toy.optimal(a, k, b)));
      }
    }
  }
  return out;
}

}  // namespace dcsl::testing

#endif  // DCSL_TESTS_ORACLES_HPP_
