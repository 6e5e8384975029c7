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

#include "dcsl/downstream/sac.hpp"

#include <cmath>
#include <sstream>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"

namespace dcsl {
namespace {

constexpr const char* kPolicyKind = "hl-policy";
constexpr const char* kTargetPrefix = "target/";

struct Split {
  Matrix mean;
  Matrix log_std;
};

Split split_head(const Matrix& out, int dim) {
  return {out.leftCols(dim), out.rightCols(dim).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax)};
}

Vector rowwise_kl(const Split& a, const Split& b) {
  const Matrix diff = a.mean - b.mean;
  const Matrix ratio = (2.0 * (a.log_std - b.log_std)).array().exp().matrix();
  const Matrix scaled = diff.array().square() * (-2.0 * b.log_std).array().exp();
  return ((b.log_std - a.log_std).array() + 0.5 * (ratio.array() + scaled.array()) - 0.5).rowwise().sum();
}

Matrix squash(const Split& d, const Matrix& noise) {
  return (d.mean.array() + d.log_std.array().exp() * noise.array()).tanh().matrix();
}

// Per-row minimum of two column Vars, routed through a constant mask.
Var min_of(Tape& tape, const Var& a, const Var& b) {
  const Matrix mask = (a.value().array() <= b.value().array()).cast<double>().matrix();
  const Matrix other = (1.0 - mask.array()).matrix();
  return ad::mul(a, tape.constant(mask)) + ad::mul(b, tape.constant(other));
}

void check_finite(const SacLosses& l) {
  if (!std::isfinite(l.critic) || !std::isfinite(l.actor) || !std::isfinite(l.kl)) {
    std::ostringstream os;
    os << "sac_update: non-finite loss (critic=" << l.critic << ", actor=" << l.actor << ", kl=" << l.kl << ")";
    throw TrainingError(os.str());
  }
}

}  // namespace

void SacConfig::validate() const {
  if (hidden < 1 || layers < 1) throw ConfigError("sac: hidden and layers must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("sac: gamma must lie in (0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("sac: tau must lie in [0, 1]");
  if (alpha_kl < 0.0) throw ConfigError("sac: alpha_kl must be >= 0");
  if (actor_lr <= 0.0 || critic_lr <= 0.0) throw ConfigError("sac: learning rates must be positive");
  if (batch_size < 1) throw ConfigError("sac: batch_size must be >= 1");
}

nlohmann::json SacConfig::to_json() const {
  return {{"hidden", hidden},     {"layers", layers},     {"gamma", gamma},
          {"tau", tau},           {"alpha_kl", alpha_kl}, {"actor_lr", actor_lr},
          {"critic_lr", critic_lr}, {"batch_size", batch_size}};
}

SacConfig SacConfig::from_json(const nlohmann::json& j) {
  SacConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.gamma = j.at("gamma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.alpha_kl = j.at("alpha_kl").get<double>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.validate();
  return c;
}

HLPolicy::HLPolicy(int state_dim, int skill_dim, const SacConfig& cfg, std::uint64_t seed)
    : state_dim_(state_dim), skill_dim_(skill_dim), cfg_(cfg) {
  cfg_.validate();
  if (state_dim < 1 || skill_dim < 1) throw ConfigError("HLPolicy: dimensions must be positive");
  actor_spec_ = make_mlp_spec("actor", state_dim, cfg.hidden, cfg.layers, 2 * skill_dim, Activation::kElu);
  init(seed);
}

HLPolicy::HLPolicy(const SkillModel& model, const SacConfig& cfg, std::uint64_t seed)
    : state_dim_(model.config().state_dim), skill_dim_(model.config().skill_dim), cfg_(cfg) {
  cfg_.validate();
  actor_spec_ = model.prior_spec();
  actor_spec_.name = "actor";
  init(seed);
  for (std::size_t i : model.params().leaves_with_prefix("prior/")) {
    const std::string& name = model.params().names()[i];
    actor_.set("actor/" + name.substr(6), model.params().at(i));
  }
}

void HLPolicy::init(std::uint64_t seed) {
  const SacConfig& cfg = cfg_;
  const int state_dim = state_dim_;
  const int skill_dim = skill_dim_;
  q_spec_[0] = make_mlp_spec("q1", state_dim + skill_dim, cfg.hidden, cfg.layers, 1, Activation::kElu);
  q_spec_[1] = make_mlp_spec("q2", state_dim + skill_dim, cfg.hidden, cfg.layers, 1, Activation::kElu);
  Rng rng(mix_seed(seed, 0x5ac));
  init_mlp(actor_, actor_spec_, rng);
  init_mlp(critics_, q_spec_[0], rng);
  init_mlp(critics_, q_spec_[1], rng);
  targets_ = critics_;
  actor_adam_ = AdamState::zeros_like(actor_);
  critic_adam_ = AdamState::zeros_like(critics_);
}

GaussianVar HLPolicy::actor(Tape& tape, const Var& states) const {
  return gaussian_head(mlp_apply(tape, actor_, actor_spec_, states), skill_dim_);
}

Var HLPolicy::critic(Tape& tape, const ParamTree& tree, int which, const Var& states, const Var& skills) const {
  return mlp_apply(tape, tree, q_spec_[which], ad::concat_cols(states, skills));
}

TanhGaussian HLPolicy::distribution(const State& s) const {
  const Split d = split_head(mlp_eval(actor_, actor_spec_, s.transpose()), skill_dim_);
  return TanhGaussian{DiagGaussian(d.mean.row(0).transpose(), d.log_std.row(0).transpose())};
}

Vector HLPolicy::act(const State& s, Rng& rng, bool deterministic) const {
  const TanhGaussian d = distribution(s);
  return deterministic ? d.mode() : tanh_gaussian_sample(d, rng).sample;
}

Vector HLPolicy::q_value(const Matrix& states, const Matrix& skills, bool target) const {
  const ParamTree& tree = target ? targets_ : critics_;
  Matrix in(states.rows(), states.cols() + skills.cols());
  in << states, skills;
  return mlp_eval(tree, q_spec_[0], in).cwiseMin(mlp_eval(tree, q_spec_[1], in)).col(0);
}

void HLPolicy::save(const std::filesystem::path& prefix, const nlohmann::json& extra) const {
  ParamTree all = actor_;
  for (std::size_t i = 0; i < critics_.size(); ++i) all.add(critics_.names()[i], critics_.at(i));
  for (std::size_t i = 0; i < targets_.size(); ++i) all.add(kTargetPrefix + targets_.names()[i], targets_.at(i));
  nlohmann::json meta = extra;
  meta["sac"] = cfg_.to_json();
  meta["state_dim"] = state_dim_;
  meta["skill_dim"] = skill_dim_;
  meta["actor_sizes"] = actor_spec_.sizes;
  meta["actor_hidden"] = to_string(actor_spec_.hidden);
  save_checkpoint(prefix, kPolicyKind, all, meta);
}

HLPolicy HLPolicy::load(const std::filesystem::path& prefix, nlohmann::json* metadata) {
  const Checkpoint ck = load_checkpoint(prefix, kPolicyKind);
  try {
    HLPolicy p(ck.metadata.at("state_dim").get<int>(), ck.metadata.at("skill_dim").get<int>(),
               SacConfig::from_json(ck.metadata.at("sac")), 0);
    if (ck.metadata.contains("actor_sizes")) {
      p.actor_spec_.sizes = ck.metadata.at("actor_sizes").get<std::vector<int>>();
      p.actor_spec_.hidden = parse_activation(ck.metadata.at("actor_hidden").get<std::string>());
      p.actor_ = ParamTree();
      Rng rng(0);
      init_mlp(p.actor_, p.actor_spec_, rng);
      p.actor_adam_ = AdamState::zeros_like(p.actor_);
    }
    for (ParamTree* tree : {&p.actor_, &p.critics_}) {
      for (std::size_t i = 0; i < tree->size(); ++i) tree->set(tree->names()[i], ck.params.at(tree->names()[i]));
    }
    for (std::size_t i = 0; i < p.targets_.size(); ++i) {
      p.targets_.set(p.targets_.names()[i], ck.params.at(kTargetPrefix + p.targets_.names()[i]));
    }
    if (metadata != nullptr) *metadata = ck.metadata;
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("hl-policy metadata: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("hl-policy layout: ") + e.what());
  }
}

Vector policy_prior_kl(const HLPolicy& policy, const SkillModel& model, const Matrix& states) {
  const int z = policy.skill_dim();
  Tape tape;
  const GaussianVar pi = policy.actor(tape, tape.constant_ref(states));
  const Split a{pi.mean.value(), pi.log_std.value()};
  const Split b = split_head(mlp_eval(model.params(), model.prior_spec(), states), z);
  return rowwise_kl(a, b);
}

void soft_update(ParamTree& target, const ParamTree& online, double tau) {
  if (!target.same_structure(online)) throw PreconditionError("soft_update: tree mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto t = target.mut(i);
    t = (1.0 - tau) * t + tau * online.at(i);
  }
}

SacLosses sac_update(HLPolicy& policy, const std::vector<HLTransition>& batch, const SkillModel& model, Rng& rng) {
  if (batch.empty()) throw PreconditionError("sac_update: empty batch");
  const SacConfig& cfg = policy.config();
  const int n = static_cast<int>(batch.size());
  const int sd = policy.state_dim();
  const int zd = policy.skill_dim();
  Matrix s(n, sd), z(n, zd), s_next(n, sd), reward(n, 1), boot(n, 1);
  for (int i = 0; i < n; ++i) {
    const HLTransition& t = batch[static_cast<std::size_t>(i)];
    s.row(i) = t.s.transpose();
    z.row(i) = t.z.transpose();
    s_next.row(i) = t.s_next.transpose();
    reward(i, 0) = t.reward;
    boot(i, 0) = t.done ? 0.0 : std::pow(cfg.gamma, t.k);
  }
  SacLosses out;

  // Critic target from the next-state policy sample, penalised by its prior KL.
  Matrix y;
  {
    Tape tape;
    const GaussianVar pi = policy.actor(tape, tape.constant_ref(s_next));
    const Split next{pi.mean.value(), pi.log_std.value()};
    const Split prior = split_head(mlp_eval(model.params(), model.prior_spec(), s_next), zd);
    const Matrix z_next = squash(next, standard_normal_matrix(rng, n, zd));
    const Vector soft = policy.q_value(s_next, z_next, true) - cfg.alpha_kl * rowwise_kl(next, prior);
    y = reward + boot.cwiseProduct(soft);
  }
  {
    Tape tape;
    const Var sv = tape.constant_ref(s);
    const Var zv = tape.constant_ref(z);
    const Var yv = tape.constant_ref(y);
    const Var q1 = policy.critic(tape, policy.critic_params(), 0, sv, zv);
    const Var q2 = policy.critic(tape, policy.critic_params(), 1, sv, zv);
    const Var loss = ad::mean(ad::square(q1 - yv)) + ad::mean(ad::square(q2 - yv));
    out.critic = loss.scalar();
    out.q_mean = 0.5 * (q1.value().mean() + q2.value().mean());
    if (!std::isfinite(out.critic)) check_finite(out);
    adam_step(policy.critic_optimizer(), policy.critic_params(), backprop(tape, loss, policy.critic_params()),
              cfg.critic_lr);
  }
  {
    Tape tape;
    const Var sv = tape.constant_ref(s);
    const GaussianVar pi = policy.actor(tape, sv);
    const Split prior = split_head(mlp_eval(model.params(), model.prior_spec(), s), zd);
    const GaussianVar pv = gaussian_constant(tape, prior.mean, prior.log_std);
    const Var zs = ad::tanh(reparameterize(pi, standard_normal_matrix(rng, n, zd)));
    const Var q = min_of(tape, policy.critic(tape, policy.critic_params(), 0, sv, zs),
                         policy.critic(tape, policy.critic_params(), 1, sv, zs));
    const Var kl = kl_diag_gaussian(pi, pv);
    const Var loss = ad::mean(ad::scale(kl, cfg.alpha_kl) - q);
    out.actor = loss.scalar();
    out.kl = kl.value().mean();
    check_finite(out);
    adam_step(policy.actor_optimizer(), policy.actor_params(), backprop(tape, loss, policy.actor_params()),
              cfg.actor_lr);
  }
  soft_update(policy.target_params(), policy.critic_params(), cfg.tau);
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer: capacity must be positive");
}

void ReplayBuffer::push(HLTransition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<HLTransition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw SamplingError("replay buffer is empty");
  std::vector<HLTransition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(items_[uniform_index(rng, items_.size())]);
  return out;
}

}  // namespace dcsl
