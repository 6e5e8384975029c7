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

#include "dcsl/downstream/cem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/downstream/sac.hpp"
#include "dcsl/error.hpp"

namespace dcsl {
namespace {

constexpr const char* kAgentKind = "mb-agent";
constexpr double kSkillEdge = 1.0 - 1e-6;

Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

void CEMConfig::validate() const {
  if (horizon < 1) throw ConfigError("cem: horizon must be >= 1");
  if (population < 1) throw ConfigError("cem: population must be >= 1");
  if (elites < 1 || elites > population) throw ConfigError("cem: elites must lie in [1, population]");
  if (iterations < 1) throw ConfigError("cem: iterations must be >= 1");
  if (!(init_std > 0.0) || min_std < 0.0) throw ConfigError("cem: std settings must be positive");
}

nlohmann::json CEMConfig::to_json() const {
  return {{"horizon", horizon},       {"population", population}, {"elites", elites},
          {"iterations", iterations}, {"init_std", init_std},     {"min_std", min_std}};
}

CEMConfig CEMConfig::from_json(const nlohmann::json& j) {
  CEMConfig c;
  c.horizon = j.at("horizon").get<int>();
  c.population = j.at("population").get<int>();
  c.elites = j.at("elites").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.init_std = j.at("init_std").get<double>();
  c.min_std = j.at("min_std").get<double>();
  c.validate();
  return c;
}

CemResult cem_optimize(const SequenceScore& score, int skill_dim, const CEMConfig& cfg, Rng& rng,
                       const std::optional<Matrix>& init_mean) {
  cfg.validate();
  const int width = cfg.horizon * skill_dim;
  Vector mean = Vector::Zero(width);
  if (init_mean) {
    if (init_mean->rows() != cfg.horizon || init_mean->cols() != skill_dim) {
      throw PreconditionError("cem_optimize: initial mean must be horizon x skill_dim");
    }
    mean = Eigen::Map<const Vector>(init_mean->data(), width);
  }
  Vector std = Vector::Constant(width, cfg.init_std);
  CemResult out;
  for (int it = 0; it < cfg.iterations; ++it) {
    Matrix pop = standard_normal_matrix(rng, cfg.population, width);
    for (int r = 0; r < cfg.population; ++r) {
      pop.row(r) = (mean + std.cwiseProduct(pop.row(r).transpose())).cwiseMax(-kSkillEdge).cwiseMin(kSkillEdge);
    }
    const Vector scores = score(pop);
    if (scores.size() != cfg.population) throw PreconditionError("cem_optimize: score size mismatch");
    std::vector<int> order(static_cast<std::size_t>(cfg.population));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    Matrix elite(cfg.elites, width);
    double total = 0.0;
    for (int e = 0; e < cfg.elites; ++e) {
      elite.row(e) = pop.row(order[static_cast<std::size_t>(e)]);
      total += scores[order[static_cast<std::size_t>(e)]];
    }
    mean = elite.colwise().mean().transpose();
    const Matrix centred = elite.rowwise() - mean.transpose();
    std = (centred.array().square().colwise().sum() / cfg.elites).sqrt().matrix().transpose().cwiseMax(cfg.min_std);
    out.elite_mean.push_back(total / cfg.elites);
    out.elite_best.push_back(scores[order.front()]);
  }
  out.mean = Eigen::Map<const Matrix>(mean.data(), cfg.horizon, skill_dim);
  out.std = Eigen::Map<const Matrix>(std.data(), cfg.horizon, skill_dim);
  return out;
}

void ModelBasedConfig::validate() const {
  if (hidden < 1) throw ConfigError("model-based: hidden must be positive");
  if (lambda_latent < 0.0 || lambda_reward < 0.0 || lambda_value < 0.0) {
    throw ConfigError("model-based: loss weights must be >= 0");
  }
  if (learning_rate <= 0.0) throw ConfigError("model-based: learning_rate must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("model-based: gamma must lie in (0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("model-based: tau must lie in [0, 1]");
  if (batch_size < 1 || skill_steps < 1) throw ConfigError("model-based: batch_size and skill_steps must be >= 1");
  if (exploration_std < 0.0) throw ConfigError("model-based: exploration_std must be >= 0");
}

nlohmann::json ModelBasedConfig::to_json() const {
  return {{"hidden", hidden},
          {"lambda_latent", lambda_latent},
          {"lambda_reward", lambda_reward},
          {"lambda_value", lambda_value},
          {"learning_rate", learning_rate},
          {"gamma", gamma},
          {"tau", tau},
          {"batch_size", batch_size},
          {"skill_steps", skill_steps},
          {"exploration_std", exploration_std}};
}

ModelBasedConfig ModelBasedConfig::from_json(const nlohmann::json& j) {
  ModelBasedConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.lambda_latent = j.at("lambda_latent").get<double>();
  c.lambda_reward = j.at("lambda_reward").get<double>();
  c.lambda_value = j.at("lambda_value").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.skill_steps = j.at("skill_steps").get<int>();
  c.exploration_std = j.at("exploration_std").get<double>();
  c.validate();
  return c;
}

ModelBasedAgent::ModelBasedAgent(const SkillModel& model, const ModelBasedConfig& cfg, std::uint64_t seed)
    : model_(&model), cfg_(cfg) {
  cfg_.validate();
  const SkillModelConfig& mc = model.config();
  const int in = mc.latent_dim + mc.skill_dim;
  reward_spec_ = make_mlp_spec("R", in, cfg.hidden, 2, 1, Activation::kElu);
  value_spec_ = make_mlp_spec("Q", in, cfg.hidden, 3, 1, Activation::kElu);
  for (std::size_t i : model.params().leaves_with_prefix("T/")) {
    params_.add(model.params().names()[i], model.params().at(i));
  }
  Rng rng(mix_seed(seed, 0xce3));
  init_mlp(params_, reward_spec_, rng);
  init_mlp(params_, value_spec_, rng);
  target_ = params_;
  adam_ = AdamState::zeros_like(params_);
}

Var ModelBasedAgent::dynamics(Tape& tape, const Var& latent, const Var& z) const {
  return mlp_apply(tape, params_, model_->target_spec(), ad::concat_cols(latent, z));
}

Var ModelBasedAgent::reward(Tape& tape, const Var& latent, const Var& z) const {
  return mlp_apply(tape, params_, reward_spec_, ad::concat_cols(latent, z));
}

Var ModelBasedAgent::value(Tape& tape, const ParamTree& tree, const Var& latent, const Var& z) const {
  return mlp_apply(tape, tree, value_spec_, ad::concat_cols(latent, z));
}

Matrix ModelBasedAgent::latent(const Matrix& states) const {
  Tape tape;
  return model_->state_latent(tape, tape.constant_ref(states)).value();
}

Matrix ModelBasedAgent::prior_skill(const Matrix& states) const {
  const int z = model_->config().skill_dim;
  return mlp_eval(model_->params(), model_->prior_spec(), states).leftCols(z).array().tanh().matrix();
}

Matrix ModelBasedAgent::prior_skill_from_latent(const Matrix& latent) const {
  return prior_skill(mlp_eval(model_->params(), model_->observe_spec(), latent));
}

Vector ModelBasedAgent::score(const State& state, const Matrix& population, int horizon) const {
  const int zd = model_->config().skill_dim;
  if (population.cols() != horizon * zd) throw PreconditionError("score: population width mismatch");
  const Eigen::Index n = population.rows();
  Matrix h = latent(state.transpose()).replicate(n, 1);
  const double skill_discount = std::pow(cfg_.gamma, cfg_.skill_steps);
  Vector total = Vector::Zero(n);
  double discount = 1.0;
  for (int k = 0; k < horizon; ++k) {
    const Matrix in = concat(h, population.middleCols(k * zd, zd));
    total += discount * mlp_eval(params_, reward_spec_, in).col(0);
    h = mlp_eval(params_, model_->target_spec(), in);
    discount *= skill_discount;
  }
  total += discount * mlp_eval(params_, value_spec_, concat(h, prior_skill_from_latent(h))).col(0);
  return total;
}

Vector ModelBasedAgent::plan(const State& state, const CEMConfig& cem, Rng& rng) const {
  const int zd = model_->config().skill_dim;
  const CemResult r = cem_optimize([&](const Matrix& pop) { return score(state, pop, cem.horizon); }, zd, cem, rng);
  return r.mean.row(0).transpose();
}

void ModelBasedAgent::save(const std::filesystem::path& prefix, const nlohmann::json& extra) const {
  ParamTree all = params_;
  for (std::size_t i = 0; i < target_.size(); ++i) all.add("target/" + target_.names()[i], target_.at(i));
  nlohmann::json meta = extra;
  meta["model_based"] = cfg_.to_json();
  save_checkpoint(prefix, kAgentKind, all, meta);
}

void ModelBasedAgent::load_params(const std::filesystem::path& prefix) {
  const Checkpoint ck = load_checkpoint(prefix, kAgentKind);
  try {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_.set(params_.names()[i], ck.params.at(params_.names()[i]));
      target_.set(target_.names()[i], ck.params.at("target/" + target_.names()[i]));
    }
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("mb-agent layout: ") + e.what());
  }
}

ModelBasedGraph model_based_graph(Tape& tape, const ModelBasedAgent& agent, const std::vector<HLTransition>& batch) {
  if (batch.empty()) throw PreconditionError("model_based_update: empty batch");
  const ModelBasedConfig& cfg = agent.config();
  const int n = static_cast<int>(batch.size());
  const int sd = agent.model().config().state_dim;
  const int zd = agent.model().config().skill_dim;
  Matrix s(n, sd), z(n, zd), s_next(n, sd), r(n, 1), boot(n, 1);
  for (int i = 0; i < n; ++i) {
    const HLTransition& t = batch[static_cast<std::size_t>(i)];
    s.row(i) = t.s.transpose();
    z.row(i) = t.z.transpose();
    s_next.row(i) = t.s_next.transpose();
    r(i, 0) = t.reward;
    boot(i, 0) = t.done ? 0.0 : std::pow(cfg.gamma, t.k);
  }
  const Matrix h = agent.latent(s);
  const Matrix h_next = agent.latent(s_next);
  Tape scratch;
  const Matrix q_next = agent
                            .value(scratch, agent.target_params(), scratch.constant_ref(h_next),
                                   scratch.constant(agent.prior_skill(s_next)))
                            .value();
  const Matrix y = r + boot.cwiseProduct(q_next);

  const Var hv = tape.constant(h);
  const Var zv = tape.constant(z);
  const Var latent_term = ad::mean(ad::row_sum(ad::square(agent.dynamics(tape, hv, zv) - tape.constant(h_next))));
  const Var reward_term = ad::mean(ad::square(agent.reward(tape, hv, zv) - tape.constant(r)));
  const Var value_term = ad::mean(ad::square(agent.value(tape, agent.params(), hv, zv) - tape.constant(y)));
  ModelBasedGraph g;
  g.total = ad::scale(latent_term, cfg.lambda_latent) + ad::scale(reward_term, cfg.lambda_reward) +
            ad::scale(value_term, cfg.lambda_value);
  g.values.latent = latent_term.scalar();
  g.values.reward = reward_term.scalar();
  g.values.value = value_term.scalar();
  g.values.total = g.total.scalar();
  return g;
}

ModelBasedLosses model_based_update(ModelBasedAgent& agent, const std::vector<HLTransition>& batch) {
  Tape tape;
  const ModelBasedGraph g = model_based_graph(tape, agent, batch);
  if (!std::isfinite(g.values.total)) throw TrainingError("model_based_update: non-finite loss");
  adam_step(agent.optimizer(), agent.params(), backprop(tape, g.total, agent.params()), agent.config().learning_rate);
  soft_update(agent.target_params(), agent.params(), agent.config().tau);
  return g.values;
}

}  // namespace dcsl
