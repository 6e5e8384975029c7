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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/downstream/trainer.hpp"
#include "dcsl/envs/collector.hpp"
#include "dcsl/envs/point_maze.hpp"
#include "dcsl/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dcsl {
namespace {

using testing::tiny_config;

// x' = x + 0.1 clip(a); never reaches its goal.
class LineEnv : public Environment {
 public:
  explicit LineEnv(int cap = 100) {
    spec_.name = "line";
    spec_.state_dim = 1;
    spec_.action_dim = 1;
    spec_.termination_features = {0};
    spec_.distance_threshold = 0.01;
    spec_.max_episode_steps = cap;
  }
  const EnvSpec& spec() const override { return spec_; }
  State reset(std::uint64_t) const override { return State::Zero(1); }
  StepResult step(const State& s, const Vector& a) const override {
    StepResult r;
    r.next_state = s;
    r.next_state[0] += 0.1 * clip_action(a)[0];
    r.reward = 1.0;
    return r;
  }
  bool goal_reached(const State&) const override { return false; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<LineEnv>(*this); }

 private:
  EnvSpec spec_;
};

std::string last_bias(const MlpSpec& spec) { return spec.name + "/b" + std::to_string(spec.layers() - 1); }

// Decoder emits the constant action tanh(mean); predicted target is `target`.
SkillModel scripted_model(double action_mean, double target) {
  SkillModel m(tiny_config(1, 1, 2), 7);
  ParamTree& p = m.mutable_params();
  for (const char* prefix : {"pi/", "O/"}) {
    for (std::size_t i : p.leaves_with_prefix(prefix)) p.mut(i).setZero();
  }
  Matrix b = Matrix::Zero(1, 2);
  b(0, 0) = action_mean;
  p.set(last_bias(m.pi_spec()), b);
  p.set(last_bias(m.observe_spec()), Matrix::Constant(1, 1, target));
  return m;
}

HLTransition run_line(const SkillModel& m, double threshold, int cap = 100) {
  LineEnv env(cap);
  EpisodeSession session(env, 0);
  ExecutionConfig cfg;
  cfg.threshold = threshold;
  Vector z = Vector::Zero(2);
  return execute_skill(session, m, z, cfg);
}

TEST(ExecuteSkill, TargetAtStartStopsAfterOneStep) {
  const HLTransition t = run_line(scripted_model(0.0, 0.0), 0.01);
  EXPECT_EQ(t.k, 1);
  EXPECT_FALSE(t.done);
}

TEST(ExecuteSkill, UnreachableTargetRunsMaxSteps) {
  const HLTransition t = run_line(scripted_model(20.0, -5.0), 0.01);
  EXPECT_EQ(t.k, 30);
  EXPECT_NEAR(t.s_next[0], 3.0, 1e-9);
}

TEST(ExecuteSkill, StopsAtFirstStepWithinThreshold) {
  const SkillModel m = scripted_model(20.0, 0.45);
  for (double thr : {0.06, 0.2, 0.31}) {
    const int expected = static_cast<int>(std::ceil((0.45 - thr) / 0.1 - 1e-9));
    EXPECT_EQ(run_line(m, thr).k, expected) << thr;
  }
}

TEST(ExecuteSkill, DiscountedRewardAndEpisodeEnd) {
  const HLTransition t = run_line(scripted_model(20.0, -5.0), 0.01, 10);
  EXPECT_EQ(t.k, 10);
  EXPECT_TRUE(t.done);
  EXPECT_NEAR(t.reward, (1.0 - std::pow(0.99, 10)) / 0.01, 1e-9);
}

TEST(ExecuteSkill, LengthAlwaysWithinBounds) {
  auto env = make_env("gripper");
  SkillModel m(tiny_config(6, 3, 2), 11);
  Rng rng(12);
  ExecutionConfig cfg;
  for (int e = 0; e < 10; ++e) {
    EpisodeSession session(*env, static_cast<std::uint64_t>(e));
    while (!session.done()) {
      const int before = session.steps();
      const HLTransition t = execute_skill(session, m, random_skill_selector(2)(session.state(), rng), cfg);
      ASSERT_GE(t.k, 1);
      ASSERT_LE(t.k, cfg.max_steps);
      ASSERT_EQ(session.steps() - before, t.k);
    }
  }
}

TEST(ExecuteSkill, FinishedEpisodeIsRejected) {
  LineEnv env(1);
  EpisodeSession session(env, 0);
  session.step(Vector::Zero(1));
  const SkillModel m = scripted_model(0.0, 0.0);
  EXPECT_THROW(execute_skill(session, m, Vector::Zero(2), ExecutionConfig{}), PreconditionError);
}

SacConfig small_sac() {
  SacConfig c;
  c.hidden = 16;
  c.layers = 2;
  c.batch_size = 8;
  return c;
}

std::vector<HLTransition> fixed_batch(int n, int state_dim, int skill_dim, double reward, bool done, int k,
                                      std::uint64_t seed, bool self_loop = false) {
  Rng rng(seed);
  std::vector<HLTransition> out;
  const State s = standard_normal_matrix(rng, state_dim, 1);
  for (int i = 0; i < n; ++i) {
    HLTransition t;
    t.s = s;
    t.z = standard_normal_matrix(rng, skill_dim, 1).array().tanh().matrix();
    t.reward = reward;
    t.k = k;
    t.done = done;
    t.s_next = self_loop ? s : State(standard_normal_matrix(rng, state_dim, 1));
    out.push_back(t);
  }
  return out;
}

TEST(Sac, PolicyInitialisedFromPriorHasZeroKl) {
  const SkillModel m(tiny_config(3, 2, 2), 20);
  const HLPolicy policy(m, small_sac(), 21);
  Rng rng(22);
  const Matrix states = standard_normal_matrix(rng, 6, 3);
  EXPECT_LT(policy_prior_kl(policy, m, states).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sac, ZeroCriticsAndZeroRewardGiveZeroCriticLoss) {
  const SkillModel m(tiny_config(3, 2, 2), 23);
  SacConfig cfg = small_sac();
  cfg.alpha_kl = 0.0;
  HLPolicy policy(m, cfg, 24);
  for (ParamTree* tree : {&policy.critic_params(), &policy.target_params()}) {
    for (std::size_t i = 0; i < tree->size(); ++i) tree->mut(i).setZero();
  }
  Rng rng(25);
  const SacLosses l = sac_update(policy, fixed_batch(8, 3, 2, 0.0, false, 5, 26), m, rng);
  EXPECT_EQ(l.critic, 0.0);
  EXPECT_EQ(l.actor, 0.0);
}

TEST(Sac, TerminalTransitionsRegressToReward) {
  const SkillModel m(tiny_config(3, 2, 2), 27);
  SacConfig cfg = small_sac();
  cfg.critic_lr = 3e-3;
  HLPolicy policy(m, cfg, 28);
  const auto batch = fixed_batch(16, 3, 2, 0.7, true, 4, 29);
  Rng rng(30);
  for (int i = 0; i < 1500; ++i) sac_update(policy, batch, m, rng);
  Matrix s(16, 3), z(16, 2);
  for (int i = 0; i < 16; ++i) {
    s.row(i) = batch[static_cast<std::size_t>(i)].s.transpose();
    z.row(i) = batch[static_cast<std::size_t>(i)].z.transpose();
  }
  EXPECT_NEAR(policy.q_value(s, z).mean(), 0.7, 0.02);
}

TEST(Sac, SelfLoopConvergesToGeometricSum) {
  const SkillModel m(tiny_config(3, 2, 2), 31);
  SacConfig cfg = small_sac();
  cfg.alpha_kl = 0.0;
  cfg.gamma = 0.9;
  cfg.tau = 0.05;
  cfg.critic_lr = 3e-3;
  HLPolicy policy(m, cfg, 32);
  const auto batch = fixed_batch(32, 3, 2, 1.0, false, 3, 33, true);
  Rng rng(34);
  for (int i = 0; i < 4000; ++i) sac_update(policy, batch, m, rng);
  const double expected = 1.0 / (1.0 - std::pow(0.9, 3));
  Matrix s(32, 3), z(32, 2);
  for (int i = 0; i < 32; ++i) {
    s.row(i) = batch[static_cast<std::size_t>(i)].s.transpose();
    z.row(i) = batch[static_cast<std::size_t>(i)].z.transpose();
  }
  EXPECT_NEAR(policy.q_value(s, z).mean(), expected, 0.05 * expected);
}

TEST(Sac, SoftUpdateInterpolatesExactly) {
  ParamTree target, online;
  target.add("a", Matrix::Constant(2, 2, 1.0));
  online.add("a", Matrix::Constant(2, 2, 5.0));
  soft_update(target, online, 0.25);
  EXPECT_EQ(target.at("a"), Matrix::Constant(2, 2, 2.0));
  soft_update(target, online, 1.0);
  EXPECT_EQ(target.at("a"), online.at("a"));
  soft_update(target, online, 0.0);
  EXPECT_EQ(target.at("a"), online.at("a"));
}

TEST(Sac, NonFiniteRewardAborts) {
  const SkillModel m(tiny_config(3, 2, 2), 35);
  HLPolicy policy(m, small_sac(), 36);
  auto batch = fixed_batch(4, 3, 2, 0.0, false, 2, 37);
  batch[1].reward = std::numeric_limits<double>::quiet_NaN();
  Rng rng(38);
  EXPECT_THROW(sac_update(policy, batch, m, rng), TrainingError);
}

TEST(Sac, DeterministicActionIsPriorMode) {
  const SkillModel m(tiny_config(3, 2, 2), 39);
  const HLPolicy policy(m, small_sac(), 40);
  Rng rng(41);
  const State s = standard_normal_matrix(rng, 3, 1);
  const Vector a = policy.act(s, rng, true);
  const Vector expected = m.skill_prior(s).mean.array().tanh().matrix();
  EXPECT_LT((a - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(policy.act(s, rng, false).cwiseAbs().maxCoeff(), 1.0);
}

TEST(Sac, CheckpointRoundTrip) {
  const SkillModel m(tiny_config(3, 2, 2), 42);
  const HLPolicy policy(m, small_sac(), 43);
  const auto dir = testing::temp_dir("hlpolicy");
  policy.save(dir / "policy");
  const HLPolicy loaded = HLPolicy::load(dir / "policy");
  Rng rng(44);
  const Matrix s = standard_normal_matrix(rng, 5, 3);
  const Matrix z = standard_normal_matrix(rng, 5, 2).array().tanh().matrix();
  EXPECT_LT((policy.q_value(s, z) - loaded.q_value(s, z)).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_LT((policy.q_value(s, z, true) - loaded.q_value(s, z, true)).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_TRUE(policy.actor_params().same_structure(loaded.actor_params()));
  EXPECT_THROW(load_checkpoint(dir / "policy", "mb-agent"), FormatError);
}

TEST(ReplayBuffer, RingOverwritesOldest) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    HLTransition t;
    t.k = i + 1;
    buf.push(t);
  }
  EXPECT_EQ(buf.size(), 3u);
  Rng rng(1);
  for (const auto& t : buf.sample(50, rng)) EXPECT_GE(t.k, 3);
}

TEST(Cem, SingleSampleSingleEliteReturnsThatSample) {
  CEMConfig cfg;
  cfg.horizon = 2;
  cfg.population = 1;
  cfg.elites = 1;
  cfg.iterations = 1;
  Matrix seen;
  Rng rng(3);
  const CemResult r = cem_optimize(
      [&](const Matrix& pop) {
        seen = pop;
        return Vector::Zero(pop.rows());
      },
      2, cfg, rng);
  ASSERT_EQ(seen.rows(), 1);
  Matrix row_major(1, 4);
  for (int k = 0; k < 2; ++k) row_major.block(0, 2 * k, 1, 2) = r.mean.row(k);
  EXPECT_LT((row_major - seen).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cem, ConstantScoreKeepsMeanNearInitial) {
  CEMConfig cfg;
  cfg.horizon = 1;
  Rng rng(4);
  const CemResult r = cem_optimize([](const Matrix& pop) { return Vector::Zero(pop.rows()); }, 3, cfg, rng);
  // Five refits of 12 elites: per-coordinate drift has std at most 0.5 sqrt(5 / 12).
  EXPECT_LT(r.mean.cwiseAbs().maxCoeff(), 3.0 * 0.5 * std::sqrt(5.0 / 12.0));
}

TEST(Cem, FindsQuadraticMaximum) {
  CEMConfig cfg;
  cfg.horizon = 1;
  cfg.iterations = 8;
  Vector c(2);
  c << 0.3, -0.2;
  Rng rng(5);
  const CemResult r = cem_optimize(
      [&](const Matrix& pop) { return Vector(-(pop.rowwise() - c.transpose()).rowwise().squaredNorm()); }, 2, cfg,
      rng, Matrix::Constant(1, 2, -0.8));
  EXPECT_LT((r.mean.row(0).transpose() - c).cwiseAbs().maxCoeff(), 0.05);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_GE(r.elite_mean[i], r.elite_mean[i - 1]);
  EXPECT_GT(r.elite_mean.back(), r.elite_mean.front());
}

TEST(Cem, ProposalsStayInsideOpenBox) {
  CEMConfig cfg;
  cfg.init_std = 5.0;
  Rng rng(6);
  double worst = 0.0;
  cem_optimize(
      [&](const Matrix& pop) {
        worst = std::max(worst, pop.cwiseAbs().maxCoeff());
        return Vector(pop.rowwise().sum());
      },
      2, cfg, rng);
  EXPECT_LT(worst, 1.0);
}

ModelBasedConfig small_mb() {
  ModelBasedConfig c;
  c.hidden = 5;
  c.batch_size = 4;
  return c;
}

TEST(ModelBased, LatentOnlyLossIsLatentMse) {
  const SkillModel m(tiny_config(3, 2, 2), 50);
  ModelBasedConfig cfg = small_mb();
  cfg.lambda_reward = cfg.lambda_value = 0.0;
  const ModelBasedAgent agent(m, cfg, 51);
  const auto batch = fixed_batch(5, 3, 2, 0.3, false, 4, 52);
  Tape tape;
  const ModelBasedGraph g = model_based_graph(tape, agent, batch);
  double expected = 0.0;
  for (const auto& t : batch) {
    const Vector h_next = m.state_latent(t.s_next);
    expected += (m.predict_target_latent(t.s, t.z) - h_next).squaredNorm();
  }
  expected /= static_cast<double>(batch.size());
  EXPECT_NEAR(g.values.total, expected, 1e-10);
  EXPECT_NEAR(g.values.latent, expected, 1e-10);
}

TEST(ModelBased, ZeroHeadsOnTerminalZeroRewardGiveZeroTerms) {
  const SkillModel m(tiny_config(3, 2, 2), 53);
  ModelBasedAgent agent(m, small_mb(), 54);
  for (ParamTree* tree : {&agent.params(), &agent.target_params()}) {
    for (std::size_t i : tree->leaves_with_prefix("R/")) tree->mut(i).setZero();
    for (std::size_t i : tree->leaves_with_prefix("Q/")) tree->mut(i).setZero();
  }
  const auto batch = fixed_batch(4, 3, 2, 0.0, true, 3, 55);
  Tape tape;
  const ModelBasedGraph g = model_based_graph(tape, agent, batch);
  EXPECT_EQ(g.values.reward, 0.0);
  EXPECT_EQ(g.values.value, 0.0);
  EXPECT_DOUBLE_EQ(g.values.total, g.values.latent);
}

TEST(ModelBased, GradientMatchesFiniteDifferences) {
  const SkillModel m(tiny_config(3, 2, 2), 56);
  ModelBasedAgent agent(m, small_mb(), 57);
  ASSERT_LE(agent.params().parameter_count(), 1000u);
  const auto batch = fixed_batch(4, 3, 2, 0.5, false, 3, 58);
  Tape tape;
  const ParamTree grads = backprop(tape, model_based_graph(tape, agent, batch).total, agent.params());
  const auto r = testing::finite_difference_check(agent.params(), grads, [&] {
    Tape t;
    return model_based_graph(t, agent, batch).total.scalar();
  });
  EXPECT_TRUE(r.ok) << r.first_failure;
  EXPECT_GT(r.checked, 50u);
}

TEST(ModelBased, UpdateReducesLossOnFixedBatch) {
  const SkillModel m(tiny_config(3, 2, 2), 59);
  ModelBasedConfig cfg = small_mb();
  cfg.learning_rate = 1e-2;
  ModelBasedAgent agent(m, cfg, 60);
  const auto batch = fixed_batch(8, 3, 2, 0.5, true, 3, 61);
  const double first = model_based_update(agent, batch).total;
  double last = first;
  for (int i = 0; i < 300; ++i) last = model_based_update(agent, batch).total;
  EXPECT_LT(last, 0.1 * first);
}

TEST(ModelBased, PlanIsDeterministicForFixedRng) {
  const SkillModel m(tiny_config(3, 2, 2), 62);
  const ModelBasedAgent agent(m, small_mb(), 63);
  CEMConfig cem;
  cem.population = 16;
  cem.elites = 4;
  Rng a(64), b(64);
  const State s = State::Constant(3, 0.1);
  EXPECT_EQ(agent.plan(s, cem, a), agent.plan(s, cem, b));
}

TEST(Evaluate, RandomSkillsRarelySucceedOnLargeMaze) {
  auto env = make_env("pointmaze-large");
  SkillModelConfig mc = tiny_config(4, 2, 5);
  const SkillModel m(mc, 70);
  SkillController ctl(m, random_skill_selector(5), ExecutionConfig{});
  const EvalResult r = evaluate(ctl, *env, 20, 71);
  EXPECT_LE(r.success_rate, 0.1);
  EXPECT_EQ(r.episodes.size(), 20u);
}

TEST(Evaluate, ScriptedExpertSolvesMediumMaze) {
  auto env = make_env("pointmaze-medium");
  const auto& maze = dynamic_cast<const PointMazeEnv&>(*env);
  ScriptedController ctl(
      [&](const State& s) { return expert_action(PolicyKind::kNavigator, *env, s, maze.goal_cell()); });
  const EvalResult r = evaluate(ctl, *env, 5, 72);
  EXPECT_EQ(r.success_rate, 1.0);
  EXPECT_LT(r.mean_timesteps, env->spec().max_episode_steps);
  EXPECT_EQ(r.episodes[0].decisions, 1);
}

TEST(Evaluate, DeterministicJson) {
  auto env = make_env("gripper");
  const SkillModel m(tiny_config(6, 3, 2), 73);
  SkillController a(m, random_skill_selector(2), ExecutionConfig{});
  SkillController b(m, random_skill_selector(2), ExecutionConfig{});
  EXPECT_EQ(evaluate(a, *env, 3, 74).to_json().dump(), evaluate(b, *env, 3, 74).to_json().dump());
}

TEST(Evaluate, FailedEpisodesCountTheCap) {
  LineEnv env(12);
  const SkillModel m = scripted_model(20.0, -5.0);
  SkillController ctl(m, random_skill_selector(2), ExecutionConfig{});
  const EvalResult r = evaluate(ctl, env, 2, 75);
  EXPECT_EQ(r.success_rate, 0.0);
  EXPECT_EQ(r.mean_timesteps, 12.0);
  EXPECT_EQ(r.episodes[0].decisions, 1);
}

TEST(Trainer, SacRunIsDeterministicAndLogsEveryEpisode) {
  auto env = make_env("gripper");
  const SkillModel m(tiny_config(6, 3, 2), 80);
  DownstreamConfig cfg;
  cfg.episodes = 6;
  cfg.warmup_episodes = 2;
  cfg.sac = small_sac();
  HLPolicy p1(m, cfg.sac, 81), p2(m, cfg.sac, 81);
  int calls = 0;
  const auto r1 = train_sac(p1, m, *env, cfg, 82, [&](const CurveRow&) { ++calls; });
  const auto r2 = train_sac(p2, m, *env, cfg, 82);
  ASSERT_EQ(r1.size(), 6u);
  EXPECT_EQ(calls, 6);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    EXPECT_EQ(r1[i].episode, static_cast<int>(i));
    EXPECT_EQ(r1[i].episode_return, r2[i].episode_return);
    EXPECT_EQ(r1[i].critic_loss, r2[i].critic_loss);
  }
  EXPECT_EQ(r1[0].critic_loss, 0.0);
  EXPECT_NE(r1[5].critic_loss, 0.0);
  EXPECT_TRUE(p1.actor_params() == p2.actor_params());
}

TEST(Trainer, CemRunProducesRows) {
  auto env = make_env("gripper");
  const SkillModel m(tiny_config(6, 3, 2), 83);
  DownstreamConfig cfg;
  cfg.episodes = 3;
  cfg.warmup_episodes = 1;
  cfg.cem.population = 8;
  cfg.cem.elites = 2;
  cfg.cem.iterations = 2;
  cfg.model_based = small_mb();
  ModelBasedAgent agent(m, cfg.model_based, 84);
  const auto rows = train_cem(agent, *env, cfg, 85);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GT(rows[2].critic_loss + rows[2].actor_loss, 0.0);
}

TEST(Trainer, FinalMetricsUseTrailingWindow) {
  std::vector<CurveRow> rows(4);
  rows[0].success = true;
  rows[0].steps = 10;
  rows[2].success = true;
  rows[2].steps = 40;
  rows[3].success = true;
  rows[3].steps = 60;
  EXPECT_DOUBLE_EQ(final_success(rows, 3), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(final_timesteps(rows, 3, 200), (200.0 + 40.0 + 60.0) / 3.0);
  EXPECT_DOUBLE_EQ(final_success(rows, 100), 0.75);
}

TEST(Trainer, CurveCsvRoundTrip) {
  std::vector<CurveRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].episode = i;
    rows[static_cast<std::size_t>(i)].episode_return = 0.5 * i;
    rows[static_cast<std::size_t>(i)].success = i == 2;
    rows[static_cast<std::size_t>(i)].steps = 10 * i;
    rows[static_cast<std::size_t>(i)].kl = 0.25;
  }
  const auto dir = testing::temp_dir("curve");
  write_curve_csv(dir / "curve.csv", rows);
  const auto back = read_curve_csv(dir / "curve.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].success, true);
  EXPECT_EQ(back[2].steps, 20);
  EXPECT_EQ(back[1].episode_return, 0.5);
  EXPECT_EQ(back[0].kl, 0.25);
  EXPECT_THROW(read_curve_csv(dir / "missing.csv"), FileError);
}

TEST(Config, JsonRoundTrips) {
  SacConfig s;
  s.alpha_kl = 0.01;
  EXPECT_EQ(SacConfig::from_json(s.to_json()).to_json(), s.to_json());
  CEMConfig c;
  c.population = 64;
  EXPECT_EQ(CEMConfig::from_json(c.to_json()).to_json(), c.to_json());
  ModelBasedConfig mb;
  mb.skill_steps = 7;
  EXPECT_EQ(ModelBasedConfig::from_json(mb.to_json()).to_json(), mb.to_json());
  s.gamma = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
}

}  // namespace
}  // namespace dcsl
