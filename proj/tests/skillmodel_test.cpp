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
#include <numbers>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/envs/collector.hpp"
#include "dcsl/skillmodel/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dcsl {
namespace {

using testing::tiny_config;

TrajectoryDataset random_dataset(int episodes, int len, int state_dim, int action_dim, std::uint64_t seed) {
  Rng rng(seed);
  TrajectoryDataset ds;
  ds.state_dim = state_dim;
  ds.action_dim = action_dim;
  for (int e = 0; e < episodes; ++e) {
    Trajectory tr;
    tr.states = standard_normal_matrix(rng, len, state_dim);
    tr.actions = (0.5 * standard_normal_matrix(rng, len, action_dim)).array().tanh().matrix();
    tr.skill_length.assign(static_cast<std::size_t>(len), 10);
    ds.episodes.push_back(std::move(tr));
  }
  return ds;
}

SkillBatch tiny_batch(const TrajectoryDataset& ds, int size, std::uint64_t seed, int skill_dim = 2) {
  WindowSampler sampler(ds);
  Rng rng(seed);
  return sample_batch(ds, sampler, size, skill_dim, rng);
}

void zero_prefix(ParamTree& p, const std::string& prefix) {
  for (std::size_t i : p.leaves_with_prefix(prefix)) p.mut(i).setZero();
}

TEST(SkillModel, EncoderDeterministic) {
  SkillModel m(tiny_config(), 1);
  Rng rng(2);
  const Matrix keys = standard_normal_matrix(rng, 4, 3);
  const DiagGaussian a = m.encode_skill(keys);
  const DiagGaussian b = m.encode_skill(keys);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.log_std, b.log_std);
}

TEST(SkillModel, EncoderIsOrderSensitive) {
  SkillModel m(tiny_config(), 3);
  Rng rng(4);
  const Matrix keys = standard_normal_matrix(rng, 4, 3);
  Matrix swapped = keys;
  swapped.row(1).swap(swapped.row(2));
  EXPECT_GT((m.encode_skill(keys).mean - m.encode_skill(swapped).mean).norm(), 1e-6);
}

TEST(SkillModel, ZeroEncoderGivesBias) {
  for (EncoderKind kind : {EncoderKind::kRecurrent, EncoderKind::kMlp}) {
    SkillModelConfig cfg = tiny_config();
    cfg.encoder = kind;
    SkillModel m(cfg, 5);
    const std::string head = kind == EncoderKind::kRecurrent ? "q_head/" : "q_mlp/";
    zero_prefix(m.mutable_params(), kind == EncoderKind::kRecurrent ? "q_" : "q_mlp/");
    const std::string bias = head + (kind == EncoderKind::kRecurrent ? "b0" : "b1");
    Matrix b(1, 4);
    b << 0.3, -0.2, -1.0, 0.5;
    m.mutable_params().set(bias, b);
    Rng rng(6);
    for (int trial = 0; trial < 3; ++trial) {
      const DiagGaussian d = m.encode_skill(standard_normal_matrix(rng, 4, 3));
      EXPECT_NEAR(d.mean[0], 0.3, 1e-15);
      EXPECT_NEAR(d.mean[1], -0.2, 1e-15);
      EXPECT_NEAR(d.log_std[0], -1.0, 1e-15);
    }
  }
}

TEST(SkillModel, EncoderRejectsWrongArity) {
  SkillModel m(tiny_config(), 1);
  EXPECT_THROW(m.encode_skill(Matrix::Zero(3, 3)), PreconditionError);
  EXPECT_THROW(m.encode_skill(Matrix::Zero(4, 2)), PreconditionError);
}

TEST(SkillModel, DecoderDeterministicAndModeIsMaximum) {
  SkillModel m(tiny_config(3, 1, 2), 7);
  Vector s(3), z(2);
  s << 0.1, -0.4, 0.9;
  z << 0.2, -0.7;
  const TanhGaussian a = m.decode_action(s, z);
  const TanhGaussian b = m.decode_action(s, z);
  EXPECT_EQ(a.base.mean, b.base.mean);
  EXPECT_EQ(a.base.log_std, b.base.log_std);
  // Interior maximiser of the squashed density, located by a fine sweep and
  // compared with the 1-D stationary condition of log N(u) + log|du/dx|.
  double best = -1e300, best_x = 0.0;
  for (int i = 1; i < 20000; ++i) {
    Vector x(1);
    x[0] = -1.0 + i / 10000.0;
    const double lp = a.log_prob(x);
    ASSERT_TRUE(std::isfinite(lp));
    if (lp > best) {
      best = lp;
      best_x = x[0];
    }
  }
  Vector xm(1);
  xm[0] = best_x;
  for (double d : {-1e-3, 1e-3}) {
    Vector x = xm;
    x[0] += d;
    EXPECT_LE(a.log_prob(x), a.log_prob(xm) + 1e-12);
  }
}

TEST(SkillModel, SimilarityOrthogonalIsZero) {
  SkillModelConfig cfg = tiny_config();
  SkillModel m(cfg, 8);
  // phi's last layer writes only coordinate 0, psi's only coordinate 1.
  ParamTree& p = m.mutable_params();
  Matrix wphi = p.at("phi/w1"), wpsi = p.at("psi/w1");
  wphi.rightCols(2).setZero();
  wpsi.col(0).setZero();
  wpsi.col(2).setZero();
  p.set("phi/w1", wphi);
  p.set("psi/w1", wpsi);
  Matrix zero_b = Matrix::Zero(1, 3);
  Matrix b0 = zero_b, b1 = zero_b;
  b0(0, 0) = 0.4;
  b1(0, 1) = -0.3;
  p.set("phi/b1", b0);
  p.set("psi/b1", b1);
  Rng rng(9);
  const Vector s = standard_normal_matrix(rng, 3, 1).col(0);
  const Vector sp = standard_normal_matrix(rng, 3, 1).col(0);
  Vector z(2);
  z << 0.3, 0.1;
  const double f = m.similarity(s, z, sp);
  EXPECT_EQ(f, 0.0);
  EXPECT_EQ(1.0 / (1.0 + std::exp(-f)), 0.5);
}

TEST(SkillModel, SimilarityIsBilinearInPhiHead) {
  SkillModel m(tiny_config(), 10);
  Rng rng(11);
  const Vector s = standard_normal_matrix(rng, 3, 1).col(0);
  const Vector sp = standard_normal_matrix(rng, 3, 1).col(0);
  Vector z(2);
  z << -0.5, 0.25;
  const double f = m.similarity(s, z, sp);
  const double c = -2.5;
  m.mutable_params().set("phi/w1", c * m.params().at("phi/w1"));
  m.mutable_params().set("phi/b1", c * m.params().at("phi/b1"));
  EXPECT_NEAR(m.similarity(s, z, sp), c * f, 1e-12 * std::max(1.0, std::abs(f)));
}

TEST(Losses, KlIdentityGivesZeroEmbedding) {
  SkillModel m(tiny_config(), 12);
  zero_prefix(m.mutable_params(), "q_");
  const TrajectoryDataset ds = random_dataset(3, 20, 3, 2, 13);
  TrainConfig cfg;
  cfg.lambda_bc = 0.0;
  cfg.lambda_sp = 0.0;
  EXPECT_EQ(embedding_loss(m, tiny_batch(ds, 6, 14), cfg), 0.0);
}

TEST(Losses, SkillPriorTermSendsNoGradientToEncoder) {
  SkillModel m(tiny_config(), 15);
  const TrajectoryDataset ds = random_dataset(3, 25, 3, 2, 16);
  const SkillBatch batch = tiny_batch(ds, 5, 17);
  TrainConfig cfg;
  cfg.lambda_bc = cfg.lambda_cl = cfg.lambda_re = cfg.lambda_st = cfg.beta = 0.0;
  cfg.lambda_sp = 1.0;
  auto grads_for = [&](const SkillModel& model) {
    Tape tape;
    const LossGraph g = build_losses(tape, model, batch, cfg);
    return std::make_pair(g.values.skill_prior, backprop(tape, g.total, model.params()));
  };
  const auto [kl_a, ga] = grads_for(m);
  for (std::size_t i : ga.leaves_with_prefix("q_")) EXPECT_EQ(ga.at(i).norm(), 0.0) << ga.names()[i];
  double prior_norm = 0.0;
  for (std::size_t i : ga.leaves_with_prefix("prior/")) prior_norm += ga.at(i).norm();
  EXPECT_GT(prior_norm, 0.0);
  // Perturbing only the prior changes the value but not the encoder gradient.
  SkillModel perturbed = m;
  for (std::size_t i : perturbed.params().leaves_with_prefix("prior/")) perturbed.mutable_params().mut(i).array() += 0.1;
  const auto [kl_b, gb] = grads_for(perturbed);
  EXPECT_NE(kl_a, kl_b);
  for (std::size_t i : gb.leaves_with_prefix("q_")) EXPECT_EQ(gb.at(i).norm(), 0.0);
}

TEST(Losses, ContrastiveAtZeroSimilarityIsTwoLog2) {
  SkillModel m(tiny_config(), 18);
  zero_prefix(m.mutable_params(), "phi/w1");
  zero_prefix(m.mutable_params(), "phi/b1");
  const TrajectoryDataset ds = random_dataset(3, 20, 3, 2, 19);
  TrainConfig cfg;
  cfg.lambda_cl = 1.7;
  EXPECT_NEAR(contrastive_loss(m, tiny_batch(ds, 7, 20), cfg), 1.7 * 2.0 * std::numbers::ln2, 1e-14);
}

TEST(Losses, ContrastiveOptimumLimitIsZero) {
  Vector pos = Vector::Constant(4, 60.0), neg = Vector::Constant(4, -60.0);
  EXPECT_LT(contrastive_from_scores(pos, neg, 1.0), 1e-25);
  EXPECT_NEAR(contrastive_from_scores(Vector::Zero(3), Vector::Zero(3), 1.0), 2.0 * std::numbers::ln2, 1e-15);
  for (double f : {-5.0, 0.0, 3.0}) EXPECT_GE(contrastive_from_scores(Vector::Constant(1, f), Vector::Constant(1, f), 1.0), 0.0);
}

TEST(Losses, TargetZeroForConstructedPerfectPredictor) {
  SkillModel m(tiny_config(), 21);
  // Every window starts at the same state and ends at the same successor.
  TrajectoryDataset ds;
  ds.state_dim = 3;
  ds.action_dim = 2;
  Vector s0(3), s1(3);
  s0 << 0.2, -0.1, 0.5;
  s1 << -0.3, 0.4, 0.1;
  for (int e = 0; e < 3; ++e) {
    Trajectory tr;
    tr.states.resize(11, 3);
    for (int i = 0; i < 11; ++i) tr.states.row(i) = (i == 0 ? s0 : s1).transpose();
    tr.actions = Matrix::Zero(11, 2);
    tr.skill_length.assign(11, 10);
    tr.skill_length[0] = 10;
    for (int i = 1; i < 11; ++i) tr.skill_length[static_cast<std::size_t>(i)] = 20;
    ds.episodes.push_back(std::move(tr));
  }
  const SkillBatch batch = tiny_batch(ds, 4, 22);
  ParamTree& p = m.mutable_params();
  zero_prefix(p, "O/");
  zero_prefix(p, "T/");
  p.set("O/b1", s0.transpose());
  p.set("T/b1", m.state_latent(s1).transpose());
  TrainConfig cfg;
  EXPECT_NEAR(target_loss(m, batch, cfg), 0.0, 1e-28);
}

TEST(Losses, TargetWithoutLatentTermIsReconstruction) {
  SkillModel m(tiny_config(), 23);
  const TrajectoryDataset ds = random_dataset(4, 30, 3, 2, 24);
  const SkillBatch batch = tiny_batch(ds, 6, 25);
  TrainConfig cfg;
  cfg.lambda_st = 0.0;
  cfg.lambda_re = 1.3;
  double expected = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    const Vector s = batch.keys[0].row(i).transpose();
    Tape tape;
    const Matrix recon = m.observe(tape, m.state_latent(tape, tape.constant(s.transpose()))).value();
    expected += (recon.row(0).transpose() - s).squaredNorm();
  }
  expected *= 1.3 / batch.size();
  EXPECT_NEAR(target_loss(m, batch, cfg), expected, 1e-12);
}

TEST(Losses, TotalIsSumOfParts) {
  SkillModel m(tiny_config(), 26);
  const TrajectoryDataset ds = random_dataset(4, 30, 3, 2, 27);
  Tape tape;
  const LossGraph g = build_losses(tape, m, tiny_batch(ds, 8, 28), TrainConfig{});
  EXPECT_NEAR(g.values.total, g.values.embedding + g.values.contrastive + g.values.target, 1e-12);
  const TrainConfig cfg;
  EXPECT_NEAR(g.values.embedding,
              cfg.lambda_bc * g.values.bc + cfg.beta * g.values.kl_prior + cfg.lambda_sp * g.values.skill_prior, 1e-12);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, LossTermMatchesFiniteDifferences) {
  const int which = GetParam();
  SkillModelConfig mc = tiny_config();
  mc.decoder = which == 4 ? DecoderKind::kOpenLoop : DecoderKind::kClosedLoop;
  mc.encoder = which == 5 ? EncoderKind::kMlp : EncoderKind::kRecurrent;
  SkillModel m(mc, 30 + static_cast<std::uint64_t>(which));
  ASSERT_LE(m.params().parameter_count(), 1000u);
  const TrajectoryDataset ds = random_dataset(3, 24, 3, 2, 40);
  const SkillBatch batch = tiny_batch(ds, 3, 41);
  TrainConfig cfg;
  cfg.beta = 0.3;
  // The skill-prior term detaches q, which finite differences cannot see.
  cfg.lambda_sp = 0.0;
  auto pick = [which](const LossGraph& g) {
    switch (which) {
      case 0: return g.embedding;
      case 1: return g.contrastive;
      case 2: return g.target;
      default: return g.total;
    }
  };
  Tape tape;
  const ParamTree grads = backprop(tape, pick(build_losses(tape, m, batch, cfg)), m.params());
  const auto r = testing::finite_difference_check(m.mutable_params(), grads, [&] {
    Tape t;
    return pick(build_losses(t, m, batch, cfg)).scalar();
  });
  EXPECT_TRUE(r.ok) << r.first_failure;
  EXPECT_GT(r.checked, 100u);
}

INSTANTIATE_TEST_SUITE_P(AllTerms, GradientCheck, ::testing::Values(0, 1, 2, 3, 4, 5));

TEST(GradientCheck, SkillPriorLeavesMatch) {
  SkillModel m(tiny_config(), 45);
  const TrajectoryDataset ds = random_dataset(3, 24, 3, 2, 46);
  const SkillBatch batch = tiny_batch(ds, 3, 47);
  const TrainConfig cfg;
  Tape tape;
  const ParamTree grads = backprop(tape, build_losses(tape, m, batch, cfg).total, m.params());
  const auto r = testing::finite_difference_check(
      m.mutable_params(), grads,
      [&] {
        Tape t;
        return build_losses(t, m, batch, cfg).total.scalar();
      },
      1e-4, 1e-6, 1e-5, "prior/");
  EXPECT_TRUE(r.ok) << r.first_failure;
  EXPECT_GT(r.checked, 10u);
}

TEST(GradientCheck, FrozenTargetEncoderStillMatches) {
  SkillModel m(tiny_config(), 50);
  const TrajectoryDataset ds = random_dataset(3, 24, 3, 2, 51);
  const SkillBatch batch = tiny_batch(ds, 3, 52);
  TrainConfig cfg;
  cfg.freeze_target_encoder = true;
  cfg.lambda_re = 0.0;
  cfg.lambda_bc = cfg.lambda_sp = cfg.lambda_cl = cfg.beta = 0.0;
  Tape tape;
  const ParamTree grads = backprop(tape, build_losses(tape, m, batch, cfg).total, m.params());
  // With E frozen on the successor, d/dE only flows through E(s_t); the full
  // finite difference includes both paths, so they must differ.
  const auto r = testing::finite_difference_check(
      m.mutable_params(), grads,
      [&] {
        Tape t;
        return build_losses(t, m, batch, cfg).total.scalar();
      },
      1e-4, 1e-6, 1e-5, "T/");
  EXPECT_TRUE(r.ok) << r.first_failure;
}

TEST(TrainStep, ZeroWeightsLeaveParametersUnchanged) {
  SkillModel m(tiny_config(), 60);
  TrajectoryDataset ds = random_dataset(3, 30, 3, 2, 61);
  TrainConfig cfg;
  cfg.lambda_bc = cfg.lambda_sp = cfg.lambda_cl = cfg.lambda_re = cfg.lambda_st = cfg.beta = 0.0;
  cfg.batch_size = 4;
  const ParamTree before = m.params();
  Rng rng(62);
  for (long step = 1; step <= 3; ++step) train_step(m, ds, cfg, step, rng);
  EXPECT_TRUE(m.params() == before);
}

TEST(TrainStep, LossDecreasesOnExpertData) {
  auto env = make_env("gripper");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrajectoryDataset ds = generate_dataset(*env, PolicyKind::kPickPlace, 10, NoiseProfile::expert(), seed);
    SkillModelConfig mc;
    mc.state_dim = 6;
    mc.action_dim = 3;
    mc.skill_dim = 2;
    mc.hidden = 32;
    mc.sim_hidden = 32;
    mc.lstm_hidden = 32;
    mc.latent_dim = 16;
    SkillModel m(mc, seed);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_steps = 500;
    cfg.learning_rate = 1e-3;
    SkillTrainer trainer(m, ds, cfg, seed);
    trainer.run();
    const auto& h = trainer.history();
    ASSERT_EQ(h.size(), 500u);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 25; ++i) {
      early += h[static_cast<std::size_t>(i)].total;
      late += h[h.size() - 1 - static_cast<std::size_t>(i)].total;
    }
    EXPECT_LT(late, early) << "seed " << seed;
  }
}

TEST(TrainStep, RelabelBoundaryChangesLengths) {
  // Constructed so similarity stays positive along every episode: psi is a
  // positive constant and phi a positive constant.
  SkillModel m(tiny_config(), 70);
  ParamTree& p = m.mutable_params();
  zero_prefix(p, "phi/w1");
  zero_prefix(p, "psi/w1");
  p.set("phi/b1", Matrix::Constant(1, 3, 1.0));
  p.set("psi/b1", Matrix::Constant(1, 3, 1.0));
  TrajectoryDataset ds = random_dataset(2, 60, 3, 2, 71);
  TrainConfig cfg;
  cfg.lambda_bc = cfg.lambda_sp = cfg.lambda_cl = cfg.lambda_re = cfg.lambda_st = cfg.beta = 0.0;
  cfg.batch_size = 4;
  cfg.relabel_interval = 3;
  Rng rng(72);
  EXPECT_FALSE(train_step(m, ds, cfg, 1, rng).relabel.has_value());
  EXPECT_FALSE(train_step(m, ds, cfg, 2, rng).relabel.has_value());
  for (const auto& ep : ds.episodes) {
    for (int h : ep.skill_length) EXPECT_EQ(h, 10);
  }
  const StepOutcome out = train_step(m, ds, cfg, 3, rng);
  ASSERT_TRUE(out.relabel.has_value());
  EXPECT_GT(out.relabel->mean, 10.0);
  EXPECT_EQ(ds.episodes[0].skill_length[0], 30);
}

TEST(Trainer, NonFiniteLossAbortsWithLastFinite) {
  SkillModel m(tiny_config(), 80);
  TrajectoryDataset ds = random_dataset(3, 30, 3, 2, 81);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 10;
  SkillTrainer trainer(m, ds, cfg, 82);
  trainer.step();
  const LossBreakdown first = trainer.history().back();
  ds.episodes[1].states(3, 1) = std::numeric_limits<double>::quiet_NaN();
  for (auto& ep : ds.episodes) ep.states(5, 0) = std::numeric_limits<double>::infinity();
  try {
    for (int i = 0; i < 9; ++i) trainer.step();
    FAIL() << "expected NumericAbort";
  } catch (const NumericAbort& e) {
    EXPECT_TRUE(std::isfinite(e.last_finite.total));
    (void)first;
  }
}

TEST(TargetPredictor, DeterministicAndZeroWeightGivesBias) {
  SkillModel m(tiny_config(), 90);
  Vector s(3), z(2);
  s << 0.5, 0.1, -0.2;
  z << 0.3, 0.3;
  EXPECT_EQ(m.predict_target_latent(s, z), m.predict_target_latent(s, z));
  zero_prefix(m.mutable_params(), "T/");
  Matrix b(1, 3);
  b << 0.7, -0.1, 0.2;
  m.mutable_params().set("T/b1", b);
  EXPECT_EQ(m.predict_target_latent(s, z), b.row(0).transpose());
}

TEST(TargetPredictor, HeldOutErrorWithinTwiceTraining) {
  auto env = make_env("gripper");
  TrajectoryDataset all = generate_dataset(*env, PolicyKind::kPickPlace, 24, NoiseProfile::expert(), 5);
  TrajectoryDataset train = all, held = all;
  train.episodes.assign(all.episodes.begin(), all.episodes.begin() + 18);
  held.episodes.assign(all.episodes.begin() + 18, all.episodes.end());
  SkillModelConfig mc;
  mc.state_dim = 6;
  mc.action_dim = 3;
  mc.skill_dim = 2;
  mc.hidden = 32;
  mc.sim_hidden = 32;
  mc.lstm_hidden = 32;
  mc.latent_dim = 16;
  SkillModel m(mc, 5);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_steps = 600;
  cfg.learning_rate = 1e-3;
  cfg.relabel = false;
  SkillTrainer(m, train, cfg, 6).run();
  auto error = [&](const TrajectoryDataset& ds) {
    WindowSampler sampler(ds);
    Rng rng(7);
    double sum = 0.0;
    constexpr int kN = 400;
    for (int i = 0; i < kN; ++i) {
      const SkillWindow w = sampler.sample(rng);
      const Trajectory& ep = ds.episodes[static_cast<std::size_t>(w.episode)];
      Matrix keys(4, 6);
      for (int j = 0; j < 4; ++j) keys.row(j) = ep.states.row(w.keys[static_cast<std::size_t>(j)]);
      const Vector z = m.encode_skill(keys).mean.array().tanh().matrix();
      const Vector s = ep.states.row(w.start).transpose();
      const Vector succ = ep.states.row(std::min(w.end(), ep.length() - 1)).transpose();
      sum += (m.predict_target_latent(s, z) - m.state_latent(succ)).norm();
    }
    return sum / kN;
  };
  const double train_err = error(train);
  const double held_err = error(held);
  EXPECT_LE(held_err, 2.0 * train_err) << "train " << train_err << " held " << held_err;
}

TEST(Checkpoint, SkillModelRoundTrip) {
  SkillModel m(tiny_config(), 100);
  const auto dir = testing::temp_dir("skill_ckpt");
  m.save(dir / "model", {{"step", 5}});
  const SkillModel back = SkillModel::load(dir / "model");
  ASSERT_TRUE(back.params().same_structure(m.params()));
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const Matrix expected = m.params().at(i).cast<float>().cast<double>();
    EXPECT_EQ(back.params().at(i), expected);
  }
  EXPECT_THROW(load_checkpoint(dir / "model", "policy"), FormatError);
}

TEST(DensityRatio, RecoversOptimalDiscriminator) {
  const auto r = testing::run_density_toy(3, 4000, 3e-3);
  EXPECT_LT(r.max_abs_error, 0.05) << "sigma\n" << r.sigma << "\noptimal\n" << r.optimal;
}

}  // namespace
}  // namespace dcsl
