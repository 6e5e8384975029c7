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

#include <benchmark/benchmark.h>

#include "dcsl/diffcore/nn.hpp"
#include "dcsl/diffcore/tape.hpp"
#include "dcsl/downstream/cem.hpp"
#include "dcsl/envs/collector.hpp"
#include "dcsl/relabel/relabel.hpp"
#include "dcsl/skillmodel/training.hpp"

namespace {

using namespace dcsl;

SkillModelConfig desk_model(const Environment& env) {
  SkillModelConfig c;
  c.state_dim = env.spec().state_dim;
  c.action_dim = env.spec().action_dim;
  c.skill_dim = 2;
  c.hidden = 64;
  c.sim_hidden = 64;
  c.lstm_hidden = 32;
  c.latent_dim = 32;
  return c;
}

TrajectoryDataset replay_data(const Environment& env, int episodes) {
  return generate_dataset(env, default_policy("gripper"), episodes, NoiseProfile::for_tier(parse_tier("replay")), 0,
                          nullptr, 100);
}

void BM_MlpForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Rng rng(1);
  ParamTree params;
  const MlpSpec spec = make_mlp_spec("net", 16, 128, 3, 8, Activation::kElu);
  init_mlp(params, spec, rng);
  const Matrix x = standard_normal_matrix(rng, batch, 16);
  for (auto _ : state) {
    Tape tape;
    const Var out = mlp_apply(tape, params, spec, tape.constant_ref(x));
    benchmark::DoNotOptimize(backprop(tape, ad::sum(ad::square(out)), params));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256);

void BM_MlpEval(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Rng rng(2);
  ParamTree params;
  const MlpSpec spec = make_mlp_spec("net", 16, 128, 3, 8, Activation::kElu);
  init_mlp(params, spec, rng);
  const Matrix x = standard_normal_matrix(rng, batch, 16);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_eval(params, spec, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpEval)->Arg(1)->Arg(256);

void BM_SkillTrainStep(benchmark::State& state) {
  const auto env = make_env("gripper");
  TrajectoryDataset ds = replay_data(*env, 50);
  SkillModel model(desk_model(*env), 3);
  TrainConfig cfg;
  cfg.batch_size = static_cast<int>(state.range(0));
  cfg.relabel = false;
  Rng rng(4);
  long step = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, ds, cfg, step++, rng));
}
BENCHMARK(BM_SkillTrainStep)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RelabelPass(benchmark::State& state) {
  const auto env = make_env("gripper");
  const TrajectoryDataset source = replay_data(*env, static_cast<int>(state.range(0)));
  const SkillModel model(desk_model(*env), 5);
  long starts = 0;
  for (auto _ : state) {
    state.PauseTiming();
    TrajectoryDataset ds = source;
    state.ResumeTiming();
    starts += relabel_dataset(model, ds, RelabelConfig{}).relabeled;
  }
  state.SetItemsProcessed(starts);
}
BENCHMARK(BM_RelabelPass)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_EnvStep(benchmark::State& state, const char* name) {
  const auto env = make_env(name);
  State s = env->reset(0);
  Vector a = Vector::Constant(env->spec().action_dim, 0.3);
  for (auto _ : state) {
    const StepResult r = env->step(s, a);
    s = r.goal_reached ? env->reset(1) : r.next_state;
    a = -a;
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK_CAPTURE(BM_EnvStep, maze, "pointmaze-medium");
BENCHMARK_CAPTURE(BM_EnvStep, gripper, "gripper");

void BM_CemPlan(benchmark::State& state) {
  const auto env = make_env("gripper");
  const SkillModel model(desk_model(*env), 6);
  ModelBasedConfig mb;
  const ModelBasedAgent agent(model, mb, 7);
  CEMConfig cem;
  cem.population = static_cast<int>(state.range(0));
  const State s = env->reset(0);
  Rng rng(8);
  for (auto _ : state) benchmark::DoNotOptimize(agent.plan(s, cem, rng));
}
BENCHMARK(BM_CemPlan)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
