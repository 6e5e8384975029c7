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

#include "dcsl/envs/collector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dcsl/envs/gripper.hpp"
#include "dcsl/error.hpp"

namespace dcsl {
namespace {

constexpr double kNavKp = 3.0;
constexpr double kNavKd = 1.2;
constexpr double kReachTol = 0.03;
constexpr int kMinEpisodeSteps = 5;

const PointMazeEnv& as_maze(const Environment& env) {
  const auto* maze = dynamic_cast<const PointMazeEnv*>(&env);
  if (!maze) throw ConfigError("navigator policy requires a point-maze environment");
  return *maze;
}

// Planar move toward (x, y) at full speed, saturating near the target.
void move_toward(Vector& a, const State& s, double x, double y, double scale) {
  a[0] = std::clamp((x - s[0]) / scale, -1.0, 1.0);
  a[1] = std::clamp((y - s[1]) / scale, -1.0, 1.0);
}

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

PolicyKind default_policy(const std::string& env_name) {
  if (env_name.rfind("pointmaze", 0) == 0) return PolicyKind::kNavigator;
  if (env_name == "gripper") return PolicyKind::kPickPlace;
  if (env_name == "kitchen") return PolicyKind::kStations;
  throw ConfigError("no scripted policy for environment '" + env_name + "'");
}

PolicyKind parse_policy(const std::string& s) {
  if (s == "navigator") return PolicyKind::kNavigator;
  if (s == "pick-place") return PolicyKind::kPickPlace;
  if (s == "stations") return PolicyKind::kStations;
  throw ConfigError("unknown policy '" + s + "'");
}

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kNavigator: return "navigator";
    case PolicyKind::kPickPlace: return "pick-place";
    case PolicyKind::kStations: return "stations";
  }
  return "navigator";
}

TierKind parse_tier(const std::string& s) {
  if (s == "expert") return TierKind::kExpert;
  if (s == "mixed") return TierKind::kMixed;
  if (s == "replay") return TierKind::kReplay;
  throw ConfigError("unknown dataset tier '" + s + "'");
}

std::string to_string(TierKind k) {
  switch (k) {
    case TierKind::kExpert: return "expert";
    case TierKind::kMixed: return "mixed";
    case TierKind::kReplay: return "replay";
  }
  return "expert";
}

NoiseProfile NoiseProfile::expert() {
  NoiseProfile p;
  p.kind = TierKind::kExpert;
  p.segment_prob = 0.0;
  return p;
}

NoiseProfile NoiseProfile::mixed() {
  NoiseProfile p;
  p.kind = TierKind::kMixed;
  return p;
}

NoiseProfile NoiseProfile::replay() {
  NoiseProfile p;
  p.kind = TierKind::kReplay;
  return p;
}

NoiseProfile NoiseProfile::for_tier(TierKind kind) {
  switch (kind) {
    case TierKind::kExpert: return expert();
    case TierKind::kMixed: return mixed();
    case TierKind::kReplay: return replay();
  }
  return expert();
}

void NoiseProfile::validate() const {
  if (!(action_std >= 0.0)) throw ConfigError("noise: action_std must be >= 0");
  if (!(segment_prob >= 0.0 && segment_prob <= 1.0)) throw ConfigError("noise: segment_prob outside [0, 1]");
  if (segment_min < 1 || segment_max < segment_min) throw ConfigError("noise: bad segment length range");
}

Vector expert_action(PolicyKind kind, const Environment& env, const State& s, const Cell& goal) {
  Vector a = Vector::Zero(env.spec().action_dim);
  switch (kind) {
    case PolicyKind::kNavigator: {
      const PointMazeEnv& maze = as_maze(env);
      const Cell here = maze.cell_of(s[0], s[1]);
      const Cell next = maze.next_cell_toward(here, goal).value_or(here);
      const Vector wp = maze.cell_center(next);
      for (int i = 0; i < 2; ++i) a[i] = std::clamp(kNavKp * (wp[i] - s[i]) - kNavKd * s[2 + i], -1.0, 1.0);
      break;
    }
    case PolicyKind::kPickPlace: {
      const bool holding = s[5] > 0.5;
      if (holding) {
        move_toward(a, s, GripperEnv::kTargetX, GripperEnv::kTargetY, GripperEnv::kMoveScale);
        a[2] = 1.0;
      } else {
        move_toward(a, s, s[3], s[4], GripperEnv::kMoveScale);
        const bool over = std::hypot(s[3] - s[0], s[4] - s[1]) <= kReachTol;
        a[2] = (over && s[2] <= 0.5) ? 1.0 : -1.0;
        if (over && s[2] > 0.5 && s[2] < 1.0) a[2] = 1.0;
      }
      break;
    }
    case PolicyKind::kStations: {
      throw PreconditionError("station controller needs a visiting order; use NoisyController");
    }
  }
  return a;
}

NoisyController::NoisyController(PolicyKind kind, const Environment& env, NoiseProfile noise, std::uint64_t seed)
    : kind_(kind), env_(&env), noise_(noise), rng_(seed) {
  noise_.validate();
  if (kind_ == PolicyKind::kNavigator) goal_ = as_maze(env).goal_cell();
}

Vector NoisyController::expert(const State& s) const {
  if (kind_ != PolicyKind::kStations) return expert_action(kind_, *env_, s, goal_);
  Vector a = Vector::Zero(env_->spec().action_dim);
  int next = -1;
  for (int i : order_) {
    if (s[3 + i] < 0.5) {
      next = i;
      break;
    }
  }
  if (next < 0) return a;
  const auto site = KitchenEnv::station(next);
  move_toward(a, s, site[0], site[1], KitchenEnv::kMoveScale);
  const bool over = std::hypot(site[0] - s[0], site[1] - s[1]) <= kReachTol;
  a[2] = over ? 1.0 : -1.0;
  return a;
}

Vector NoisyController::act(const State& s) {
  if (noise_.segment_prob > 0.0 && segment_left_ <= 0) {
    segment_left_ = uniform_int(rng_, noise_.segment_min, noise_.segment_max);
    random_segment_ = uniform(rng_, 0.0, 1.0) < noise_.segment_prob;
  }
  --segment_left_;
  const int d = env_->spec().action_dim;
  if (random_segment_) {
    Vector a(d);
    for (int i = 0; i < d; ++i) a[i] = uniform(rng_, -1.0, 1.0);
    return a;
  }
  Vector a = expert(s);
  if (noise_.action_std > 0.0) {
    for (int i = 0; i < d; ++i) a[i] += noise_.action_std * standard_normal(rng_);
  }
  return clip_action(a);
}

Vector scripted_action(PolicyKind kind, const Environment& env, const State& state, const NoiseProfile& noise,
                       std::uint64_t seed) {
  NoisyController c(kind, env, noise, seed);
  return c.act(state);
}

TrajectoryDataset generate_dataset(const Environment& env, PolicyKind kind, int episodes,
                                   const NoiseProfile& noise, std::uint64_t seed, GenerationSummary* summary,
                                   int horizon) {
  if (episodes < 1) throw ConfigError("generate_dataset: episodes must be >= 1");
  if (horizon < 0) throw ConfigError("generate_dataset: horizon must be >= 0");
  noise.validate();
  const EnvSpec& spec = env.spec();
  TrajectoryDataset ds;
  ds.state_dim = spec.state_dim;
  ds.action_dim = spec.action_dim;
  ds.provenance.env = spec.name;
  ds.provenance.tier = to_string(noise.kind);
  ds.provenance.policy = to_string(kind);
  ds.provenance.seed = seed;
  ds.provenance.generator_version = DCSL_VERSION;

  GenerationSummary sum;
  for (int ep = 0; ep < episodes; ++ep) {
    const std::uint64_t ep_seed = mix_seed(seed, static_cast<std::uint64_t>(ep));
    Rng rng(mix_seed(ep_seed, 1));
    NoiseProfile profile = noise;
    if (noise.kind == TierKind::kMixed) profile = (ep % 2 == 0) ? NoiseProfile::expert() : NoiseProfile::replay();
    NoisyController ctl(kind, env, profile, mix_seed(ep_seed, 2));

    State s = env.reset(ep_seed);
    std::function<bool(const State&)> done = [&env](const State& x) { return env.goal_reached(x); };
    if (kind == PolicyKind::kNavigator) {
      const PointMazeEnv& maze = as_maze(env);
      const auto cells = maze.free_cells();
      Cell from = cells[uniform_index(rng, cells.size())];
      Cell to = from;
      while (maze.path_length(from, to) < 2) to = cells[uniform_index(rng, cells.size())];
      s = maze.state_at(from);
      ctl.set_goal(to);
      const Vector centre = maze.cell_center(to);
      done = [centre](const State& x) { return (x.head(2) - centre).norm() <= PointMazeEnv::kGoalRadius; };
    } else if (kind == PolicyKind::kStations) {
      std::array<int, 4> order{0, 1, 2, 3};
      std::shuffle(order.begin(), order.end(), rng);
      ctl.set_station_order(order);
    }

    std::vector<Vector> states, actions;
    bool reached = false;
    const int cap = horizon > 0 ? horizon : spec.max_episode_steps;
    for (int t = 0; t < cap; ++t) {
      Vector a = ctl.act(s);
      for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = round_f32(s[i]);
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = round_f32(a[i]);
      states.push_back(s);
      actions.push_back(a);
      s = env.step(s, a).next_state;
      if (done(s)) {
        reached = true;
        break;
      }
    }
    if (static_cast<int>(states.size()) < kMinEpisodeSteps) {
      ++sum.dropped;
      continue;
    }
    Trajectory tr;
    const auto n = static_cast<Eigen::Index>(states.size());
    tr.states.resize(n, spec.state_dim);
    tr.actions.resize(n, spec.action_dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      tr.states.row(i) = states[static_cast<std::size_t>(i)].transpose();
      tr.actions.row(i) = actions[static_cast<std::size_t>(i)].transpose();
    }
    tr.skill_length.assign(static_cast<std::size_t>(n), kInitialSkillLength);
    tr.reached_goal = reached;
    sum.steps += n;
    ds.episodes.push_back(std::move(tr));
  }
  if (ds.episodes.empty()) throw DatasetError("generate_dataset: no usable episodes");
  sum.episodes = static_cast<int>(ds.episodes.size());
  sum.goal_fraction = ds.goal_fraction();
  if (summary) *summary = sum;
  return ds;
}

}  // namespace dcsl
