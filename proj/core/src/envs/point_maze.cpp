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

#include "dcsl/envs/point_maze.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "dcsl/error.hpp"

namespace dcsl {
namespace {

// '#' wall, '.' free. Row 0 is y in [0, 1).
const char* const kMedium[] = {
    "########",
    "#..##..#",
    "#..#...#",
    "##...###",
    "#..#...#",
    "#.#..#.#",
    "#...#..#",
    "########",
};

const char* const kLarge[] = {
    "############",
    "#....#.....#",
    "#.##.#.#.#.#",
    "#......#...#",
    "#.####.###.#",
    "#..#.#.....#",
    "##.#.#.#.###",
    "#..#...#...#",
    "############",
};

// Keeps a clamped coordinate strictly inside the free cell.
constexpr double kFaceMargin = 1e-6;

}  // namespace

PointMazeEnv::PointMazeEnv(Layout layout) {
  const bool medium = layout == Layout::kMedium;
  const auto& rows = medium ? kMedium : kLarge;
  const int n = medium ? 8 : 9;
  for (int r = 0; r < n; ++r) {
    std::vector<bool> row;
    for (const char* c = rows[r]; *c; ++c) row.push_back(*c == '#');
    walls_.push_back(std::move(row));
  }
  start_ = {1, 1};
  goal_ = medium ? Cell{6, 6} : Cell{7, 9};
  spec_.name = medium ? "pointmaze-medium" : "pointmaze-large";
  spec_.state_dim = 4;
  spec_.action_dim = 2;
  spec_.termination_features = {0, 1};
  spec_.distance_threshold = 0.5;
  spec_.max_episode_steps = medium ? 300 : 500;
  spec_.validate();
}

bool PointMazeEnv::is_wall(int row, int col) const {
  if (row < 0 || col < 0 || row >= rows() || col >= cols()) return true;
  return walls_[row][col];
}

std::vector<Cell> PointMazeEnv::free_cells() const {
  std::vector<Cell> out;
  for (int r = 0; r < rows(); ++r) {
    for (int c = 0; c < cols(); ++c) {
      if (!walls_[r][c]) out.push_back({r, c});
    }
  }
  return out;
}

Cell PointMazeEnv::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor(y)), static_cast<int>(std::floor(x))};
}

Vector PointMazeEnv::cell_center(const Cell& c) const {
  Vector v(2);
  v << c.col + 0.5, c.row + 0.5;
  return v;
}

State PointMazeEnv::state_at(const Cell& c) const {
  if (is_wall(c.row, c.col)) throw PreconditionError("state_at: wall cell");
  State s = State::Zero(4);
  s.head(2) = cell_center(c);
  return s;
}

State PointMazeEnv::reset(std::uint64_t /*seed*/) const { return state_at(start_); }

std::unique_ptr<Environment> PointMazeEnv::clone() const {
  return std::make_unique<PointMazeEnv>(*this);
}

bool PointMazeEnv::goal_reached(const State& state) const {
  return (state.head(2) - cell_center(goal_)).norm() <= kGoalRadius;
}

StepResult PointMazeEnv::step(const State& state, const Vector& action) const {
  StepResult r;
  const Vector a = clip_action(action, &r.clipped);
  double vx = std::clamp(kDamping * state[2] + kAccel * a[0], -kMaxSpeed, kMaxSpeed);
  double vy = std::clamp(kDamping * state[3] + kAccel * a[1], -kMaxSpeed, kMaxSpeed);
  double x = state[0];
  double y = state[1];

  // Axis-separated moves; entering a wall cell stops at its face.
  const int row = static_cast<int>(std::floor(y));
  double nx = x + kDt * vx;
  const int ncol = static_cast<int>(std::floor(nx));
  const int col = static_cast<int>(std::floor(x));
  if (ncol != col && is_wall(row, ncol)) {
    nx = ncol > col ? ncol - kFaceMargin : col + kFaceMargin;
    vx = 0.0;
  }
  x = nx;
  const int xcol = static_cast<int>(std::floor(x));
  double ny = y + kDt * vy;
  const int nrow = static_cast<int>(std::floor(ny));
  if (nrow != row && is_wall(nrow, xcol)) {
    ny = nrow > row ? nrow - kFaceMargin : row + kFaceMargin;
    vy = 0.0;
  }
  y = ny;

  r.next_state = State(4);
  r.next_state << x, y, vx, vy;
  r.goal_reached = goal_reached(r.next_state);
  r.reward = (r.goal_reached && !goal_reached(state)) ? 1.0 : 0.0;
  return r;
}

std::optional<Cell> PointMazeEnv::next_cell_toward(const Cell& from, const Cell& to) const {
  if (from == to) return from;
  if (is_wall(from.row, from.col) || is_wall(to.row, to.col)) return std::nullopt;
  // BFS from the destination so the first step is read off the parent map.
  std::vector<int> dist(static_cast<std::size_t>(rows() * cols()), -1);
  auto idx = [&](const Cell& c) { return static_cast<std::size_t>(c.row * cols() + c.col); };
  std::deque<Cell> queue{to};
  dist[idx(to)] = 0;
  const int dr[] = {-1, 1, 0, 0};
  const int dc[] = {0, 0, -1, 1};
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      Cell n{c.row + dr[k], c.col + dc[k]};
      if (is_wall(n.row, n.col) || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      queue.push_back(n);
    }
  }
  if (dist[idx(from)] < 0) return std::nullopt;
  for (int k = 0; k < 4; ++k) {
    Cell n{from.row + dr[k], from.col + dc[k]};
    if (!is_wall(n.row, n.col) && dist[idx(n)] == dist[idx(from)] - 1) return n;
  }
  return std::nullopt;
}

int PointMazeEnv::path_length(const Cell& from, const Cell& to) const {
  int steps = 0;
  Cell c = from;
  while (!(c == to)) {
    auto n = next_cell_toward(c, to);
    if (!n) return -1;
    c = *n;
    ++steps;
  }
  return steps;
}

}  // namespace dcsl
