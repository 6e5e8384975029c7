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

#include <fstream>
#include <limits>
#include <sstream>

#include "dcsl/diffcore/tensor.hpp"
#include "dcsl/error.hpp"
#include "dcsl/relabel/relabel.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dcsl {
namespace {

TrajectoryDataset flat_dataset(int episodes, int len) {
  TrajectoryDataset ds;
  ds.state_dim = 3;
  ds.action_dim = 2;
  Rng rng(1);
  for (int e = 0; e < episodes; ++e) {
    Trajectory tr;
    tr.states = standard_normal_matrix(rng, len, 3);
    tr.actions = Matrix::Zero(len, 2);
    tr.skill_length.assign(static_cast<std::size_t>(len), kInitialSkillLength);
    ds.episodes.push_back(std::move(tr));
  }
  return ds;
}

std::vector<Matrix> constant_tables(const TrajectoryDataset& ds, double value) {
  std::vector<Matrix> out;
  for (const auto& ep : ds.episodes) out.push_back(Matrix::Constant(ep.length(), ep.length(), value));
  return out;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(RelabelLength, AllNegativeGivesMinimum) {
  const std::vector<double> f(99, -1.0);
  EXPECT_EQ(relabel_length(f, 100, RelabelConfig{}), 4);
}

TEST(RelabelLength, AllPositiveGivesMaximum) {
  const std::vector<double> f(99, 1.0);
  EXPECT_EQ(relabel_length(f, 100, RelabelConfig{}), 30);
}

TEST(RelabelLength, StopsAtFirstMiss) {
  std::vector<double> f(99, 0.5);
  f[7] = -0.1;
  EXPECT_EQ(relabel_length(f, 100, RelabelConfig{}), 8);
  // The largest-offset variant keeps scanning past the miss.
  RelabelConfig set_max;
  set_max.set_max = true;
  f.assign(99, -1.0);
  for (int k = 0; k < 7; ++k) f[static_cast<std::size_t>(k)] = 0.5;
  f[12] = 0.5;
  EXPECT_EQ(relabel_length(f, 100, RelabelConfig{}), 8);
  EXPECT_EQ(relabel_length(f, 100, set_max), 14);
}

TEST(RelabelLength, ClampedByEpisodeEnd) {
  const std::vector<double> f(5, 1.0);
  EXPECT_EQ(relabel_length(f, 6, RelabelConfig{}), 6);
  EXPECT_EQ(relabel_length(std::vector<double>(3, 1.0), 4, RelabelConfig{}), 4);
}

TEST(RelabelLength, DegenerateBoundsAreFixpoint) {
  RelabelConfig cfg;
  cfg.delta_min = cfg.delta_max = 10;
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f(60);
    for (double& v : f) v = standard_normal(rng);
    EXPECT_EQ(relabel_length(f, 61, cfg), 10);
  }
  TrajectoryDataset ds = flat_dataset(3, 40);
  const TrajectoryDataset before = ds;
  relabel_with_tables(constant_tables(ds, 1.0), ds, cfg);
  EXPECT_TRUE(ds == before);
}

TEST(RelabelLength, InfiniteThresholdGivesMinimum) {
  RelabelConfig cfg;
  cfg.epsilon = std::numeric_limits<double>::infinity();
  EXPECT_EQ(relabel_length(std::vector<double>(50, 1e300), 51, cfg), cfg.delta_min);
}

TEST(RelabelLength, MonotoneInThreshold) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> f(40);
    for (double& v : f) v = standard_normal(rng) + 0.8;
    RelabelConfig lo, hi;
    lo.epsilon = uniform(rng, -1.0, 1.0);
    hi.epsilon = lo.epsilon + uniform(rng, 0.0, 1.0);
    EXPECT_GE(relabel_length(f, 41, lo), relabel_length(f, 41, hi));
  }
}

TEST(RelabelLength, BoundsHoldOverManyDraws) {
  Rng rng(4);
  for (int trial = 0; trial < 100000; ++trial) {
    RelabelConfig cfg;
    cfg.delta_min = uniform_int(rng, 4, 12);
    cfg.delta_max = uniform_int(rng, cfg.delta_min, 40);
    cfg.epsilon = uniform(rng, -0.5, 0.5);
    const int remaining = uniform_int(rng, cfg.delta_min, 60);
    std::vector<double> f(static_cast<std::size_t>(remaining - 1));
    for (double& v : f) v = standard_normal(rng) + 0.5;
    const int h = relabel_length(f, remaining, cfg);
    ASSERT_GE(h, cfg.delta_min);
    ASSERT_LE(h, std::min(cfg.delta_max, remaining));
  }
}

TEST(RelabelLength, DependsOnlyOnScannedPrefix) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> f(50);
    for (double& v : f) v = standard_normal(rng) + 1.0;
    const int h = relabel_length(f, 51, RelabelConfig{});
    std::vector<double> g = f;
    for (std::size_t k = static_cast<std::size_t>(h); k < g.size(); ++k) g[k] = standard_normal(rng);
    // Entries at or past offset h-1 matter only when the scan might have
    // continued; change the ones strictly beyond the deciding entry.
    if (h < 30) g[static_cast<std::size_t>(h - 1)] = f[static_cast<std::size_t>(h - 1)];
    EXPECT_EQ(relabel_length(g, 51, RelabelConfig{}), h);
  }
}

TEST(RelabelKeys, EvenlySpaced) {
  EXPECT_EQ(relabel_key_states(5, 10), (std::array<int, 4>{5, 8, 11, 14}));
  EXPECT_EQ(relabel_key_states(0, 4), (std::array<int, 4>{0, 1, 2, 3}));
  EXPECT_THROW(relabel_key_states(0, 3), PreconditionError);
}

TEST(RelabelDataset, ChangeBoundedAndTailUntouched) {
  TrajectoryDataset ds = flat_dataset(4, 50);
  const TrajectoryDataset before = ds;
  SkillModel model(testing::tiny_config(), 6);
  const RelabelConfig cfg;
  const RelabelReport rep = relabel_dataset(model, ds, cfg, 1);
  EXPECT_EQ(rep.pass, 1);
  EXPECT_EQ(rep.relabeled, 4 * (50 - cfg.delta_min + 1));
  for (std::size_t e = 0; e < ds.size(); ++e) {
    const auto& ep = ds.episodes[e];
    for (int t = 0; t < ep.length(); ++t) {
      const int h = ep.skill_length[static_cast<std::size_t>(t)];
      if (ep.length() - t < cfg.delta_min) {
        EXPECT_EQ(h, before.episodes[e].skill_length[static_cast<std::size_t>(t)]);
      } else {
        EXPECT_GE(h, cfg.delta_min);
        EXPECT_LE(h, std::min(cfg.delta_max, ep.length() - t));
        EXPECT_LE(std::abs(h - kInitialSkillLength), cfg.delta_max - cfg.delta_min);
      }
    }
  }
  EXPECT_LE(rep.mean_abs_change, cfg.delta_max - cfg.delta_min);
  long total = 0;
  for (long c : rep.new_histogram) total += c;
  EXPECT_EQ(total, rep.relabeled);
  EXPECT_NEAR(rep.frac_at_min + rep.frac_at_max + rep.frac_interior, 1.0, 1e-12);
}

TEST(RelabelDataset, TablesMatchPerStartComputation) {
  TrajectoryDataset ds = flat_dataset(2, 35);
  SkillModel model(testing::tiny_config(), 7);
  RelabelConfig cfg;
  cfg.epsilon = -0.05;
  std::vector<int> expected;
  for (const auto& ep : ds.episodes) {
    for (int t = 0; t < ep.length(); ++t) {
      if (relabel_eligible(ep, t, cfg)) expected.push_back(relabel_one(model, ep, t, cfg));
    }
  }
  relabel_dataset(model, ds, cfg);
  std::size_t i = 0;
  for (const auto& ep : ds.episodes) {
    for (int t = 0; t < ep.length() - cfg.delta_min + 1; ++t) {
      EXPECT_EQ(ep.skill_length[static_cast<std::size_t>(t)], expected[i++]);
    }
  }
  EXPECT_EQ(i, expected.size());
}

TEST(RelabelDataset, ConstantTablesGiveExtremes) {
  TrajectoryDataset ds = flat_dataset(2, 60);
  RelabelReport rep = relabel_with_tables(constant_tables(ds, 1.0), ds, RelabelConfig{});
  EXPECT_EQ(ds.episodes[0].skill_length[0], 30);
  EXPECT_EQ(ds.episodes[0].skill_length[50], 10);
  EXPECT_EQ(rep.max, 30);
  rep = relabel_with_tables(constant_tables(ds, -1.0), ds, RelabelConfig{});
  EXPECT_EQ(rep.min, 4);
  EXPECT_EQ(rep.max, 4);
  EXPECT_DOUBLE_EQ(rep.frac_at_min, 1.0);
  EXPECT_DOUBLE_EQ(rep.median, 4.0);
}

TEST(RelabelDataset, RejectsBadConfig) {
  TrajectoryDataset ds = flat_dataset(1, 20);
  RelabelConfig cfg;
  cfg.delta_min = 3;
  EXPECT_THROW(relabel_with_tables(constant_tables(ds, 0.0), ds, cfg), ConfigError);
  cfg.delta_min = 12;
  cfg.delta_max = 8;
  EXPECT_THROW(relabel_with_tables(constant_tables(ds, 0.0), ds, cfg), ConfigError);
  EXPECT_THROW(relabel_with_tables(std::vector<Matrix>{}, ds, RelabelConfig{}), PreconditionError);
}

TEST(RelabelCsv, WritesSummaryAndHistogram) {
  TrajectoryDataset ds = flat_dataset(2, 40);
  const RelabelReport rep = relabel_with_tables(constant_tables(ds, 1.0), ds, RelabelConfig{}, 2);
  const auto dir = testing::temp_dir("relabel_csv");
  write_relabel_csv(dir / "relabel.csv", std::vector<RelabelReport>{rep});
  write_length_histogram_csv(dir / "hist.csv", rep);
  const std::string summary = read_all(dir / "relabel.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')),
            "pass,relabeled,mean,median,min,max,frac_at_min,frac_at_max,frac_interior,mean_abs_change");
  EXPECT_NE(summary.find("\n2,74,"), std::string::npos);
  const std::string hist = read_all(dir / "hist.csv");
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "length,old_count,new_count");
  EXPECT_NE(hist.find("\n10,74,"), std::string::npos);
}

}  // namespace
}  // namespace dcsl
