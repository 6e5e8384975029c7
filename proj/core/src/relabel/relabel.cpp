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

#include "dcsl/relabel/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"

namespace dcsl {

void RelabelConfig::validate() const {
  if (delta_min < 4) throw ConfigError("relabel: delta_min must be >= 4");
  if (delta_max < delta_min) throw ConfigError("relabel: delta_min must not exceed delta_max");
  if (std::isnan(epsilon)) throw ConfigError("relabel: epsilon is NaN");
}

int relabel_length(std::span<const double> f, int remaining, const RelabelConfig& cfg) {
  const int cap = std::min(cfg.delta_max, remaining);
  const int scan = std::min<int>(cap - 1, static_cast<int>(f.size()));
  int h = 1;
  if (cfg.set_max) {
    for (int k = 0; k < scan; ++k) {
      if (f[static_cast<std::size_t>(k)] > cfg.epsilon) h = k + 2;
    }
  } else {
    while (h - 1 < scan && f[static_cast<std::size_t>(h - 1)] > cfg.epsilon) ++h;
  }
  return std::clamp(h, cfg.delta_min, std::max(cfg.delta_min, cap));
}

std::array<int, 4> relabel_key_states(int t, int w) {
  if (w < 4) throw PreconditionError("relabel_key_states: window shorter than 4");
  return {t, t + (w - 1) / 3, t + 2 * (w - 1) / 3, t + w - 1};
}

Matrix similarity_table(const SkillModel& model, const Trajectory& ep) {
  const int n = ep.length();
  std::vector<int> rows;
  for (int t = 0; t < n; ++t) {
    if (std::min(ep.skill_length[static_cast<std::size_t>(t)], n - t) >= 4) rows.push_back(t);
  }
  Matrix table = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  if (rows.empty()) return table;
  const auto m = static_cast<Eigen::Index>(rows.size());
  std::array<Matrix, 4> keys;
  for (auto& k : keys) k.resize(m, ep.states.cols());
  Matrix starts(m, ep.states.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    const int t = rows[static_cast<std::size_t>(r)];
    const auto idx = relabel_key_states(t, std::min(ep.skill_length[static_cast<std::size_t>(t)], n - t));
    for (int j = 0; j < 4; ++j) keys[static_cast<std::size_t>(j)].row(r) = ep.states.row(idx[static_cast<std::size_t>(j)]);
    starts.row(r) = ep.states.row(t);
  }
  const Matrix z = model.encode_mean(keys).array().tanh().matrix();
  const Matrix phi = model.phi_eval(starts, z);
  const Matrix psi = model.psi_eval(ep.states);
  const Matrix f = phi * psi.transpose();
  for (Eigen::Index r = 0; r < m; ++r) table.row(rows[static_cast<std::size_t>(r)]) = f.row(r);
  return table;
}

bool relabel_eligible(const Trajectory& ep, int t, const RelabelConfig& cfg) {
  return ep.length() - t >= cfg.delta_min && std::min(ep.skill_length[static_cast<std::size_t>(t)], ep.length() - t) >= 4;
}

namespace {
int relabel_from_row(const Matrix& table, int t, int n, const RelabelConfig& cfg) {
  std::vector<double> f;
  for (int j = t + 1; j < n; ++j) f.push_back(table(t, j));
  return relabel_length(f, n - t, cfg);
}
}  // namespace

int relabel_one(const SkillModel& model, const Trajectory& ep, int t, const RelabelConfig& cfg) {
  cfg.validate();
  if (t < 0 || t >= ep.length()) throw PreconditionError("relabel_one: start out of range");
  const int n = ep.length();
  const int w = std::min(ep.skill_length[static_cast<std::size_t>(t)], n - t);
  const auto idx = relabel_key_states(t, w);
  Matrix keys(4, ep.states.cols());
  for (int j = 0; j < 4; ++j) keys.row(j) = ep.states.row(idx[static_cast<std::size_t>(j)]);
  const Vector z = model.encode_skill(keys).mean.array().tanh().matrix();
  const Matrix phi = model.phi_eval(ep.states.row(t), z.transpose());
  const Matrix psi = model.psi_eval(ep.states.bottomRows(n - t - 1 > 0 ? n - t - 1 : 0));
  std::vector<double> f;
  for (Eigen::Index j = 0; j < psi.rows(); ++j) f.push_back(phi.row(0).dot(psi.row(j)));
  return relabel_length(f, n - t, cfg);
}

RelabelReport relabel_with_tables(std::span<const Matrix> tables, TrajectoryDataset& ds, const RelabelConfig& cfg,
                                  int pass) {
  cfg.validate();
  if (tables.size() != ds.size()) throw PreconditionError("relabel: one table per episode required");
  RelabelReport rep;
  rep.pass = pass;
  rep.old_histogram.assign(static_cast<std::size_t>(cfg.delta_max + 1), 0);
  rep.new_histogram.assign(static_cast<std::size_t>(cfg.delta_max + 1), 0);
  std::vector<int> lengths;
  double abs_change = 0.0;
  for (std::size_t e = 0; e < ds.size(); ++e) {
    Trajectory& ep = ds.episodes[e];
    const int n = ep.length();
    std::vector<int> updated = ep.skill_length;
    for (int t = 0; t < n; ++t) {
      if (!relabel_eligible(ep, t, cfg)) continue;
      const int old_h = ep.skill_length[static_cast<std::size_t>(t)];
      const int new_h = relabel_from_row(tables[e], t, n, cfg);
      updated[static_cast<std::size_t>(t)] = new_h;
      rep.old_histogram[static_cast<std::size_t>(std::clamp(old_h, 0, cfg.delta_max))]++;
      rep.new_histogram[static_cast<std::size_t>(new_h)]++;
      abs_change += std::abs(new_h - old_h);
      lengths.push_back(new_h);
    }
    ep.skill_length = std::move(updated);
  }
  rep.relabeled = static_cast<long>(lengths.size());
  if (!lengths.empty()) {
    const double count = static_cast<double>(lengths.size());
    rep.mean_abs_change = abs_change / count;
    double sum = 0.0;
    long at_min = 0, at_max = 0, interior = 0;
    for (int h : lengths) {
      sum += h;
      at_min += h == cfg.delta_min ? 1 : 0;
      at_max += h == cfg.delta_max ? 1 : 0;
      interior += (h > cfg.delta_min && h < cfg.delta_max) ? 1 : 0;
    }
    rep.mean = sum / count;
    std::vector<int> sorted = lengths;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    rep.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    rep.min = sorted.front();
    rep.max = sorted.back();
    rep.frac_at_min = at_min / count;
    rep.frac_at_max = at_max / count;
    rep.frac_interior = interior / count;
  }
  return rep;
}

RelabelReport relabel_dataset(const SkillModel& model, TrajectoryDataset& ds, const RelabelConfig& cfg, int pass) {
  std::vector<Matrix> tables;
  tables.reserve(ds.size());
  for (const auto& ep : ds.episodes) tables.push_back(similarity_table(model, ep));
  return relabel_with_tables(tables, ds, cfg, pass);
}

void write_relabel_csv(const std::filesystem::path& path, std::span<const RelabelReport> reports) {
  std::ostringstream out;
  out << "pass,relabeled,mean,median,min,max,frac_at_min,frac_at_max,frac_interior,mean_abs_change\n";
  out.precision(10);
  for (const auto& r : reports) {
    out << r.pass << ',' << r.relabeled << ',' << r.mean << ',' << r.median << ',' << r.min << ',' << r.max << ','
        << r.frac_at_min << ',' << r.frac_at_max << ',' << r.frac_interior << ',' << r.mean_abs_change << '\n';
  }
  write_text_atomic(path, out.str());
}

void write_length_histogram_csv(const std::filesystem::path& path, const RelabelReport& r) {
  std::ostringstream out;
  out << "length,old_count,new_count\n";
  for (std::size_t h = 0; h < r.new_histogram.size(); ++h) {
    out << h << ',' << r.old_histogram[h] << ',' << r.new_histogram[h] << '\n';
  }
  write_text_atomic(path, out.str());
}

}  // namespace dcsl
