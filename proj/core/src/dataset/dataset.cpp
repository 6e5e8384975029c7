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

#include "dcsl/dataset/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"

namespace dcsl {

namespace fs = std::filesystem;

void Trajectory::validate() const {
  if (states.rows() != actions.rows()) throw DatasetError("trajectory: states/actions length mismatch");
  if (static_cast<Eigen::Index>(skill_length.size()) != states.rows()) {
    throw DatasetError("trajectory: skill_length length mismatch");
  }
  if (!states.allFinite() || !actions.allFinite()) throw DatasetError("trajectory: non-finite values");
  for (int h : skill_length) {
    if (h < 1) throw DatasetError("trajectory: skill length must be positive");
  }
}

bool Trajectory::operator==(const Trajectory& o) const {
  return states.rows() == o.states.rows() && states.cols() == o.states.cols() &&
         actions.rows() == o.actions.rows() && actions.cols() == o.actions.cols() && states == o.states &&
         actions == o.actions && skill_length == o.skill_length && reached_goal == o.reached_goal;
}

long TrajectoryDataset::total_steps() const {
  long n = 0;
  for (const auto& e : episodes) n += e.length();
  return n;
}

double TrajectoryDataset::goal_fraction() const {
  if (episodes.empty()) return 0.0;
  long hits = 0;
  for (const auto& e : episodes) hits += e.reached_goal ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(episodes.size());
}

void TrajectoryDataset::validate() const {
  if (episodes.empty()) throw DatasetError("dataset is empty");
  for (const auto& e : episodes) {
    e.validate();
    if (e.states.cols() != state_dim || e.actions.cols() != action_dim) {
      throw DatasetError("dataset: non-uniform dimensions");
    }
  }
}

bool TrajectoryDataset::operator==(const TrajectoryDataset& o) const {
  return state_dim == o.state_dim && action_dim == o.action_dim && episodes == o.episodes &&
         provenance.env == o.provenance.env && provenance.tier == o.provenance.tier &&
         provenance.policy == o.provenance.policy && provenance.seed == o.provenance.seed;
}

std::array<int, 4> select_key_states(int t, int h, Rng& rng) {
  if (h < 4) throw PreconditionError("select_key_states: skill length " + std::to_string(h) + " < 4");
  const int a = uniform_int(rng, 1, h - 2);
  int b = uniform_int(rng, 1, h - 3);
  if (b >= a) ++b;
  return {t, t + std::min(a, b), t + std::max(a, b), t + h - 1};
}

std::array<int, 4> select_key_states(int t, int h, std::uint64_t seed) {
  Rng rng(seed);
  return select_key_states(t, h, rng);
}

WindowSampler::WindowSampler(const TrajectoryDataset& dataset, int min_length) : dataset_(&dataset) {
  offsets_.push_back(0);
  for (std::size_t e = 0; e < dataset.episodes.size(); ++e) {
    const Trajectory& tr = dataset.episodes[e];
    for (int t = 0; t < tr.length(); ++t) {
      const int h = tr.skill_length[static_cast<std::size_t>(t)];
      if (h >= min_length && t + h <= tr.length()) starts_.emplace_back(static_cast<int>(e), t);
    }
    offsets_.push_back(offsets_.back() + tr.length());
  }
}

SkillWindow WindowSampler::window_at(std::size_t i, Rng& rng) const {
  const auto [e, t] = starts_.at(i);
  SkillWindow w;
  w.episode = e;
  w.start = t;
  w.length = dataset_->episodes[static_cast<std::size_t>(e)].skill_length[static_cast<std::size_t>(t)];
  w.keys = select_key_states(t, w.length, rng);
  return w;
}

SkillWindow WindowSampler::sample(Rng& rng) const {
  if (starts_.empty()) throw DatasetError("no valid skill window in dataset");
  return window_at(uniform_index(rng, starts_.size()), rng);
}

std::pair<int, int> WindowSampler::negative(const SkillWindow& current, Rng& rng) const {
  const long total = offsets_.back();
  const long excluded = current.length;
  if (total - excluded < 1) throw SamplingError("no state outside the anchor window");
  long k = static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(total - excluded)));
  const long window_begin = offsets_[static_cast<std::size_t>(current.episode)] + current.start;
  if (k >= window_begin) k += excluded;
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), k);
  const auto e = static_cast<int>(std::distance(offsets_.begin(), it) - 1);
  return {e, static_cast<int>(k - offsets_[static_cast<std::size_t>(e)])};
}

SkillWindow sample_skill_window(const TrajectoryDataset& dataset, std::uint64_t batch_seed) {
  if (dataset.episodes.empty()) throw DatasetError("dataset is empty");
  Rng rng(batch_seed);
  return WindowSampler(dataset).sample(rng);
}

std::pair<int, int> sample_negative_index(const TrajectoryDataset& dataset, const SkillWindow& current,
                                          Rng& rng) {
  return WindowSampler(dataset).negative(current, rng);
}

Vector sample_negative(const TrajectoryDataset& dataset, const SkillWindow& current, std::uint64_t seed) {
  Rng rng(seed);
  const auto [e, i] = sample_negative_index(dataset, current, rng);
  return dataset.episodes[static_cast<std::size_t>(e)].states.row(i).transpose();
}

fs::path dataset_prefix(const fs::path& path) {
  const std::string s = path.string();
  const std::string suffix = ".manifest.json";
  if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return fs::path(s.substr(0, s.size() - suffix.size()));
  }
  return path;
}

void save_dataset(const TrajectoryDataset& dataset, const fs::path& path) {
  dataset.validate();
  const fs::path prefix = dataset_prefix(path);
  std::vector<unsigned char> blob;
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& tr : dataset.episodes) {
    nlohmann::json e;
    e["length"] = tr.length();
    e["reached_goal"] = tr.reached_goal;
    e["states_offset"] = blob.size();
    for (Eigen::Index k = 0; k < tr.states.size(); ++k) append_f32_le(blob, tr.states.data()[k]);
    e["actions_offset"] = blob.size();
    for (Eigen::Index k = 0; k < tr.actions.size(); ++k) append_f32_le(blob, tr.actions.data()[k]);
    e["skill_length_offset"] = blob.size();
    for (int h : tr.skill_length) append_i32_le(blob, h);
    episodes.push_back(std::move(e));
  }
  nlohmann::json m;
  m["format"] = "dcsl-dataset";
  m["version"] = kDatasetFormatVersion;
  m["state_dim"] = dataset.state_dim;
  m["action_dim"] = dataset.action_dim;
  m["dtype"] = {{"states", "float32"}, {"actions", "float32"}, {"skill_length", "int32"}};
  m["provenance"] = {{"env", dataset.provenance.env},
                     {"tier", dataset.provenance.tier},
                     {"policy", dataset.provenance.policy},
                     {"seed", dataset.provenance.seed},
                     {"generator_version", dataset.provenance.generator_version}};
  m["episodes"] = std::move(episodes);
  m["blob_bytes"] = blob.size();
  write_file_bytes(blob_path(prefix), blob);
  write_text_atomic(manifest_path(prefix), m.dump(2) + "\n");
}

TrajectoryDataset load_dataset(const fs::path& path) {
  const fs::path prefix = dataset_prefix(path);
  const fs::path mpath = manifest_path(prefix);
  if (!fs::exists(mpath)) throw FileError("dataset manifest not found: " + mpath.string());
  nlohmann::json m;
  try {
    std::ifstream in(mpath);
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  auto get = [](const nlohmann::json& j, const char* name, const std::string& where) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(name)) {
      throw FormatError(where + ": missing field '" + name + "'");
    }
    return j[name];
  };
  const std::string where = "dataset manifest";
  if (get(m, "format", where) != "dcsl-dataset") throw FormatError(where + ": field 'format'");
  if (get(m, "version", where) != kDatasetFormatVersion) throw FormatError(where + ": field 'version'");
  const fs::path bpath = blob_path(prefix);
  if (!fs::exists(bpath)) throw FileError("dataset blob not found: " + bpath.string());
  const std::vector<unsigned char> blob = read_file_bytes(bpath);
  try {
    if (get(m, "blob_bytes", where).get<std::size_t>() != blob.size()) {
      throw FormatError(where + ": field 'blob_bytes' does not match blob size " + std::to_string(blob.size()));
    }
    TrajectoryDataset ds;
    ds.state_dim = get(m, "state_dim", where).get<int>();
    ds.action_dim = get(m, "action_dim", where).get<int>();
    if (ds.state_dim <= 0 || ds.action_dim <= 0) throw FormatError(where + ": field 'state_dim'/'action_dim'");
    const auto& prov = get(m, "provenance", where);
    ds.provenance.env = prov.value("env", "");
    ds.provenance.tier = prov.value("tier", "");
    ds.provenance.policy = prov.value("policy", "");
    ds.provenance.seed = prov.value("seed", std::uint64_t{0});
    ds.provenance.generator_version = prov.value("generator_version", "");
    int idx = 0;
    for (const auto& e : get(m, "episodes", where)) {
      const std::string ew = "episode " + std::to_string(idx++);
      const int len = get(e, "length", ew).get<int>();
      if (len < 1) throw FormatError(ew + ": field 'length'");
      auto section = [&](const char* field, std::size_t count) {
        const auto off = get(e, field, ew).get<std::size_t>();
        if (off + 4 * count > blob.size()) throw FormatError(ew + ": field '" + field + "' out of range");
        return blob.data() + off;
      };
      Trajectory tr;
      tr.reached_goal = get(e, "reached_goal", ew).get<bool>();
      tr.states.resize(len, ds.state_dim);
      tr.actions.resize(len, ds.action_dim);
      const unsigned char* p = section("states_offset", static_cast<std::size_t>(tr.states.size()));
      for (Eigen::Index k = 0; k < tr.states.size(); ++k) tr.states.data()[k] = read_f32_le(p + 4 * k);
      p = section("actions_offset", static_cast<std::size_t>(tr.actions.size()));
      for (Eigen::Index k = 0; k < tr.actions.size(); ++k) tr.actions.data()[k] = read_f32_le(p + 4 * k);
      p = section("skill_length_offset", static_cast<std::size_t>(len));
      tr.skill_length.resize(static_cast<std::size_t>(len));
      for (int k = 0; k < len; ++k) tr.skill_length[static_cast<std::size_t>(k)] = read_i32_le(p + 4 * k);
      ds.episodes.push_back(std::move(tr));
    }
    try {
      ds.validate();
    } catch (const DatasetError& err) {
      throw FormatError(where + ": " + err.what());
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + std::string(e.what()));
  }
}

std::vector<long> length_histogram(const TrajectoryDataset& dataset, int max_length) {
  std::vector<long> hist(static_cast<std::size_t>(max_length + 1), 0);
  for (const auto& tr : dataset.episodes) {
    for (int h : tr.skill_length) hist[static_cast<std::size_t>(std::clamp(h, 0, max_length))]++;
  }
  return hist;
}

}  // namespace dcsl
