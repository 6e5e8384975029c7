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

#include "dcsl/harness/manifest.hpp"

#include <fstream>

#include "dcsl/diffcore/checkpoint.hpp"
#include "dcsl/error.hpp"
#include "dcsl/harness/config.hpp"

namespace dcsl {

namespace fs = std::filesystem;

RunManifest RunManifest::open(const fs::path& run_dir, const std::string& config_hash) {
  RunManifest m;
  if (fs::exists(run_dir / "manifest.json")) {
    RunManifest prev = read(run_dir);
    if (prev.hash_ == config_hash) m = prev;
  }
  m.dir_ = run_dir;
  m.hash_ = config_hash;
  m.version_ = version();
  return m;
}

RunManifest RunManifest::read(const fs::path& run_dir) {
  const fs::path path = run_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw FileError("run manifest not found: " + path.string());
  RunManifest m;
  try {
    nlohmann::json j;
    in >> j;
    m.hash_ = j.at("config_hash").get<std::string>();
    m.version_ = j.at("code_version").get<std::string>();
    m.stages_ = j.at("stages");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("run manifest " + path.string() + ": " + e.what());
  }
  m.dir_ = run_dir;
  return m;
}

void RunManifest::record(const std::string& stage, const std::map<std::string, std::string>& artifacts,
                         double seconds) {
  stages_[stage] = {{"artifacts", artifacts}, {"wall_clock_s", seconds}};
  fs::create_directories(dir_);
  write_text_atomic(dir_ / "manifest.json", to_json().dump(2) + "\n");
}

bool RunManifest::has(const std::string& stage) const { return stages_.contains(stage); }

nlohmann::json RunManifest::to_json() const {
  return {{"config_hash", hash_}, {"code_version", version_}, {"stages", stages_}};
}

}  // namespace dcsl
