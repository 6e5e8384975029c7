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

#ifndef DCSL_HARNESS_MANIFEST_HPP_
#define DCSL_HARNESS_MANIFEST_HPP_

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace dcsl {

// <run dir>/manifest.json: config hash, code version, and per stage the
// artifact paths (relative to the run dir) and wall-clock seconds.
class RunManifest {
 public:
  // Loads the existing manifest when its config hash matches; otherwise
  // starts empty.
  static RunManifest open(const std::filesystem::path& run_dir, const std::string& config_hash);
  // Reads whatever is on disk; throws FileError when absent.
  static RunManifest read(const std::filesystem::path& run_dir);

  // Adds or replaces `stage` and rewrites the file atomically.
  void record(const std::string& stage, const std::map<std::string, std::string>& artifacts, double seconds);
  bool has(const std::string& stage) const;
  const std::string& config_hash() const { return hash_; }
  const nlohmann::json& stages() const { return stages_; }
  nlohmann::json to_json() const;

 private:
  std::filesystem::path dir_;
  std::string hash_;
  std::string version_;
  nlohmann::json stages_ = nlohmann::json::object();
};

}  // namespace dcsl

#endif  // DCSL_HARNESS_MANIFEST_HPP_
