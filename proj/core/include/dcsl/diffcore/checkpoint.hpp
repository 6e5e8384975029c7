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

#ifndef DCSL_DIFFCORE_CHECKPOINT_HPP_
#define DCSL_DIFFCORE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsl/diffcore/param_tree.hpp"

namespace dcsl {

inline constexpr int kCheckpointVersion = 1;

// A checkpoint is `<prefix>.manifest.json` plus `<prefix>.blob`. The manifest
// lists every leaf with its shape, dtype ("float32") and byte offset into the
// blob, which holds little-endian float32 values in row-major order.
struct Checkpoint {
  std::string kind;
  nlohmann::json metadata;
  ParamTree params;
};

void save_checkpoint(const std::filesystem::path& prefix, const std::string& kind,
                     const ParamTree& params, const nlohmann::json& metadata = nlohmann::json::object());

// Throws FileError when the files are missing and FormatError on version,
// kind, or layout mismatches. An empty `expected_kind` accepts any kind.
Checkpoint load_checkpoint(const std::filesystem::path& prefix, const std::string& expected_kind = "");

std::filesystem::path manifest_path(const std::filesystem::path& prefix);
std::filesystem::path blob_path(const std::filesystem::path& prefix);

// Little-endian raw encoders shared with the dataset format.
void append_f32_le(std::vector<unsigned char>& out, double value);
void append_i32_le(std::vector<unsigned char>& out, std::int32_t value);
float read_f32_le(const unsigned char* p);
std::int32_t read_i32_le(const unsigned char* p);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);
// Writes through a temporary file in the same directory and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_CHECKPOINT_HPP_
