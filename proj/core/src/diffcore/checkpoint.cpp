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

#include "dcsl/diffcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dcsl/error.hpp"

namespace dcsl {

namespace fs = std::filesystem;

fs::path manifest_path(const fs::path& prefix) {
  return fs::path(prefix.string() + ".manifest.json");
}

fs::path blob_path(const fs::path& prefix) { return fs::path(prefix.string() + ".blob"); }

void append_f32_le(std::vector<unsigned char>& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
}

void append_i32_le(std::vector<unsigned char>& out, std::int32_t value) {
  const auto bits = static_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
}

namespace {
std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
}  // namespace

float read_f32_le(const unsigned char* p) { return std::bit_cast<float>(read_u32_le(p)); }

std::int32_t read_i32_le(const unsigned char* p) {
  return static_cast<std::int32_t>(read_u32_le(p));
}

std::vector<unsigned char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path.string() + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FileError("short write to '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

void save_checkpoint(const fs::path& prefix, const std::string& kind, const ParamTree& params,
                     const nlohmann::json& metadata) {
  nlohmann::json manifest;
  manifest["format"] = "dcsl-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["kind"] = kind;
  manifest["metadata"] = metadata;
  nlohmann::json leaves = nlohmann::json::array();
  std::vector<unsigned char> blob;
  blob.reserve(params.parameter_count() * 4);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = params.at(i);
    nlohmann::json leaf;
    leaf["name"] = params.names()[i];
    leaf["shape"] = {m.rows(), m.cols()};
    leaf["dtype"] = "float32";
    leaf["offset"] = blob.size();
    for (Eigen::Index k = 0; k < m.size(); ++k) append_f32_le(blob, m.data()[k]);
    leaves.push_back(std::move(leaf));
  }
  manifest["leaves"] = std::move(leaves);
  manifest["blob_bytes"] = blob.size();
  write_file_bytes(blob_path(prefix), blob);
  write_text_atomic(manifest_path(prefix), manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& prefix, const std::string& expected_kind) {
  const fs::path mpath = manifest_path(prefix);
  if (!fs::exists(mpath)) throw FileError("checkpoint manifest not found: " + mpath.string());
  nlohmann::json manifest;
  try {
    std::ifstream in(mpath);
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  }
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!manifest.contains(name)) throw FormatError(std::string("checkpoint manifest: missing '") + name + "'");
    return manifest[name];
  };
  if (field("format") != "dcsl-checkpoint") throw FormatError("checkpoint manifest: field 'format'");
  if (field("version") != kCheckpointVersion) {
    throw FormatError("checkpoint manifest: field 'version' is " + field("version").dump() +
                      ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.kind = field("kind").get<std::string>();
  if (!expected_kind.empty() && ck.kind != expected_kind) {
    throw FormatError("checkpoint manifest: field 'kind' is '" + ck.kind + "', expected '" +
                      expected_kind + "'");
  }
  ck.metadata = manifest.value("metadata", nlohmann::json::object());
  const fs::path bpath = blob_path(prefix);
  if (!fs::exists(bpath)) throw FileError("checkpoint blob not found: " + bpath.string());
  const std::vector<unsigned char> blob = read_file_bytes(bpath);
  if (field("blob_bytes").get<std::size_t>() != blob.size()) {
    throw FormatError("checkpoint manifest: field 'blob_bytes' does not match blob size");
  }
  for (const auto& leaf : field("leaves")) {
    const std::string name = leaf.at("name").get<std::string>();
    if (leaf.at("dtype") != "float32") throw FormatError("leaf '" + name + "': field 'dtype'");
    const auto rows = leaf.at("shape").at(0).get<Eigen::Index>();
    const auto cols = leaf.at("shape").at(1).get<Eigen::Index>();
    const auto offset = leaf.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * 4;
    if (rows < 0 || cols < 0 || offset + bytes > blob.size()) {
      throw FormatError("leaf '" + name + "': field 'offset' out of range");
    }
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      m.data()[k] = read_f32_le(blob.data() + offset + 4 * static_cast<std::size_t>(k));
    }
    ck.params.add(name, std::move(m));
  }
  return ck;
}

}  // namespace dcsl
