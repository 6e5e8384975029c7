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

#include "dcsl/diffcore/param_tree.hpp"

#include <cmath>

#include "dcsl/error.hpp"

namespace dcsl {

void ParamTree::add(const std::string& name, Matrix value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter leaf '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  values_.push_back(std::move(value));
}

bool ParamTree::contains(const std::string& name) const { return index_.count(name) > 0; }

std::size_t ParamTree::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter leaf '" + name + "'");
  return it->second;
}

const Matrix& ParamTree::at(const std::string& name) const { return values_[index_of(name)]; }

Eigen::Map<Matrix> ParamTree::mut(const std::string& name) { return mut(index_of(name)); }

Eigen::Map<Matrix> ParamTree::mut(std::size_t index) {
  Matrix& m = values_[index];
  return Eigen::Map<Matrix>(m.data(), m.rows(), m.cols());
}

void ParamTree::set(const std::string& name, const Matrix& value) {
  Matrix& m = values_[index_of(name)];
  if (m.rows() != value.rows() || m.cols() != value.cols()) {
    throw ConfigError("shape mismatch setting leaf '" + name + "'");
  }
  m = value;
}

std::size_t ParamTree::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

std::vector<std::size_t> ParamTree::leaves_with_prefix(const std::string& prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].compare(0, prefix.size(), prefix) == 0) out.push_back(i);
  }
  return out;
}

ParamTree ParamTree::zeros_like() const {
  ParamTree out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out.add(names_[i], Matrix::Zero(values_[i].rows(), values_[i].cols()));
  }
  return out;
}

bool ParamTree::all_finite() const {
  for (const Matrix& m : values_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

bool ParamTree::same_structure(const ParamTree& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() ||
        values_[i].cols() != other.values_[i].cols()) {
      return false;
    }
  }
  return true;
}

double ParamTree::norm() const {
  double s = 0.0;
  for (const Matrix& m : values_) s += m.squaredNorm();
  return std::sqrt(s);
}

bool ParamTree::operator==(const ParamTree& other) const {
  if (!same_structure(other)) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] != other.values_[i]) return false;
  }
  return true;
}

}  // namespace dcsl
