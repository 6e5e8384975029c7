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

#ifndef DCSL_DIFFCORE_PARAM_TREE_HPP_
#define DCSL_DIFFCORE_PARAM_TREE_HPP_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcsl/diffcore/tensor.hpp"

namespace dcsl {

// An ordered collection of uniquely named parameter matrices. Leaves keep
// the shape they were added with; values can be modified through mut().
class ParamTree {
 public:
  void add(const std::string& name, Matrix value);

  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  const Matrix& at(const std::string& name) const;
  const Matrix& at(std::size_t index) const { return values_[index]; }
  Eigen::Map<Matrix> mut(const std::string& name);
  Eigen::Map<Matrix> mut(std::size_t index);

  // Replaces a leaf's values; the shape must match.
  void set(const std::string& name, const Matrix& value);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t parameter_count() const;

  // Leaves whose name starts with `prefix`.
  std::vector<std::size_t> leaves_with_prefix(const std::string& prefix) const;

  ParamTree zeros_like() const;
  bool all_finite() const;
  bool same_structure(const ParamTree& other) const;

  // Euclidean norm over all leaves.
  double norm() const;

  bool operator==(const ParamTree& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_PARAM_TREE_HPP_
