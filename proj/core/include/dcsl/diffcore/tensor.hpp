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

#ifndef DCSL_DIFFCORE_TENSOR_HPP_
#define DCSL_DIFFCORE_TENSOR_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dcsl {

// Rows are batch items, columns are features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// Inclusive range [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

Matrix standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

// Derives an independent stream seed from a base seed and a tag.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_TENSOR_HPP_
