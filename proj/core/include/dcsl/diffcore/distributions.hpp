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

#ifndef DCSL_DIFFCORE_DISTRIBUTIONS_HPP_
#define DCSL_DIFFCORE_DISTRIBUTIONS_HPP_

#include <cstdint>

#include "dcsl/diffcore/tape.hpp"
#include "dcsl/diffcore/tensor.hpp"

namespace dcsl {

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

// Diagonal Gaussian; log_std is clamped to [kLogStdMin, kLogStdMax] on construction.
struct DiagGaussian {
  Vector mean;
  Vector log_std;

  DiagGaussian() = default;
  DiagGaussian(Vector mean, Vector log_std);

  Eigen::Index dim() const { return mean.size(); }
  double log_prob(const Vector& x) const;
};

double diag_gaussian_kl(const DiagGaussian& a, const DiagGaussian& b);

// tanh(u) with u ~ base. KL between two tanh-Gaussians equals the KL of their
// bases, since tanh is a bijection.
struct TanhGaussian {
  DiagGaussian base;

  Vector mode() const { return base.mean.array().tanh().matrix(); }
  // Log-density of x in (-1, 1)^d, including the change-of-variables term.
  double log_prob(const Vector& x) const;
};

struct TanhSample {
  Vector sample;
  Vector pre_tanh;
  double log_prob = 0.0;
};

TanhSample tanh_gaussian_sample(const TanhGaussian& d, Rng& rng);
TanhSample tanh_gaussian_sample(const TanhGaussian& d, std::uint64_t seed);

// Samples are kept this far inside the open interval.
inline constexpr double kTanhEdge = 1e-9;

// log(1 - tanh(u)^2) evaluated without cancellation.
double log1m_tanh_sq(double u);

// Batched, differentiable counterparts. Each row of mean/log_std is one distribution.
struct GaussianVar {
  Var mean;
  Var log_std;
};

// Splits a (batch x 2d) network output into mean and clamped log_std.
GaussianVar gaussian_head(const Var& out, Eigen::Index dim);
GaussianVar gaussian_constant(Tape& tape, const Matrix& mean, const Matrix& log_std);

// Per-row KL(a || b), batch x 1.
Var kl_diag_gaussian(const GaussianVar& a, const GaussianVar& b);
// Per-row KL(a || N(0, I)), batch x 1.
Var kl_standard_normal(const GaussianVar& a);
// u = mean + exp(log_std) * noise.
Var reparameterize(const GaussianVar& d, const Matrix& noise);
// Per-row Gaussian log-density of x, batch x 1.
Var gaussian_log_prob(const GaussianVar& d, const Var& x);
// Per-row sum of log(1 - tanh(u)^2), batch x 1.
Var tanh_log_det(const Var& u);

}  // namespace dcsl

#endif  // DCSL_DIFFCORE_DISTRIBUTIONS_HPP_
