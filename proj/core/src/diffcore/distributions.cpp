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

#include "dcsl/diffcore/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dcsl/error.hpp"

namespace dcsl {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

DiagGaussian::DiagGaussian(Vector m, Vector ls) : mean(std::move(m)), log_std(std::move(ls)) {
  if (mean.size() != log_std.size()) {
    throw PreconditionError("DiagGaussian: mean and log_std lengths differ");
  }
  if (!mean.allFinite() || !log_std.allFinite()) {
    throw PreconditionError("DiagGaussian: non-finite parameters");
  }
  log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

double DiagGaussian::log_prob(const Vector& x) const {
  if (x.size() != mean.size()) throw PreconditionError("log_prob: dimension mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

double diag_gaussian_kl(const DiagGaussian& a, const DiagGaussian& b) {
  if (a.dim() != b.dim()) {
    throw PreconditionError("diag_gaussian_kl: dimension " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < a.dim(); ++i) {
    const double d = a.mean[i] - b.mean[i];
    const double ratio = std::exp(2.0 * (a.log_std[i] - b.log_std[i]));
    kl += b.log_std[i] - a.log_std[i] + 0.5 * (ratio + d * d * std::exp(-2.0 * b.log_std[i])) - 0.5;
  }
  // Rounding can leave tiny negative values for near-identical inputs.
  return std::max(kl, 0.0);
}

double log1m_tanh_sq(double u) {
  const double x = -2.0 * u;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

double TanhGaussian::log_prob(const Vector& x) const {
  if (x.size() != base.dim()) throw PreconditionError("log_prob: dimension mismatch");
  Vector u(x.size());
  double correction = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] > -1.0 && x[i] < 1.0)) {
      throw PreconditionError("TanhGaussian::log_prob: value outside (-1, 1)");
    }
    u[i] = std::atanh(x[i]);
    correction += log1m_tanh_sq(u[i]);
  }
  return base.log_prob(u) - correction;
}

TanhSample tanh_gaussian_sample(const TanhGaussian& d, Rng& rng) {
  TanhSample s;
  const Eigen::Index n = d.base.dim();
  s.pre_tanh.resize(n);
  s.sample.resize(n);
  double correction = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = d.base.mean[i] + std::exp(d.base.log_std[i]) * standard_normal(rng);
    s.pre_tanh[i] = u;
    s.sample[i] = std::clamp(std::tanh(u), -1.0 + kTanhEdge, 1.0 - kTanhEdge);
    correction += log1m_tanh_sq(u);
  }
  s.log_prob = d.base.log_prob(s.pre_tanh) - correction;
  return s;
}

TanhSample tanh_gaussian_sample(const TanhGaussian& d, std::uint64_t seed) {
  Rng rng(seed);
  return tanh_gaussian_sample(d, rng);
}

GaussianVar gaussian_head(const Var& out, Eigen::Index dim) {
  if (out.cols() != 2 * dim) {
    throw ConfigError("gaussian_head: expected " + std::to_string(2 * dim) + " columns, got " +
                      std::to_string(out.cols()));
  }
  GaussianVar g;
  g.mean = ad::slice_cols(out, 0, dim);
  g.log_std = ad::clamp(ad::slice_cols(out, dim, dim), kLogStdMin, kLogStdMax);
  return g;
}

GaussianVar gaussian_constant(Tape& tape, const Matrix& mean, const Matrix& log_std) {
  Matrix ls = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return GaussianVar{tape.constant(mean), tape.constant(std::move(ls))};
}

Var kl_diag_gaussian(const GaussianVar& a, const GaussianVar& b) {
  // log sb - log sa + (sa^2 + (ma - mb)^2) / (2 sb^2) - 1/2
  Var dls = ad::sub(a.log_std, b.log_std);
  Var ratio = ad::exp(ad::scale(dls, 2.0));
  Var dm2 = ad::square(ad::sub(a.mean, b.mean));
  Var inv_var_b = ad::exp(ad::scale(b.log_std, -2.0));
  Var per_dim = ad::add(ad::neg(dls), ad::scale(ad::add(ratio, ad::mul(dm2, inv_var_b)), 0.5));
  return ad::add_scalar(ad::row_sum(per_dim), -0.5 * static_cast<double>(a.mean.cols()));
}

Var kl_standard_normal(const GaussianVar& a) {
  Var var = ad::exp(ad::scale(a.log_std, 2.0));
  Var per_dim = ad::sub(ad::scale(ad::add(var, ad::square(a.mean)), 0.5), a.log_std);
  return ad::add_scalar(ad::row_sum(per_dim), -0.5 * static_cast<double>(a.mean.cols()));
}

Var reparameterize(const GaussianVar& d, const Matrix& noise) {
  Tape& t = *d.mean.tape();
  Var eps = t.constant(noise);
  return ad::add(d.mean, ad::mul(ad::exp(d.log_std), eps));
}

Var gaussian_log_prob(const GaussianVar& d, const Var& x) {
  Var z = ad::mul(ad::sub(x, d.mean), ad::exp(ad::neg(d.log_std)));
  Var per_dim = ad::sub(ad::scale(ad::square(z), -0.5), d.log_std);
  return ad::add_scalar(ad::row_sum(per_dim), -kHalfLog2Pi * static_cast<double>(x.cols()));
}

Var tanh_log_det(const Var& u) {
  // 2 * (log 2 - u - softplus(-2u))
  Var sp = ad::softplus(ad::scale(u, -2.0));
  Var per_dim = ad::scale(ad::add_scalar(ad::neg(ad::add(u, sp)), std::numbers::ln2), 2.0);
  return ad::row_sum(per_dim);
}

}  // namespace dcsl
