// Copyright 2026 The fedlm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDLM_PRIVACY_H_
#define FEDLM_PRIVACY_H_

#include <cstdint>
#include <vector>

#include "fedlm/param_vector.h"

namespace fedlm {

struct DpConfig {
  // L2 bound on each client's delta.
  double clip_norm = 0.5;
  // Noise standard deviation divided by clip_norm.
  double noise_multiplier = 1.0;
  double delta = 1e-5;
  uint64_t noise_seed = 0;

  void Validate() const;
};

// delta * min(1, clip / ||delta||). Vectors already inside the ball come back
// unchanged.
ParamVector ClipUpdate(const ParamVector& delta, double clip_norm);

// Adds i.i.d. N(0, (z * clip)^2) to every coordinate. The stream is keyed by
// (seed, round) and shared with nothing else.
ParamVector AddNoise(const ParamVector& sum, double clip_norm,
                     double noise_multiplier, uint64_t seed, int64_t round = 0);

// Renyi-DP of the Gaussian mechanism with unit sensitivity and noise
// multiplier z at order alpha: alpha / (2 z^2). Infinite when z == 0.
double RdpGaussian(double noise_multiplier, double order);

// Per-round RDP of the Poisson-subsampled Gaussian mechanism at each order.
// Integer orders use the binomial expansion; fractional orders use the
// erfc-weighted series for real orders. q == 1 reduces to RdpGaussian.
std::vector<double> RdpSubsampledGaussian(double q, double noise_multiplier,
                                          const std::vector<double>& orders);

// Cumulative RDP values over a grid of orders.
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> eps_rdp;

  static RdpCurve SubsampledGaussian(double q, double noise_multiplier,
                                     const std::vector<double>& orders);
  // Element-wise sum; both curves must share the order grid.
  RdpCurve& operator+=(const RdpCurve& other);
  RdpCurve Composed(int64_t rounds) const;
};

// 1.01 .. 1.1, 1.15, 1.2, 1.25, 1.5, 1.75, 2, 2.5, 3, 3.5, ..., 64, then
// powers of two up to 4096.
std::vector<double> DefaultOrders();

struct PrivacySpent {
  double epsilon = 0.0;
  double order = 0.0;
};

// epsilon = min over orders of eps_rdp(alpha) + log(1/delta) / (alpha - 1).
// Throws DataError("noise too small to account") when every order is
// infinite.
PrivacySpent ComputeEpsilon(const RdpCurve& curve, double delta);

PrivacySpent Account(double q, double noise_multiplier, int64_t rounds,
                     double delta,
                     const std::vector<double>& orders = DefaultOrders());

}  // namespace fedlm

#endif  // FEDLM_PRIVACY_H_
