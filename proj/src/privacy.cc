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

#include "fedlm/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fedlm/errors.h"
#include "fedlm/rng.h"

namespace fedlm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi == -kInf) return -kInf;
  return hi + std::log1p(std::exp(lo - hi));
}

// log(exp(a) - exp(b)), requires a >= b.
double LogSub(double a, double b) {
  if (b == -kInf) return a;
  if (a <= b) return -kInf;
  return a + std::log1p(-std::exp(b - a));
}

// log(erfc(x)) without underflow for large positive x.
double LogErfc(double x) {
  if (x < 20.0) return std::log(std::erfc(x));
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) -
                        15.0 / (8.0 * x2 * x2 * x2);
  return -x2 - std::log(x) - 0.5 * std::log(M_PI) + std::log(series);
}

double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double LogMomentInteger(double q, double sigma, int alpha) {
  double log_a = -kInf;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int k = 0; k <= alpha; ++k) {
    const double term = LogBinomial(alpha, k) + (alpha - k) * log_1mq +
                        k * log_q +
                        (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
    log_a = LogAdd(log_a, term);
  }
  return log_a;
}

double LogMomentFractional(double q, double sigma, double alpha) {
  double log_a0 = -kInf;
  double log_a1 = -kInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  // Generalized binomial coefficient C(alpha, i), tracked as log|c| and sign.
  double log_coef = 0.0;
  bool positive = true;
  for (int i = 0; i < 1000000; ++i) {
    const double j = alpha - i;
    const double log_t0 = log_coef + i * log_q + j * log_1mq;
    const double log_t1 = log_coef + j * log_q + i * log_1mq;
    const double log_e0 =
        std::log(0.5) + LogErfc((i - z0) / (std::sqrt(2.0) * sigma));
    const double log_e1 =
        std::log(0.5) + LogErfc((z0 - j) / (std::sqrt(2.0) * sigma));
    const double log_s0 =
        log_t0 + (static_cast<double>(i) * i - i) / (2.0 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
    if (positive) {
      log_a0 = LogAdd(log_a0, log_s0);
      log_a1 = LogAdd(log_a1, log_s1);
    } else {
      log_a0 = LogSub(log_a0, log_s0);
      log_a1 = LogSub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30.0) break;
    log_coef += std::log(std::abs(alpha - i)) - std::log(i + 1.0);
    if (alpha - i < 0) positive = !positive;
  }
  return LogAdd(log_a0, log_a1);
}

double RdpSubsampledAt(double q, double sigma, double alpha) {
  if (q == 1.0) return RdpGaussian(sigma, alpha);
  const double log_a = alpha == std::floor(alpha)
                           ? LogMomentInteger(q, sigma, static_cast<int>(alpha))
                           : LogMomentFractional(q, sigma, alpha);
  return std::max(0.0, log_a / (alpha - 1.0));
}

}  // namespace

void DpConfig::Validate() const {
  if (!(clip_norm > 0.0)) throw UsageError("dp.clip_norm must be > 0");
  if (!(noise_multiplier >= 0.0)) throw UsageError("dp.noise_multiplier must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw UsageError("dp.delta must be in (0,1)");
}

ParamVector ClipUpdate(const ParamVector& delta, double clip_norm) {
  if (!(clip_norm > 0.0)) throw UsageError("clip norm must be > 0");
  const double norm = delta.Norm();
  if (norm <= clip_norm) return delta;
  ParamVector out = delta;
  out.Scale(clip_norm / norm);
  return out;
}

ParamVector AddNoise(const ParamVector& sum, double clip_norm,
                     double noise_multiplier, uint64_t seed, int64_t round) {
  if (!(noise_multiplier >= 0.0)) throw UsageError("noise multiplier must be >= 0");
  if (noise_multiplier == 0.0) return sum;
  ParamVector out = sum;
  Rng rng = MakeRng(seed, "dp-noise", {static_cast<uint64_t>(round)});
  std::normal_distribution<double> normal(0.0, noise_multiplier * clip_norm);
  for (size_t i = 0; i < out.size(); ++i) out[i] += normal(rng);
  return out;
}

double RdpGaussian(double noise_multiplier, double order) {
  if (noise_multiplier == 0.0) return kInf;
  return order / (2.0 * noise_multiplier * noise_multiplier);
}

std::vector<double> RdpSubsampledGaussian(double q, double noise_multiplier,
                                          const std::vector<double>& orders) {
  if (!(q > 0.0 && q <= 1.0)) throw UsageError("sampling rate must be in (0,1]");
  if (!(noise_multiplier >= 0.0)) throw UsageError("noise multiplier must be >= 0");
  std::vector<double> out;
  out.reserve(orders.size());
  for (double alpha : orders) {
    if (!(alpha > 1.0)) throw UsageError("RDP orders must be > 1");
    out.push_back(noise_multiplier == 0.0 ? kInf
                                          : RdpSubsampledAt(q, noise_multiplier, alpha));
  }
  return out;
}

RdpCurve RdpCurve::SubsampledGaussian(double q, double noise_multiplier,
                                      const std::vector<double>& orders) {
  return {orders, RdpSubsampledGaussian(q, noise_multiplier, orders)};
}

RdpCurve& RdpCurve::operator+=(const RdpCurve& other) {
  if (orders != other.orders) throw UsageError("RDP curves use different orders");
  for (size_t i = 0; i < eps_rdp.size(); ++i) eps_rdp[i] += other.eps_rdp[i];
  return *this;
}

RdpCurve RdpCurve::Composed(int64_t rounds) const {
  RdpCurve out = *this;
  for (double& e : out.eps_rdp) e *= static_cast<double>(rounds);
  return out;
}

std::vector<double> DefaultOrders() {
  std::vector<double> orders;
  for (int i = 1; i <= 10; ++i) orders.push_back(1.0 + i / 100.0);
  for (double a : {1.15, 1.2, 1.25, 1.5, 1.75}) orders.push_back(a);
  for (int twice = 4; twice <= 128; ++twice) orders.push_back(twice / 2.0);
  for (double a : {128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0}) orders.push_back(a);
  return orders;
}

PrivacySpent ComputeEpsilon(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must be in (0,1)");
  PrivacySpent best{kInf, 0.0};
  for (size_t i = 0; i < curve.orders.size(); ++i) {
    const double alpha = curve.orders[i];
    const double eps = curve.eps_rdp[i] + std::log(1.0 / delta) / (alpha - 1.0);
    if (eps < best.epsilon) best = {eps, alpha};
  }
  if (!std::isfinite(best.epsilon)) throw DataError("noise too small to account");
  return best;
}

PrivacySpent Account(double q, double noise_multiplier, int64_t rounds,
                     double delta, const std::vector<double>& orders) {
  if (rounds < 1) throw UsageError("rounds must be >= 1");
  return ComputeEpsilon(
      RdpCurve::SubsampledGaussian(q, noise_multiplier, orders).Composed(rounds),
      delta);
}

}  // namespace fedlm
