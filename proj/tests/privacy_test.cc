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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fedlm/errors.h"
#include "test_util.h"

namespace fedlm {
namespace {

// Direct summation of the binomial expansion in extended precision.
double BruteForceIntegerRdp(double q, double sigma, int alpha) {
  long double a = 0.0L;
  long double binom = 1.0L;
  for (int k = 0; k <= alpha; ++k) {
    a += binom * std::pow(1.0L - q, alpha - k) * std::pow(static_cast<long double>(q), k) *
         std::exp(static_cast<long double>(k * k - k) / (2.0L * sigma * sigma));
    binom = binom * (alpha - k) / (k + 1);
  }
  return static_cast<double>(std::log(a) / (alpha - 1));
}

// E_{x ~ N(0, sigma^2)} [((1 - q) + q exp((2x - 1) / (2 sigma^2)))^alpha] by
// composite Simpson quadrature.
double QuadratureRdp(double q, double sigma, double alpha) {
  const double lo = -40.0 * sigma;
  const double hi = 40.0 * sigma + alpha;
  const int n = 400000;
  const double h = (hi - lo) / n;
  long double sum = 0.0L;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const long double ratio = std::exp(static_cast<long double>(2 * x - 1) / (2 * sigma * sigma));
    const long double f = std::exp(-static_cast<long double>(x) * x / (2 * sigma * sigma)) /
                          (sigma * std::sqrt(2 * M_PI)) *
                          std::pow((1.0L - q) + q * ratio, static_cast<long double>(alpha));
    const int coef = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    sum += coef * f;
  }
  const long double a = sum * h / 3.0L;
  return static_cast<double>(std::log(a) / (alpha - 1));
}

TEST(ClipTest, InsideBallIsUnchangedBitwise) {
  const ParamVector d({0.3, -0.1, 0.2});
  EXPECT_TRUE(testutil::BitwiseEqual(ClipUpdate(d, 0.5).values(), d.values()));
  const ParamVector zero(4);
  EXPECT_EQ(ClipUpdate(zero, 0.5), zero);
}

TEST(ClipTest, ScalesOntoSphere) {
  const ParamVector out = ClipUpdate(ParamVector({2.0, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_EQ(out[1], 0.0);
  EXPECT_THROW(ClipUpdate(ParamVector({1.0}), 0.0), UsageError);
}

TEST(ClipTest, NormNeverExceedsBound) {
  testutil::Lcg gen(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + gen.Int(50));
    const double scale = std::pow(10.0, gen.Int(8) - 4);
    for (double& x : v) x = (gen.Uniform() - 0.5) * scale;
    const double c = 0.01 + gen.Uniform();
    const ParamVector out = ClipUpdate(ParamVector(v), c);
    EXPECT_LE(out.Norm(), c + 1e-12);
  }
}

TEST(NoiseTest, ZeroMultiplierIsIdentity) {
  const ParamVector s({1.0, 2.0});
  EXPECT_EQ(AddNoise(s, 0.5, 0.0, 1), s);
}

TEST(NoiseTest, StandardDeviationIsMultiplierTimesClip) {
  const ParamVector noisy = AddNoise(ParamVector(1000000), 0.5, 1.0, 42, 3);
  double mean = 0.0;
  for (double x : noisy.values()) mean += x;
  mean /= noisy.size();
  double var = 0.0;
  for (double x : noisy.values()) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (noisy.size() - 1));
  EXPECT_GE(sd, 0.4975);
  EXPECT_LE(sd, 0.5025);
  EXPECT_NEAR(mean, 0.0, 0.005);
}

TEST(NoiseTest, SeededByNoiseSeedAndRound) {
  const ParamVector s(64);
  EXPECT_EQ(AddNoise(s, 0.5, 1.0, 1, 1), AddNoise(s, 0.5, 1.0, 1, 1));
  EXPECT_NE(AddNoise(s, 0.5, 1.0, 1, 1), AddNoise(s, 0.5, 1.0, 2, 1));
  EXPECT_NE(AddNoise(s, 0.5, 1.0, 1, 1), AddNoise(s, 0.5, 1.0, 1, 2));
}

TEST(RdpGaussianTest, ClosedForm) {
  EXPECT_DOUBLE_EQ(RdpGaussian(1.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(RdpGaussian(2.0, 8.0), 1.0);
  EXPECT_NEAR(RdpGaussian(1.5, 1.0 + 1e-9), 1.0 / (2 * 1.5 * 1.5), 1e-9);
  EXPECT_TRUE(std::isinf(RdpGaussian(0.0, 2.0)));
}

TEST(RdpSubsampledTest, FullSamplingIsPlainGaussian) {
  const auto orders = DefaultOrders();
  const auto rdp = RdpSubsampledGaussian(1.0, 1.3, orders);
  for (size_t i = 0; i < orders.size(); ++i) {
    EXPECT_DOUBLE_EQ(rdp[i], orders[i] / (2 * 1.3 * 1.3));
  }
}

TEST(RdpSubsampledTest, VanishesAsSamplingRateShrinks) {
  const std::vector<double> orders = {1.5, 2.0, 4.5, 16.0};
  double prev_max = std::numeric_limits<double>::infinity();
  for (double q : {1e-2, 1e-4, 1e-6}) {
    double mx = 0.0;
    for (double r : RdpSubsampledGaussian(q, 1.0, orders)) mx = std::max(mx, r);
    EXPECT_LT(mx, prev_max);
    prev_max = mx;
  }
  EXPECT_LT(prev_max, 1e-9);
}

TEST(RdpSubsampledTest, IntegerOrderMatchesBruteForce) {
  const double got = RdpSubsampledGaussian(0.0125, 1.5, {16.0})[0];
  EXPECT_NEAR(got, BruteForceIntegerRdp(0.0125, 1.5, 16), 1e-6);
  for (int alpha : {2, 3, 8, 32}) {
    EXPECT_NEAR(RdpSubsampledGaussian(0.05, 0.8, {double(alpha)})[0],
                BruteForceIntegerRdp(0.05, 0.8, alpha), 1e-9)
        << alpha;
  }
}

TEST(RdpSubsampledTest, FractionalOrderMatchesQuadrature) {
  struct Case {
    double q, sigma, alpha;
  };
  for (const Case c : {Case{0.0125, 1.5, 2.5}, Case{0.0125, 0.5, 1.75}, Case{0.0125, 0.2, 1.09},
                       Case{0.1, 1.0, 3.5}, Case{0.0125, 1.5, 15.5}}) {
    const double got = RdpSubsampledGaussian(c.q, c.sigma, {c.alpha})[0];
    const double want = QuadratureRdp(c.q, c.sigma, c.alpha);
    EXPECT_NEAR(got, want, 1e-6 * std::max(1.0, want))
        << "q=" << c.q << " sigma=" << c.sigma << " alpha=" << c.alpha;
  }
}

TEST(RdpSubsampledTest, IntegerOrderAgreesWithQuadrature) {
  EXPECT_NEAR(RdpSubsampledGaussian(0.0125, 1.5, {4.0})[0], QuadratureRdp(0.0125, 1.5, 4.0),
              1e-9);
}

TEST(RdpSubsampledTest, ContinuousAcrossIntegerOrders) {
  const double at3 = RdpSubsampledGaussian(0.02, 1.1, {3.0})[0];
  const double near3 = RdpSubsampledGaussian(0.02, 1.1, {3.0 + 1e-7})[0];
  EXPECT_NEAR(near3, at3, 1e-6 * at3);
}

TEST(RdpSubsampledTest, InvalidArguments) {
  EXPECT_THROW(RdpSubsampledGaussian(0.0, 1.0, {2.0}), UsageError);
  EXPECT_THROW(RdpSubsampledGaussian(1.5, 1.0, {2.0}), UsageError);
  EXPECT_THROW(RdpSubsampledGaussian(0.5, -1.0, {2.0}), UsageError);
  EXPECT_THROW(RdpSubsampledGaussian(0.5, 1.0, {1.0}), UsageError);
}

TEST(RdpCurveTest, CompositionIsAdditive) {
  const auto orders = DefaultOrders();
  const RdpCurve one = RdpCurve::SubsampledGaussian(0.0125, 1.0, orders);
  RdpCurve sum = one;
  for (int i = 1; i < 5; ++i) sum += one;
  const RdpCurve five = one.Composed(5);
  for (size_t i = 0; i < orders.size(); ++i) {
    EXPECT_NEAR(sum.eps_rdp[i], five.eps_rdp[i], 1e-12 * five.eps_rdp[i]);
  }
  EXPECT_DOUBLE_EQ(ComputeEpsilon(five, 1e-5).epsilon, Account(0.0125, 1.0, 5, 1e-5).epsilon);
  RdpCurve other = RdpCurve::SubsampledGaussian(0.0125, 1.0, {2.0, 3.0});
  EXPECT_THROW(other += one, UsageError);
}

TEST(AccountTest, HugeNoiseGivesTinyEpsilon) {
  EXPECT_LT(Account(0.0125, 100.0, 1, 1e-5).epsilon, 0.01);
}

TEST(AccountTest, ReportedEpsilonsWithinFactorOfTwo) {
  const double q = 100.0 / 8000.0;
  struct Row {
    double z, eps;
  };
  for (const Row r : {Row{1.5, 0.9}, Row{0.5, 14.2}, Row{0.2, 248.6}}) {
    const double eps = Account(q, r.z, 1000, 1e-5).epsilon;
    EXPECT_GE(eps, r.eps / 2) << "z=" << r.z;
    EXPECT_LE(eps, r.eps * 2) << "z=" << r.z;
  }
}

TEST(AccountTest, Monotone) {
  double prev = std::numeric_limits<double>::infinity();
  for (double z : {0.3, 0.5, 0.8, 1.2, 2.0, 4.0}) {
    const double eps = Account(0.0125, z, 200, 1e-5).epsilon;
    EXPECT_LE(eps, prev);
    prev = eps;
  }
  prev = 0.0;
  for (int64_t n : {1, 10, 100, 1000}) {
    const double eps = Account(0.0125, 1.0, n, 1e-5).epsilon;
    EXPECT_GE(eps, prev);
    prev = eps;
  }
  prev = 0.0;
  for (double q : {0.001, 0.01, 0.1, 1.0}) {
    const double eps = Account(q, 1.0, 50, 1e-5).epsilon;
    EXPECT_GE(eps, prev);
    prev = eps;
  }
}

TEST(AccountTest, Errors) {
  try {
    Account(0.0125, 0.0, 10, 1e-5);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "noise too small to account");
  }
  EXPECT_THROW(Account(0.0125, 1.0, 0, 1e-5), UsageError);
  EXPECT_THROW(Account(0.0125, 1.0, 10, 0.0), UsageError);
}

TEST(DefaultOrdersTest, CoversBothEnds) {
  const auto orders = DefaultOrders();
  EXPECT_TRUE(std::is_sorted(orders.begin(), orders.end()));
  EXPECT_EQ(std::adjacent_find(orders.begin(), orders.end()), orders.end());
  EXPECT_DOUBLE_EQ(orders.front(), 1.01);
  EXPECT_DOUBLE_EQ(orders.back(), 4096.0);
  for (double a : {1.25, 1.5, 2.0, 2.5, 64.0, 128.0, 512.0}) {
    EXPECT_NE(std::find(orders.begin(), orders.end(), a), orders.end()) << a;
  }
}

}  // namespace
}  // namespace fedlm
