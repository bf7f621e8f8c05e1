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

#include "fedlm/loss.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fedlm/errors.h"
#include "test_util.h"

namespace fedlm {
namespace {

Utterance Utt(std::vector<TokenId> tokens, std::vector<double> confs) {
  Utterance u;
  u.tokens = std::move(tokens);
  u.confidences = std::move(confs);
  return u;
}

ModelConfig Config(int vocab) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  return cfg;
}

void ExpectGradNear(const ParamVector& a, const ParamVector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

TEST(UtteranceConfidenceTest, IsTheMean) {
  EXPECT_DOUBLE_EQ(UtteranceConfidence(Utt({3, 3, 3}, {1, 1, 1})), 1.0);
  EXPECT_DOUBLE_EQ(UtteranceConfidence(Utt({3, 3, 3}, {0.2, 0.4, 0.9})), 0.5);
  EXPECT_EQ(UtteranceConfidence(Utt({3}, {0.37})), 0.37);
  EXPECT_THROW(UtteranceConfidence(Utt({}, {})), DataError);
}

TEST(LossModeTest, ParseAndPrint) {
  EXPECT_EQ(LossMode::Parse("all"), LossMode::All());
  EXPECT_EQ(LossMode::Parse("utt"), LossMode::UttWeight());
  EXPECT_EQ(LossMode::Parse("token"), LossMode::TokenWeight());
  EXPECT_EQ(LossMode::Parse("hard"), LossMode::HardThreshold(0.5));
  EXPECT_EQ(LossMode::Parse("hard:0.25"), LossMode::HardThreshold(0.25));
  EXPECT_EQ(LossMode::Parse("hard:0.25").ToString(), "hard:0.25");
  for (const char* bad : {"hard:", "hard:x", "hard:1.5", "hard:-0.1", "soft", ""}) {
    EXPECT_THROW(LossMode::Parse(bad), UsageError) << bad;
  }
}

class HandExample : public ::testing::Test {
 protected:
  LanguageModel model_{Config(4)};
  ParamVector zero_ = ParamVector(model_.num_params());
  std::vector<Utterance> batch_ = {Utt({3}, {0.3}), Utt({2}, {0.7})};
};

TEST_F(HandExample, All) {
  const auto l = ComputeBatchLoss(model_, zero_, batch_, LossMode::All());
  EXPECT_NEAR(l.value, std::log(4.0), 1e-12);
  EXPECT_EQ(l.utts_used, 2);
  EXPECT_EQ(l.tokens_used, 2);
  EXPECT_FALSE(l.skipped);
}

TEST_F(HandExample, UttAndTokenWeight) {
  const auto utt = ComputeBatchLoss(model_, zero_, batch_, LossMode::UttWeight());
  const auto tok = ComputeBatchLoss(model_, zero_, batch_, LossMode::TokenWeight());
  EXPECT_NEAR(utt.value, 0.5 * std::log(4.0), 1e-12);
  EXPECT_EQ(utt.value, tok.value);
  EXPECT_EQ(utt.gradient, tok.gradient);
}

TEST_F(HandExample, HardThresholdKeepsOneUtterance) {
  const auto l = ComputeBatchLoss(model_, zero_, batch_, LossMode::HardThreshold(0.5));
  EXPECT_NEAR(l.value, std::log(4.0), 1e-12);
  EXPECT_EQ(l.utts_used, 1);
  EXPECT_EQ(l.tokens_used, 1);
  // Ties are retained.
  const auto tie = ComputeBatchLoss(model_, zero_, batch_, LossMode::HardThreshold(0.7));
  EXPECT_EQ(tie.utts_used, 1);
}

TEST_F(HandExample, FullyExcludedBatchIsSkipped) {
  const auto l = ComputeBatchLoss(model_, zero_, batch_, LossMode::HardThreshold(0.9));
  EXPECT_TRUE(l.skipped);
  EXPECT_EQ(l.utts_used, 0);
  EXPECT_EQ(l.tokens_used, 0);
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.gradient.SquaredNorm(), 0.0);
  EXPECT_EQ(l.gradient.size(), model_.num_params());
}

TEST(BatchLossTest, ErrorPaths) {
  const LanguageModel model(Config(5));
  const ParamVector p(model.num_params());
  EXPECT_THROW(ComputeBatchLoss(model, p, {}, LossMode::All()), DataError);
  EXPECT_THROW(ComputeBatchLoss(model, p, {Utt({}, {})}, LossMode::All()), DataError);
}

class RandomBatch : public ::testing::Test {
 protected:
  void SetUp() override {
    testutil::Lcg gen(5);
    batch_ = testutil::RandomUtterances(gen, 5, 7, 1, 6);
    params_ = model_.Init(3, 0.5);
  }
  BatchLoss Run(const LossMode& mode) const {
    return ComputeBatchLoss(model_, params_, batch_, mode);
  }
  LanguageModel model_{Config(7)};
  ParamVector params_;
  std::vector<Utterance> batch_;
};

TEST_F(RandomBatch, UnitConfidencesCollapseEveryMode) {
  for (auto& u : batch_) std::fill(u.confidences.begin(), u.confidences.end(), 1.0);
  const auto all = Run(LossMode::All());
  for (const auto& mode : {LossMode::TokenWeight(), LossMode::UttWeight(),
                           LossMode::HardThreshold(0.0), LossMode::HardThreshold(1.0)}) {
    const auto l = Run(mode);
    EXPECT_EQ(l.value, all.value) << mode.ToString();
    EXPECT_TRUE(testutil::BitwiseEqual(l.gradient.values(), all.gradient.values()))
        << mode.ToString();
  }
}

TEST_F(RandomBatch, HardZeroEqualsAll) {
  const auto all = Run(LossMode::All());
  const auto hard = Run(LossMode::HardThreshold(0.0));
  EXPECT_EQ(hard.value, all.value);
  EXPECT_EQ(hard.gradient, all.gradient);
}

TEST_F(RandomBatch, SingleTokenUtterancesMakeUttEqualToken) {
  testutil::Lcg gen(8);
  batch_ = testutil::RandomUtterances(gen, 6, 7, 1, 1);
  const auto utt = Run(LossMode::UttWeight());
  const auto tok = Run(LossMode::TokenWeight());
  EXPECT_EQ(utt.value, tok.value);
  EXPECT_EQ(utt.gradient, tok.gradient);
}

TEST_F(RandomBatch, NonNegative) {
  for (const auto& mode : {LossMode::All(), LossMode::UttWeight(), LossMode::TokenWeight(),
                           LossMode::HardThreshold(0.4)}) {
    const auto l = Run(mode);
    if (!l.skipped) EXPECT_GE(l.value, 0.0);
  }
}

TEST_F(RandomBatch, ConfidenceScalingScalesWeightedLosses) {
  const auto utt = Run(LossMode::UttWeight());
  const auto tok = Run(LossMode::TokenWeight());
  const auto hard = Run(LossMode::HardThreshold(0.45));
  for (double lambda : {0.5, 0.3}) {
    auto scaled = batch_;
    for (auto& u : scaled) {
      for (double& c : u.confidences) c *= lambda;
    }
    const auto utt_s = ComputeBatchLoss(model_, params_, scaled, LossMode::UttWeight());
    const auto tok_s = ComputeBatchLoss(model_, params_, scaled, LossMode::TokenWeight());
    EXPECT_NEAR(utt_s.value, lambda * utt.value, 1e-12 * utt.value);
    EXPECT_NEAR(tok_s.value, lambda * tok.value, 1e-12 * tok.value);
    for (size_t i = 0; i < params_.size(); ++i) {
      EXPECT_NEAR(utt_s.gradient[i], lambda * utt.gradient[i], 1e-12);
      EXPECT_NEAR(tok_s.gradient[i], lambda * tok.gradient[i], 1e-12);
    }
    // Mean confidence of a scaled utterance can differ from lambda * mean by
    // rounding, so compare the retained set on a threshold away from ties.
    const auto hard_s =
        ComputeBatchLoss(model_, params_, scaled, LossMode::HardThreshold(0.45 * lambda));
    EXPECT_EQ(hard_s.utts_used, hard.utts_used);
    EXPECT_EQ(hard_s.tokens_used, hard.tokens_used);
  }
}

TEST_F(RandomBatch, PowerOfTwoScalingIsExact) {
  const auto tok = Run(LossMode::TokenWeight());
  for (auto& u : batch_) {
    for (double& c : u.confidences) c *= 0.5;
  }
  const auto half = Run(LossMode::TokenWeight());
  EXPECT_EQ(half.value, 0.5 * tok.value);
  for (size_t i = 0; i < params_.size(); ++i) EXPECT_EQ(half.gradient[i], 0.5 * tok.gradient[i]);
}

TEST_F(RandomBatch, AllIgnoresConfidences) {
  const auto a = Run(LossMode::All());
  for (auto& u : batch_) {
    for (double& c : u.confidences) c = 1.0 - c;
  }
  const auto b = Run(LossMode::All());
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.gradient, b.gradient);
}

TEST_F(RandomBatch, GroundTruthFlagsAreNeverRead) {
  const auto base = Run(LossMode::TokenWeight());
  for (auto& u : batch_) u.correct_flags = std::vector<bool>(u.tokens.size(), false);
  for (const auto& mode : {LossMode::All(), LossMode::UttWeight(), LossMode::TokenWeight(),
                           LossMode::HardThreshold(0.5)}) {
    auto flagged = batch_;
    auto plain = batch_;
    for (auto& u : plain) u.correct_flags.reset();
    const auto f = ComputeBatchLoss(model_, params_, flagged, mode);
    const auto p = ComputeBatchLoss(model_, params_, plain, mode);
    EXPECT_EQ(f.value, p.value);
    EXPECT_EQ(f.gradient, p.gradient);
  }
  EXPECT_EQ(Run(LossMode::TokenWeight()).value, base.value);
}

TEST_F(RandomBatch, GradientMatchesFiniteDifferencesInEveryMode) {
  for (const auto& mode : {LossMode::All(), LossMode::UttWeight(), LossMode::TokenWeight(),
                           LossMode::HardThreshold(0.45)}) {
    const auto l = Run(mode);
    testutil::Lcg gen(31);
    for (int trial = 0; trial < 20; ++trial) {
      const size_t i = static_cast<size_t>(gen.Int(static_cast<int>(params_.size())));
      ParamVector plus = params_, minus = params_;
      plus[i] += 1e-5;
      minus[i] -= 1e-5;
      const double fd = (ComputeBatchLoss(model_, plus, batch_, mode).value -
                         ComputeBatchLoss(model_, minus, batch_, mode).value) /
                        2e-5;
      const double denom = std::max(1e-8, std::abs(fd) + std::abs(l.gradient[i]));
      EXPECT_LT(std::abs(fd - l.gradient[i]) / denom, 1e-4)
          << mode.ToString() << " index " << i;
    }
  }
}

TEST_F(RandomBatch, HardThresholdMatchesAllOnRetainedSubset) {
  std::vector<double> confs;
  for (const auto& u : batch_) confs.push_back(UtteranceConfidence(u));
  std::sort(confs.begin(), confs.end());
  const double c = confs[confs.size() / 2];
  std::vector<Utterance> kept;
  for (const auto& u : batch_) {
    if (UtteranceConfidence(u) >= c) kept.push_back(u);
  }
  ASSERT_FALSE(kept.empty());
  ASSERT_LT(kept.size(), batch_.size());
  const auto hard = Run(LossMode::HardThreshold(c));
  const auto all = ComputeBatchLoss(model_, params_, kept, LossMode::All());
  EXPECT_EQ(hard.value, all.value);
  EXPECT_EQ(hard.gradient, all.gradient);
}

TEST(ScoreEosTest, TokenModeUsesUtteranceMeanAtEos) {
  ModelConfig cfg = Config(5);
  cfg.score_eos = true;
  const LanguageModel model(cfg);
  const ParamVector zero(model.num_params());
  const std::vector<Utterance> batch = {Utt({3, 4}, {0.2, 0.6})};
  // Three scored positions, each -ln 5: (0.2 + 0.6 + 0.4) / 3 * ln 5.
  const auto l = ComputeBatchLoss(model, zero, batch, LossMode::TokenWeight());
  EXPECT_NEAR(l.value, 0.4 * std::log(5.0), 1e-12);
  EXPECT_EQ(l.tokens_used, 2);
}

}  // namespace
}  // namespace fedlm
