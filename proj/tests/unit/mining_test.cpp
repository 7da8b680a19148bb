// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "fusionforge/error.hpp"
#include "fusionforge/mining.hpp"
#include "fusionforge/synthgen.hpp"
#include "oracles.hpp"

namespace fusionforge {
namespace {

TEST(PseudoLabel, ExhaustiveAgainstRule) {
  for (std::size_t code = 0; code < 256; ++code) {
    std::vector<std::size_t> p;
    for (std::size_t c = code, i = 0; i < 4; ++i, c /= 4) p.push_back(c % 4);
    const auto got = pseudo_label(p);
    const auto want = oracle::three_of_four(p);
    ASSERT_EQ(got.has_value(), want.has_value()) << code;
    if (got) {
      EXPECT_EQ(got->label, *want);
      EXPECT_EQ(got->agreement, static_cast<std::size_t>(std::count(p.begin(), p.end(), *want)));
    }
  }
  EXPECT_THROW(pseudo_label(std::vector<std::size_t>{1, 1, 1}), ValidationError);
}

TEST(Partition, BalancedDisjointCover) {
  std::vector<std::string> items;
  for (int i = 0; i < 23; ++i) items.push_back("s" + std::to_string(i));
  const auto parts = partition(items, 4, 99);
  ASSERT_EQ(parts.size(), 4u);
  std::multiset<std::string> seen;
  std::size_t lo = items.size(), hi = 0;
  for (const auto& p : parts) {
    EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
    seen.insert(p.begin(), p.end());
    lo = std::min(lo, p.size());
    hi = std::max(hi, p.size());
  }
  EXPECT_LE(hi - lo, 1u);
  EXPECT_EQ(seen, std::multiset<std::string>(items.begin(), items.end()));
  EXPECT_EQ(partition(items, 4, 99), parts);
  EXPECT_NE(partition(items, 4, 100), parts);
  EXPECT_THROW(partition(items, 0, 1), ValidationError);
}

TEST(Partition, StratifiedSpreadsEachClass) {
  std::vector<std::string> items;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 40; ++i) {
    items.push_back("s" + std::to_string(100 + i));
    labels.push_back(i < 8 ? 0 : 1);
  }
  const auto parts = partition_stratified(items, labels, 4, 5);
  for (const auto& p : parts) {
    EXPECT_EQ(p.size(), 10u);
    const auto zeros = std::count_if(p.begin(), p.end(), [](const std::string& s) { return s < "s108"; });
    EXPECT_EQ(zeros, 2);
  }
}

class MiningFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthConfig sc;
    sc.labeled = 60;
    sc.unlabeled = 200;
    sc.val = 60;
    sc.test = 0;
    sc.num_classes = 3;
    sc.noise = 1.0;
    sc.modalities = {{modality::kAudio, 6}, {modality::kText, 6}, {modality::kVision, 6},
                     {modality::kJointAudioText, 6}};
    data_ = new SynthResult(generate(sc));
    cfg_.d_model = 6;
    cfg_.d_z = 6;
    cfg_.epochs = 8;
    cfg_.learning_rate = 5e-3;
  }
  static void TearDownTestSuite() { delete data_; }
  static SynthResult* data_;
  static TrainConfig cfg_;
};
SynthResult* MiningFixture::data_ = nullptr;
TrainConfig MiningFixture::cfg_;

TEST_F(MiningFixture, PoolsStayDisjointAndShrink) {
  const Dataset& ds = data_->dataset;
  MiningState s = init_mining(ds, default_group_specs(), cfg_);
  ASSERT_EQ(s.history.size(), 1u);
  EXPECT_EQ(s.unlabeled.size(), 200u);
  for (int it = 1; it <= 3; ++it) {
    const std::size_t before = s.unlabeled.size();
    s = mine_iteration(s, ds, cfg_);
    const IterationRecord& rec = s.history.back();
    EXPECT_EQ(rec.iteration, static_cast<std::size_t>(it));
    if (rec.admitted > 0) {
      EXPECT_LT(s.unlabeled.size(), before);
    }
    EXPECT_EQ(s.unlabeled.size() + s.pseudo.size(), 200u);
    std::set<std::string> u(s.unlabeled.begin(), s.unlabeled.end());
    std::set<std::string> l(s.labeled.begin(), s.labeled.end());
    std::size_t owned = 0;
    for (const auto& share : s.learner_pseudo) owned += share.size();
    EXPECT_EQ(owned, s.pseudo.size());
    for (const auto& [id, p] : s.pseudo) {
      EXPECT_FALSE(u.count(id));
      EXPECT_FALSE(l.count(id));
      EXPECT_GE(p.agreement, kMinAgreement);
    }
    for (std::size_t i = 0; i < kLearnerCount; ++i) {
      EXPECT_EQ(rec.train_sizes[i], s.labeled.size() + s.learner_pseudo[i].size());
    }
  }
}

TEST_F(MiningFixture, DeterministicAcrossThreadCounts) {
  MiningConfig one;
  MiningConfig four;
  four.threads = 4;
  const MiningState a = run_mining(data_->dataset, default_group_specs(), 2, cfg_, one);
  const MiningState b = run_mining(data_->dataset, default_group_specs(), 2, cfg_, four);
  EXPECT_EQ(history_json(a), history_json(b));
  for (std::size_t i = 0; i < kLearnerCount; ++i) EXPECT_TRUE(a.learners[i].same_parameters(b.learners[i]));
}

TEST_F(MiningFixture, ZeroIterationsAndHistoryJson) {
  const MiningState s = run_mining(data_->dataset, default_group_specs(), 0, cfg_);
  const auto j = nlohmann::json::parse(history_json(s));
  ASSERT_TRUE(j.is_object());
  EXPECT_EQ(j.at("iterations").size(), 1u);
}

TEST_F(MiningFixture, RequiresFourSpecs) {
  std::vector<GroupSpec> three(3, GroupSpec::parse("audio"));
  EXPECT_THROW(init_mining(data_->dataset, three, cfg_), ValidationError);
  std::vector<GroupSpec> bad(4, GroupSpec::parse("depth"));
  EXPECT_THROW(init_mining(data_->dataset, bad, cfg_), ValidationError);
}

}  // namespace
}  // namespace fusionforge
