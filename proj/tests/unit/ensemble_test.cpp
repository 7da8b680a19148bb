// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fusionforge/ensemble.hpp"
#include "fusionforge/error.hpp"
#include "fusionforge/synthgen.hpp"
#include "oracles.hpp"

namespace fusionforge {
namespace {

constexpr std::size_t A = 0, B = 1, C = 2, D = 3;

std::size_t vote_label(std::vector<std::size_t> p) { return vote(p).label; }

TEST(Vote, HandTracedCases) {
  EXPECT_EQ(vote_label({A, B, A, B}), A);
  EXPECT_EQ(vote_label({A, A, A, B}), A);
  EXPECT_EQ(vote_label({A, B, C, D}), A);
  EXPECT_EQ(vote_label({B, A, A, B}), A);  // tie, drop last B, A wins 2:1
  EXPECT_EQ(vote_label({C}), C);
}

TEST(Vote, TraceRecordsEliminations) {
  const std::vector<std::size_t> p = {A, B, C, D};
  const VoteTrace t = vote(p);
  ASSERT_EQ(t.rounds.size(), 4u);
  EXPECT_EQ(t.rounds[0].modes, (std::vector<std::size_t>{A, B, C, D}));
  EXPECT_EQ(t.rounds[0].eliminated, 3u);
  EXPECT_EQ(t.rounds[2].active, (std::vector<std::size_t>{A, B}));
  EXPECT_FALSE(t.rounds[3].eliminated.has_value());
  EXPECT_EQ(vote(std::vector<std::size_t>{A, A, B}).rounds.size(), 1u);
  EXPECT_THROW(vote(std::vector<std::size_t>{}), ValidationError);
}

TEST(Vote, ExhaustiveAgainstOracle) {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 4;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<std::size_t> p;
      for (std::size_t c = code, i = 0; i < n; ++i, c /= 4) p.push_back(c % 4);
      ASSERT_EQ(vote_label(p), oracle::ranked_vote(p));
    }
  }
}

TEST(Ranking, ScoreThenId) {
  const auto r = rank_by_score({{"b", 0.5}, {"a", 0.5}, {"c", 0.9}});
  EXPECT_EQ(r[0].id, "c");
  EXPECT_EQ(r[1].id, "a");
  EXPECT_EQ(r[2].id, "b");
}

TEST(EnsembleVote, AlignedInputs) {
  std::vector<std::vector<std::size_t>> per = {{0, 1}, {1, 1}, {0, 2}};
  const EnsembleResult r = ensemble_vote(per, {"x", "y"});
  EXPECT_EQ(r.labels, (std::vector<std::size_t>{0, 1}));
  per[1].pop_back();
  EXPECT_THROW(ensemble_vote(per, {"x", "y"}), ValidationError);
}

TEST(EnsemblePredict, RanksTrainedModelsAndChecksVocab) {
  SynthConfig sc;
  sc.labeled = 90;
  sc.unlabeled = 0;
  sc.val = 45;
  sc.test = 30;
  sc.num_classes = 3;
  sc.modalities = {{modality::kAudio, 4}, {modality::kText, 4}};
  const SynthResult data = generate(sc);
  TrainConfig cfg;
  cfg.d_model = 4;
  cfg.d_z = 4;
  cfg.epochs = 5;
  std::vector<NamedModel> models;
  for (const char* g : {"audio", "text", "audio,text"}) {
    models.push_back({g, train(data.dataset, GroupSpec::parse(g), cfg)});
  }
  const auto ranking = rank_models(models, data.dataset);
  ASSERT_EQ(ranking.size(), 3u);
  EXPECT_GE(ranking[0].score, ranking[1].score);
  const auto ranked = apply_ranking(models, ranking);
  EXPECT_EQ(ranked[0].id, ranking[0].id);
  const EnsembleResult r = ensemble_predict(ranked, data.dataset, Split::kTest);
  EXPECT_EQ(r.sample_ids, data.dataset.ids(Split::kTest));

  std::vector<NamedModel> mismatched = {models[0]};
  const auto other = init_model({"p", "q", "r"}, GroupSpec::parse("audio"), {4}, cfg);
  mismatched.push_back({"other", other});
  EXPECT_THROW(ensemble_predict(mismatched, data.dataset, Split::kTest), ConfigError);
}

}  // namespace
}  // namespace fusionforge
