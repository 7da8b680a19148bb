// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "fusionforge/error.hpp"
#include "fusionforge/fusion.hpp"
#include "fusionforge/synthgen.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fusionforge {
namespace {

oracle::Mat to_mat(const Matrix& m) {
  oracle::Mat out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

std::vector<double> affine(const std::vector<double>& x, const Matrix& w, const Matrix& b) {
  oracle::Mat y = oracle::matmul({x}, to_mat(w));
  for (std::size_t c = 0; c < y[0].size(); ++c) y[0][c] += b(0, c);
  return y[0];
}

TEST(GroupSpec, ParseAndName) {
  const GroupSpec g = GroupSpec::parse("audio,text+vision");
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.name(), "audio+text+vision");
  EXPECT_EQ(GroupSpec::parse(g.name()), g);
  EXPECT_THROW(GroupSpec::parse(""), ValidationError);
  EXPECT_THROW(GroupSpec::parse("audio,audio"), ValidationError);
  EXPECT_THROW(GroupSpec::parse("audio,,text"), ValidationError);
  EXPECT_THROW(GroupSpec::parse("Audio"), ValidationError);
  EXPECT_EQ(parse_fusion_mode("concat"), FusionMode::kConcat);
  EXPECT_THROW(parse_fusion_mode("sum"), ValidationError);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z;
    for (int i = 0; i < 1 + t % 9; ++i) z.push_back(rng.uniform(-50, 50));
    const auto p = softmax(z);
    double s = 0;
    for (double v : p) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += 700.0;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
    const auto r = oracle::softmax(z);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], r[i], 1e-14);
  }
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1u);
}

TEST(Attention, MatchesStraightLineReference) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto prob = testutil::random_problem(seed, 4);
    const auto& a = *prob.model.params().attention;
    oracle::Mat h;
    for (const Token& t : prob.example.tokens) {
      const Projection& p = a.projections.at(t.modality);
      h.push_back(affine(t.values, p.weight, p.bias));
    }
    const auto want = oracle::attend_mean(h, to_mat(a.query), to_mat(a.key), to_mat(a.value));
    const auto got = prob.model.fuse(prob.example.tokens);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);

    const FusionHead& hd = prob.model.params().head;
    const auto probs = oracle::softmax(affine(affine(want, hd.w_z, hd.b_z), hd.w_smax, hd.b_smax));
    const Prediction pred = prob.model.predict(prob.example.tokens);
    for (std::size_t i = 0; i < probs.size(); ++i) EXPECT_NEAR(pred.probs[i], probs[i], 1e-12);
  }
}

TEST(Attention, SingleTokenReducesToValueProjection) {
  const auto prob = testutil::random_problem(3, 3);
  const auto& a = *prob.model.params().attention;
  const Token& t = prob.example.tokens.front();
  std::vector<Token> one = {t};
  const auto h = affine(t.values, a.projections.at(t.modality).weight,
                        a.projections.at(t.modality).bias);
  const auto want = oracle::matmul({h}, to_mat(a.value))[0];
  const auto got = attention_fuse(one, a);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Concat, FeedsConcatenationToHead) {
  const auto prob = testutil::random_problem(8, 5, FusionMode::kConcat);
  EXPECT_FALSE(prob.model.params().attention.has_value());
  EXPECT_EQ(prob.model.fuse(prob.example.tokens), concatenate(prob.example.tokens));
}

TEST(Forward, RejectsNonFiniteAndBadShapes) {
  const auto prob = testutil::random_problem(2, 3);
  auto tokens = prob.example.tokens;
  tokens[0].values[0] = std::nan("");
  EXPECT_THROW(prob.model.predict(tokens), NumericError);
  tokens = prob.example.tokens;
  tokens[0].values.push_back(1.0);
  EXPECT_THROW(prob.model.predict(tokens), ValidationError);
  tokens = prob.example.tokens;
  tokens.pop_back();
  if (!tokens.empty()) {
    EXPECT_THROW(prob.model.predict(tokens), ValidationError);
  }
}

TEST(GradCheck, AnalyticMatchesNumeric) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    for (FusionMode mode : {FusionMode::kAttention, FusionMode::kConcat}) {
      const auto prob = testutil::random_problem(seed, 2 + seed % 7, mode);
      const GradCheckReport r = grad_check(prob.model, prob.example, 1e-4);
      EXPECT_LT(r.max_relative_error, 1e-4) << seed << " " << r.worst_parameter;
      EXPECT_EQ(r.checked, prob.model.parameter_count());
    }
  }
}

TEST(GradCheck, DetectsACorruptedGradient) {
  const auto prob = testutil::random_problem(7, 4);
  FusionParams g = prob.model.params().zeros_like();
  loss_and_gradient(prob.model, prob.example, g);
  g.head.w_smax(0, 0) += 0.5;
  const GradCheckReport r = compare_gradient(prob.model, prob.example, 1e-4, g);
  EXPECT_GT(r.max_relative_error, 1e-2);
  EXPECT_TRUE(r.worst_parameter.starts_with("head.w_smax")) << r.worst_parameter;
  EXPECT_THROW(grad_check(prob.model, prob.example, 1.0), ValidationError);
}

TEST(Train, LossDropsAndIsDeterministic) {
  SynthConfig sc;
  sc.labeled = 120;
  sc.unlabeled = 0;
  sc.val = 60;
  sc.test = 0;
  sc.noise = 0.5;
  sc.modalities = {{modality::kAudio, 8}, {modality::kText, 8}};
  const SynthResult data = generate(sc);
  TrainConfig cfg;
  cfg.d_model = 8;
  cfg.d_z = 8;
  cfg.epochs = 15;
  cfg.learning_rate = 5e-3;
  const GroupSpec spec = GroupSpec::parse("audio,text");
  const FusionModel a = train(data.dataset, spec, cfg);
  const FusionModel b = train(data.dataset, spec, cfg);
  EXPECT_TRUE(a.same_parameters(b));
  const auto& losses = a.meta().epoch_losses;
  ASSERT_EQ(losses.size(), cfg.epochs + 1);
  EXPECT_LT(losses.back(), 0.5 * losses.front());
  EXPECT_NEAR(losses.front(), std::log(6.0), 0.5);

  cfg.seed = 1;
  EXPECT_FALSE(a.same_parameters(train(data.dataset, spec, cfg)));

  const auto ids = data.dataset.ids(Split::kVal);
  const auto pred = predict_labels(a, data.dataset, ids);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) hits += pred[i] == data.dataset.entry(ids[i]).label;
  EXPECT_GT(hits, ids.size() * 8 / 10);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto prob = testutil::random_problem(1, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.d_model = prob.model.d_model();
  cfg.d_z = prob.model.d_z();
  std::vector<Example> ex = {prob.example};
  const FusionModel m = train(ex, prob.model.label_vocab(), prob.model.spec(), prob.model.dims(), cfg);
  EXPECT_EQ(m.meta().epoch_losses.size(), 1u);
  EXPECT_DOUBLE_EQ(m.meta().final_loss, m.meta().epoch_losses.front());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    EXPECT_THROW(t.validate(), ConfigError);
  };
  bad([](TrainConfig& t) { t.learning_rate = 0; });
  bad([](TrainConfig& t) { t.batch_size = 0; });
  bad([](TrainConfig& t) { t.d_model = 0; });
  bad([](TrainConfig& t) { t.d_z = 0; });
  bad([](TrainConfig& t) { t.weight_decay = -1; });
  bad([](TrainConfig& t) { t.beta1 = 1.0; });
  bad([](TrainConfig& t) { t.rng = "lcg"; });
}

TEST(ModelFile, RoundTripIsExact) {
  testutil::TempDir dir("model");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto prob = testutil::random_problem(seed, 6, seed % 2 ? FusionMode::kConcat : FusionMode::kAttention);
    // Only float32-representable parameters survive the file format exactly.
    prob.model.mutable_params().visit(prob.model.spec().modalities(),
                                      [](const std::string&, Matrix& m, bool) {
                                        for (double& x : m.flat()) x = static_cast<float>(x);
                                      });
    const auto bytes = encode_model(prob.model);
    const FusionModel back = decode_model(bytes);
    EXPECT_TRUE(back.same_parameters(prob.model));
    EXPECT_EQ(back.spec(), prob.model.spec());
    EXPECT_EQ(back.label_vocab(), prob.model.label_vocab());
    EXPECT_EQ(encode_model(back), bytes);
    const auto path = dir / ("m" + std::to_string(seed) + ".bin");
    save_model(prob.model, path);
    EXPECT_EQ(encode_model(load_model(path)), bytes);
  }
}

TEST(ModelFile, CorruptionIsReported) {
  const auto prob = testutil::random_problem(4, 3);
  auto bytes = encode_model(prob.model);
  for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
    EXPECT_THROW(decode_model(std::span(bytes.data(), len)), FormatError) << len;
  }
  auto versioned = bytes;
  versioned[4] = std::byte{9};
  try {
    decode_model(versioned);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatErrorCode::kUnsupportedVersion);
  }
  bytes.push_back(std::byte{1});
  EXPECT_THROW(decode_model(bytes), FormatError);
}

TEST(ModelFile, SidecarCarriesTrainingMetadata) {
  testutil::TempDir dir("sidecar");
  auto prob = testutil::random_problem(9, 3);
  TrainingMeta meta;
  meta.config.seed = 42;
  meta.final_loss = 0.25;
  meta.epoch_losses = {1.0, 0.5, 0.25};
  prob.model.set_meta(meta);
  save_model(prob.model, dir / "m.bin");
  const FusionModel back = load_model(dir / "m.bin");
  EXPECT_EQ(back.meta().config.seed, 42u);
  EXPECT_EQ(back.meta().epoch_losses, meta.epoch_losses);
  EXPECT_NE(testutil::slurp(dir / "m.bin.json").find("\"group_spec\""), std::string::npos);
}

}  // namespace
}  // namespace fusionforge
