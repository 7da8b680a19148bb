// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fusionforge/csv.hpp"
#include "fusionforge/error.hpp"
#include "fusionforge/synthgen.hpp"
#include "test_util.hpp"

namespace fusionforge {
namespace {

SynthConfig small(std::uint64_t seed = 0) {
  SynthConfig c;
  c.seed = seed;
  c.labeled = 30;
  c.unlabeled = 40;
  c.val = 20;
  c.test = 10;
  c.modalities = {{modality::kAudio, 6}, {modality::kText, 7}};
  return c;
}

TEST(SynthConfig, Validation) {
  auto bad = [](auto mutate) {
    SynthConfig c = small();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](SynthConfig& c) { c.modalities = {{modality::kAudio, 5}}; });  // 6 classes need dim >= 6
  bad([](SynthConfig& c) { c.conflict_rate = 1.5; });
  bad([](SynthConfig& c) { c.label_noise = -0.1; });
  bad([](SynthConfig& c) { c.num_classes = 1; });
  bad([](SynthConfig& c) { c.separation = 0; });
  bad([](SynthConfig& c) { c.rng = "xorshift"; });
  bad([](SynthConfig& c) { c.min_rows = 0; });
  EXPECT_EQ(small().resolved_vocab(), label_preset("mer6"));
  SynthConfig eight = small();
  eight.num_classes = 8;
  eight.modalities = {{modality::kAudio, 8}};
  EXPECT_EQ(eight.resolved_vocab(), label_preset("mer8"));
}

TEST(Synth, NoiselessMeansAreEquidistant) {
  SynthConfig c = small();
  c.noise = 0.0;
  c.separation = 3.0;
  const SynthResult r = generate(c);
  for (const SynthModality& m : c.modalities) {
    std::map<std::size_t, std::vector<double>> mean;
    for (const SynthSample& s : r.samples) {
      const auto f = r.dataset.features(m.id, s.sample_id);
      auto [it, fresh] = mean.emplace(s.true_label, std::vector<double>(f.begin(), f.end()));
      if (!fresh) {
        for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], it->second[i], 1e-5);
      }
    }
    ASSERT_EQ(mean.size(), c.num_classes);
    for (const auto& [a, va] : mean) {
      for (const auto& [b, vb] : mean) {
        if (a >= b) continue;
        double d2 = 0;
        for (std::size_t i = 0; i < va.size(); ++i) d2 += (va[i] - vb[i]) * (va[i] - vb[i]);
        EXPECT_NEAR(std::sqrt(d2), 3.0, 1e-5);
      }
    }
  }
}

TEST(Synth, SplitsLabelsAndRows) {
  const SynthResult r = generate(small());
  EXPECT_EQ(r.dataset.ids(Split::kTrain).size(), 30u);
  EXPECT_EQ(r.dataset.ids(Split::kUnlabeled).size(), 40u);
  for (const SynthSample& s : r.samples) {
    const auto& e = r.dataset.entry(s.sample_id);
    EXPECT_EQ(e.label.has_value(), s.split == Split::kTrain || s.split == Split::kVal);
    if (s.split == Split::kVal) {
      EXPECT_EQ(*e.label, s.true_label);
    }
  }
  for (const auto& [m, recs] : r.records) {
    for (const FeatureRecord& rec : recs) {
      EXPECT_GE(rec.rows, 3u);
      EXPECT_LE(rec.rows, 10u);
    }
  }
}

TEST(Synth, ConflictRateIsHonored) {
  SynthConfig c;
  c.labeled = 5000;
  c.unlabeled = c.val = c.test = 0;
  c.conflict_rate = 0.3;
  c.min_rows = c.max_rows = 1;
  c.modalities = {{modality::kAudio, 6}, {modality::kText, 6}};
  const SynthResult r = generate(c);
  std::size_t conflicted = 0;
  for (const SynthSample& s : r.samples) {
    if (s.conflict_modality) {
      ++conflicted;
      EXPECT_NE(s.conflict_class, s.true_label);
    }
  }
  EXPECT_NEAR(static_cast<double>(conflicted) / 5000.0, 0.3, 0.02);
}

TEST(Synth, LabelNoiseOnlyTouchesTrain) {
  SynthConfig c = small();
  c.labeled = 2000;
  c.label_noise = 0.25;
  const SynthResult r = generate(c);
  std::size_t flipped = 0;
  for (const SynthSample& s : r.samples) {
    if (s.split == Split::kTrain) {
      flipped += *s.observed_label != s.true_label;
    } else if (s.observed_label) {
      EXPECT_EQ(*s.observed_label, s.true_label);
    }
  }
  EXPECT_NEAR(static_cast<double>(flipped) / 2000.0, 0.25, 0.03);
}

TEST(Synth, SeedDeterminesBytes) {
  testutil::TempDir a("syn_a"), b("syn_b"), c("syn_c");
  write_synth(generate(small(3)), a.path());
  write_synth(generate(small(3)), b.path());
  write_synth(generate(small(4)), c.path());
  for (const char* f : {"manifest.csv", "audio.mmf", "text.mmf", "answers.csv"}) {
    EXPECT_EQ(testutil::slurp(a / f), testutil::slurp(b / f)) << f;
  }
  EXPECT_NE(testutil::slurp(a / "audio.mmf"), testutil::slurp(c / "audio.mmf"));
}

TEST(Synth, WrittenFilesLoadBackAndAnswersAreSealed) {
  testutil::TempDir dir("syn_load");
  const SynthResult r = generate(small(1));
  const SynthPaths p = write_synth(r, dir.path());
  std::vector<ModalitySource> src;
  for (const auto& m : r.dataset.modalities()) src.push_back({m.id, m.dim, p.features.at(m.id)});
  LoadOptions opt;
  opt.label_vocab = r.label_vocab;
  EXPECT_EQ(load_dataset(p.manifest, src, opt), r.dataset);

  const auto answers = read_answers(p.answers, r.label_vocab);
  EXPECT_EQ(answers.size(), 70u);
  for (const SynthSample& s : r.samples) {
    if (s.split != Split::kTrain) {
      EXPECT_EQ(answers.at(s.sample_id), s.true_label);
    }
  }
  const csv::Table manifest = csv::read_file(p.manifest);
  for (const csv::Row& row : manifest.rows) {
    if (row[1] == "unlabeled" || row[1] == "test") {
      EXPECT_EQ(row[2], "");
    }
  }
}

TEST(Synth, AlternateEngine) {
  SynthConfig c = small();
  c.rng = "mt19937_64";
  const SynthResult a = generate(c);
  EXPECT_EQ(generate(c).dataset, a.dataset);
  EXPECT_FALSE(generate(small()).dataset == a.dataset);
}

}  // namespace
}  // namespace fusionforge
