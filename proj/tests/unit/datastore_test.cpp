// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "fusionforge/csv.hpp"
#include "fusionforge/datastore.hpp"
#include "fusionforge/error.hpp"
#include "fusionforge/rng.hpp"
#include "test_util.hpp"

namespace fusionforge {
namespace {

std::vector<FeatureRecord> random_records(Rng& rng, std::uint32_t dim, std::size_t n) {
  std::vector<FeatureRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureRecord r;
    r.sample_id = "id_" + std::to_string(i) + "_" + std::to_string(rng.below(1000));
    r.dim = dim;
    r.rows = static_cast<std::uint32_t>(1 + rng.below(4));
    for (std::size_t v = 0; v < std::size_t{r.rows} * dim; ++v) {
      r.values.push_back(static_cast<float>(rng.normal()));
    }
    out.push_back(std::move(r));
  }
  return out;
}

TEST(ModalityId, Validation) {
  EXPECT_TRUE(ModalityId::is_valid("audio"));
  EXPECT_TRUE(ModalityId::is_valid("_x9"));
  EXPECT_FALSE(ModalityId::is_valid(""));
  EXPECT_FALSE(ModalityId::is_valid("9a"));
  EXPECT_FALSE(ModalityId::is_valid("Audio"));
  EXPECT_FALSE(ModalityId::is_valid("a-b"));
  EXPECT_THROW(ModalityId("Bad"), ValidationError);
  EXPECT_EQ(canonical_dim(modality::kAudio), 1024u);
  EXPECT_EQ(canonical_dim(modality::kText), 5120u);
  EXPECT_EQ(canonical_dim(modality::kVision), 768u);
  EXPECT_EQ(canonical_dim(modality::kJointAudioText), 4096u);
  EXPECT_FALSE(canonical_dim(ModalityId("depth")).has_value());
}

TEST(FeatureFile, RoundTripPreservesEverything) {
  Rng rng(11);
  const auto records = random_records(rng, 5, 7);
  const auto bytes = encode_feature_file(records, 5);
  const auto back = decode_feature_file(bytes);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].sample_id, records[i].sample_id);
    EXPECT_EQ(back[i].rows, records[i].rows);
    EXPECT_EQ(back[i].values, records[i].values);
  }
  EXPECT_EQ(encode_feature_file(back, 5), bytes);
}

TEST(FeatureFile, HeaderLayoutIsLittleEndian) {
  FeatureRecord r{"ab", 2, 1, {1.0f, -2.0f}};
  const auto bytes = encode_feature_file(std::span(&r, 1), 2);
  // magic(4) dim(4) count(8) id_len(2) id(2) rows(4) payload(8)
  ASSERT_EQ(bytes.size(), 4u + 4 + 8 + 2 + 2 + 4 + 8);
  EXPECT_EQ(std::memcmp(bytes.data(), "MMF1", 4), 0);
  EXPECT_EQ(std::to_integer<int>(bytes[4]), 2);
  EXPECT_EQ(std::to_integer<int>(bytes[8]), 1);
  EXPECT_EQ(std::to_integer<int>(bytes[16]), 2);
  float f = 0;
  std::memcpy(&f, bytes.data() + 28, 4);
  EXPECT_EQ(f, -2.0f);
}

TEST(FeatureFile, BadMagic) {
  Rng rng(1);
  auto bytes = encode_feature_file(random_records(rng, 3, 2), 3);
  bytes[0] = std::byte{'X'};
  try {
    decode_feature_file(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatErrorCode::kBadMagic);
  }
}

TEST(FeatureFile, EveryTruncationIsReported) {
  Rng rng(2);
  const auto bytes = encode_feature_file(random_records(rng, 3, 3), 3);
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    std::span<const std::byte> cut(bytes.data(), len);
    try {
      decode_feature_file(cut);
      FAIL() << "length " << len;
    } catch (const FormatError& e) {
      if (len >= 4) {
        EXPECT_EQ(e.code(), FormatErrorCode::kTruncated) << len;
      }
    }
  }
}

TEST(FeatureFile, TrailingBytesAreACountMismatch) {
  Rng rng(3);
  auto bytes = encode_feature_file(random_records(rng, 2, 2), 2);
  bytes.push_back(std::byte{0});
  try {
    decode_feature_file(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatErrorCode::kCountMismatch);
  }
}

TEST(FeatureFile, RejectsDimMismatchAndDuplicates) {
  FeatureRecord a{"a", 3, 1, {1, 2, 3}};
  EXPECT_THROW(encode_feature_file(std::span(&a, 1), 4), FormatError);
  std::vector<FeatureRecord> dup = {a, a};
  EXPECT_THROW(encode_feature_file(dup, 3), ValidationError);
}

TEST(FeatureFile, FileRoundTrip) {
  testutil::TempDir dir("ff");
  Rng rng(4);
  const auto records = random_records(rng, 4, 5);
  write_feature_file(records, 4, dir / "x.mmf");
  const auto back = read_feature_file(dir / "x.mmf");
  ASSERT_EQ(back.size(), 5u);
  write_feature_file(back, 4, dir / "y.mmf");
  EXPECT_EQ(testutil::slurp(dir / "x.mmf"), testutil::slurp(dir / "y.mmf"));
  EXPECT_THROW(read_feature_file(dir / "missing.mmf"), IoError);
}

TEST(Pooling, MeanAndMax) {
  Matrix m(3, 2);
  m(0, 0) = 1; m(0, 1) = -4;
  m(1, 0) = 2; m(1, 1) = -5;
  m(2, 0) = 6; m(2, 1) = -6;
  EXPECT_EQ(pool_sequence(m, Pooling::kMean), (std::vector<double>{3, -5}));
  EXPECT_EQ(pool_sequence(m, Pooling::kMax), (std::vector<double>{6, -4}));
  EXPECT_THROW(pool_sequence(Matrix(0, 2), Pooling::kMean), ValidationError);
  EXPECT_EQ(parse_pooling("max"), Pooling::kMax);
  EXPECT_THROW(parse_pooling("median"), ValidationError);
}

TEST(Pooling, RecordAndSingleRowIdentity) {
  FeatureRecord r{"a", 3, 1, {1.5f, 2.5f, -1.0f}};
  EXPECT_EQ(pool_sequence(r, Pooling::kMean), (std::vector<double>{1.5, 2.5, -1.0}));
  EXPECT_EQ(pool_sequence(r, Pooling::kMax), (std::vector<double>{1.5, 2.5, -1.0}));
}

TEST(Manifest, RoundTripAndValidation) {
  testutil::TempDir dir("manifest");
  const auto& vocab = label_preset("mer6");
  ASSERT_EQ(vocab.size(), 6u);
  EXPECT_EQ(label_preset("mer8").size(), 8u);
  EXPECT_THROW(label_preset("mer7"), ConfigError);
  std::vector<ManifestEntry> entries = {
      {"s1", Split::kTrain, 2}, {"s2", Split::kUnlabeled, std::nullopt}, {"s3", Split::kVal, 0},
      {"s4", Split::kTest, std::nullopt}};
  write_manifest(dir / "m.csv", entries, vocab);
  EXPECT_EQ(read_manifest(dir / "m.csv", vocab), entries);

  std::vector<ManifestEntry> bad = {{"s1", Split::kTrain, std::nullopt}};
  EXPECT_THROW(write_manifest(dir / "b.csv", bad, vocab), ValidationError);
  std::ofstream(dir / "u.csv") << "sample_id,split,label\nq,unlabeled,happy\n";
  EXPECT_THROW(read_manifest(dir / "u.csv", vocab), ValidationError);
  std::ofstream(dir / "v.csv") << "sample_id,split,label\nq,train,bored\n";
  EXPECT_THROW(read_manifest(dir / "v.csv", vocab), ConfigError);
  std::ofstream(dir / "w.csv") << "sample_id,split,label\nq,holdout,\n";
  EXPECT_THROW(read_manifest(dir / "w.csv", vocab), ValidationError);
}

TEST(Dataset, ResolutionErrorListsEveryMissingPair) {
  Dataset::PooledMap pooled;
  pooled[modality::kAudio]["a"] = {1.0, 2.0};
  pooled[modality::kText]["b"] = {3.0};
  std::vector<ManifestEntry> entries = {{"a", Split::kTrain, 0}, {"b", Split::kTrain, 1}};
  try {
    Dataset ds({"x", "y"}, {{modality::kAudio, 2}, {modality::kText, 1}}, entries, pooled);
    FAIL();
  } catch (const ResolutionError& e) {
    const std::vector<ResolutionError::Missing> want = {{"audio", "b"}, {"text", "a"}};
    EXPECT_EQ(e.missing(), want);
  }
}

TEST(Dataset, OrderIndependentAndQueryable) {
  Dataset::PooledMap pooled;
  pooled[modality::kAudio]["a"] = {1.0};
  pooled[modality::kAudio]["b"] = {2.0};
  pooled[modality::kAudio]["zz_extra"] = {9.0};
  std::vector<ManifestEntry> e1 = {{"a", Split::kTrain, 0}, {"b", Split::kVal, 1}};
  std::vector<ManifestEntry> e2 = {e1[1], e1[0]};
  Dataset d1({"x", "y"}, {{modality::kAudio, 1}}, e1, pooled);
  Dataset d2({"x", "y"}, {{modality::kAudio, 1}}, e2, pooled);
  EXPECT_EQ(d1, d2);
  EXPECT_EQ(d1.ids(Split::kVal), std::vector<std::string>{"b"});
  EXPECT_EQ(d1.features(modality::kAudio, "b")[0], 2.0);
  EXPECT_FALSE(d1.contains("zz_extra"));
  EXPECT_THROW(d1.features(modality::kText, "a"), ResolutionError);
  EXPECT_THROW(d1.entry("nope"), ValidationError);
}

TEST(Dataset, RejectsBadInvariants) {
  Dataset::PooledMap pooled;
  pooled[modality::kAudio]["a"] = {1.0, 2.0};
  std::vector<ManifestEntry> e = {{"a", Split::kTrain, 0}};
  EXPECT_THROW(Dataset({"x"}, {{modality::kAudio, 3}}, e, pooled), ValidationError);
  EXPECT_THROW(Dataset({}, {{modality::kAudio, 2}}, e, pooled), ConfigError);
  EXPECT_THROW(Dataset({"x", "x"}, {{modality::kAudio, 2}}, e, pooled), ConfigError);
  std::vector<ManifestEntry> dup = {e[0], e[0]};
  EXPECT_THROW(Dataset({"x"}, {{modality::kAudio, 2}}, dup, pooled), ValidationError);
  std::vector<ManifestEntry> range = {{"a", Split::kTrain, 4}};
  EXPECT_THROW(Dataset({"x"}, {{modality::kAudio, 2}}, range, pooled), ValidationError);
}

TEST(Dataset, LoadFromFilesPoolsAndChecksDims) {
  testutil::TempDir dir("load");
  const std::vector<std::string> vocab = {"x", "y"};
  write_manifest(dir / "m.csv",
                 std::vector<ManifestEntry>{{"a", Split::kTrain, 1}, {"b", Split::kUnlabeled, {}}},
                 vocab);
  std::vector<FeatureRecord> recs = {{"a", 2, 2, {1, 2, 3, 4}}, {"b", 2, 1, {5, 6}},
                                     {"c", 2, 1, {0, 0}}};
  write_feature_file(recs, 2, dir / "audio.mmf");
  LoadOptions opt;
  opt.label_vocab = vocab;
  std::vector<ModalitySource> src = {{modality::kAudio, 2, dir / "audio.mmf"}};
  const Dataset ds = load_dataset(dir / "m.csv", src, opt);
  EXPECT_EQ(ds.features(modality::kAudio, "a")[0], 2.0);
  EXPECT_EQ(ds.features(modality::kAudio, "a")[1], 3.0);
  opt.pooling = Pooling::kMax;
  EXPECT_EQ(load_dataset(dir / "m.csv", src, opt).features(modality::kAudio, "a")[1], 4.0);

  std::vector<ModalitySource> wrong = {{modality::kAudio, 3, dir / "audio.mmf"}};
  try {
    load_dataset(dir / "m.csv", wrong, opt);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), FormatErrorCode::kDimMismatch);
  }
}

TEST(Csv, QuotingRoundTrip) {
  csv::Table t;
  t.header = {"a", "b"};
  t.rows = {{"plain", "with,comma"}, {"with \"quote\"", "multi\nline"}, {"", "é"}};
  std::ostringstream out;
  csv::write_row(out, t.header);
  for (const auto& r : t.rows) csv::write_row(out, r);
  const csv::Table back = csv::parse(out.str());
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("b"), 1u);
  EXPECT_THROW(back.column("zz"), FormatError);
}

TEST(Csv, BomBlankLinesAndCrlf) {
  const csv::Table t = csv::parse("\xEF\xBB\xBFx,y\r\n1,2\r\n\r\n3,4\n");
  EXPECT_EQ(t.header, (csv::Row{"x", "y"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1], (csv::Row{"3", "4"}));
  EXPECT_THROW(csv::parse("x,y\n1\n"), FormatError);
  EXPECT_THROW(csv::parse("x\n\"open\n"), FormatError);
}

}  // namespace
}  // namespace fusionforge
