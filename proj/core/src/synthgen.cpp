// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/synthgen.hpp"

#include <cmath>
#include <unordered_map>

#include "fusionforge/csv.hpp"
#include "fusionforge/error.hpp"
#include "fusionforge/rng.hpp"

namespace fusionforge {

namespace {

constexpr std::uint64_t kMeansStream = 1;
constexpr std::uint64_t kSampleStream = 1'000'000;

// K orthonormal directions in `dim` dimensions (Gram-Schmidt on Gaussian
// draws), scaled so that every pair of means is `separation` apart.
std::vector<std::vector<double>> class_means(std::size_t k, std::size_t dim, double separation,
                                             Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < k) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;  // degenerate draw, try again
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  const double scale = separation / std::sqrt(2.0);
  for (auto& b : basis) {
    for (double& x : b) x *= scale;
  }
  return basis;
}

std::string sample_name(std::size_t index, std::size_t total) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::max<std::size_t>(6, std::to_string(total).size());
  return "s" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synth config: " + what); };
  if (num_classes < 2) fail("need at least 2 classes");
  if (modalities.empty()) fail("need at least one modality");
  for (const SynthModality& m : modalities) {
    if (m.dim == 0) fail("modality '" + m.id.str() + "' has dim 0");
    if (m.dim < num_classes) {
      fail("cannot place " + std::to_string(num_classes) + " equidistant means in " +
           std::to_string(m.dim) + " dims for modality '" + m.id.str() + "'");
    }
  }
  if (!(separation > 0.0) || !std::isfinite(separation)) fail("separation must be > 0");
  if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be >= 0");
  if (!(conflict_rate >= 0.0 && conflict_rate <= 1.0)) fail("conflict_rate must lie in [0, 1]");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) fail("label_noise must lie in [0, 1]");
  if (min_rows == 0 || max_rows < min_rows) fail("row range must satisfy 1 <= min_rows <= max_rows");
  if (!Rng::is_known_engine(rng)) fail("unknown rng '" + rng + "'");
  if (!label_vocab.empty() && label_vocab.size() != num_classes) {
    fail("label_vocab size differs from num_classes");
  }
}

std::vector<std::string> SynthConfig::resolved_vocab() const {
  if (!label_vocab.empty()) return label_vocab;
  if (num_classes == 6) return label_preset("mer6");
  if (num_classes == 8) return label_preset("mer8");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < num_classes; ++k) out.push_back("class_" + std::to_string(k));
  return out;
}

SynthResult generate(const SynthConfig& config) {
  config.validate();
  const Rng root(config.seed, config.rng);
  const std::size_t k = config.num_classes;

  std::vector<std::vector<std::vector<double>>> means;  // [modality][class][dim]
  {
    Rng rng = root.derive(kMeansStream);
    for (const SynthModality& m : config.modalities) {
      means.push_back(class_means(k, m.dim, config.separation, rng));
    }
  }

  const std::size_t total = config.labeled + config.unlabeled + config.val + config.test;
  std::vector<SynthSample> samples;
  std::vector<ManifestEntry> manifest;
  std::map<ModalityId, std::vector<FeatureRecord>> records;
  Dataset::PooledMap pooled;

  for (std::size_t s = 0; s < total; ++s) {
    Rng rng = root.derive(kSampleStream + s);
    SynthSample sample;
    sample.sample_id = sample_name(s, total);
    if (s < config.labeled) {
      sample.split = Split::kTrain;
    } else if (s < config.labeled + config.unlabeled) {
      sample.split = Split::kUnlabeled;
    } else if (s < config.labeled + config.unlabeled + config.val) {
      sample.split = Split::kVal;
    } else {
      sample.split = Split::kTest;
    }
    sample.true_label = static_cast<std::size_t>(rng.below(k));

    // Draws happen unconditionally so a sample's stream layout does not
    // depend on the rates.
    const bool conflicted = rng.uniform() < config.conflict_rate;
    const auto conflict_mod = static_cast<std::size_t>(rng.below(config.modalities.size()));
    const auto wrong_class = (sample.true_label + 1 + rng.below(k - 1)) % k;
    const bool flip = rng.uniform() < config.label_noise;
    const auto flipped = (sample.true_label + 1 + rng.below(k - 1)) % k;
    if (conflicted) {
      sample.conflict_modality = config.modalities[conflict_mod].id;
      sample.conflict_class = wrong_class;
    }

    if (sample.split == Split::kTrain) {
      sample.observed_label = flip ? flipped : sample.true_label;
    } else if (sample.split == Split::kVal) {
      sample.observed_label = sample.true_label;
    }

    for (std::size_t mi = 0; mi < config.modalities.size(); ++mi) {
      const SynthModality& mod = config.modalities[mi];
      const std::size_t cls = (conflicted && mi == conflict_mod) ? wrong_class : sample.true_label;
      std::vector<double> center(mod.dim);
      for (std::size_t i = 0; i < mod.dim; ++i) {
        center[i] = means[mi][cls][i] + config.noise * rng.normal();
      }

      // Rows jitter around the center with zero mean jitter, so mean
      // pooling recovers the center up to float rounding.
      const auto rows = static_cast<std::size_t>(
          rng.between(static_cast<std::int64_t>(config.min_rows),
                      static_cast<std::int64_t>(config.max_rows)));
      std::vector<double> jitter(rows * mod.dim);
      for (double& x : jitter) x = config.noise * rng.normal();
      for (std::size_t i = 0; i < mod.dim; ++i) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += jitter[r * mod.dim + i];
        mean /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) jitter[r * mod.dim + i] -= mean;
      }

      FeatureRecord rec;
      rec.sample_id = sample.sample_id;
      rec.dim = static_cast<std::uint32_t>(mod.dim);
      rec.rows = static_cast<std::uint32_t>(rows);
      rec.values.resize(rows * mod.dim);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < mod.dim; ++i) {
          rec.values[r * mod.dim + i] = static_cast<float>(center[i] + jitter[r * mod.dim + i]);
        }
      }
      pooled[mod.id].emplace(rec.sample_id, pool_sequence(rec, Pooling::kMean));
      records[mod.id].push_back(std::move(rec));
    }

    manifest.push_back({sample.sample_id, sample.split, sample.observed_label});
    samples.push_back(std::move(sample));
  }

  std::vector<ModalityInfo> infos;
  for (const SynthModality& m : config.modalities) infos.push_back({m.id, m.dim});
  std::vector<std::string> vocab = config.resolved_vocab();
  Dataset dataset(vocab, std::move(infos), manifest, std::move(pooled));
  return SynthResult{std::move(vocab), std::move(samples), std::move(manifest), std::move(records),
                     std::move(dataset)};
}

SynthPaths write_synth(const SynthResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SynthPaths paths;
  paths.manifest = dir / "manifest.csv";
  paths.answers = dir / "answers.csv";
  write_manifest(paths.manifest, result.manifest, result.label_vocab);
  for (const ModalityInfo& m : result.dataset.modalities()) {
    const std::filesystem::path file = dir / (m.id.str() + ".mmf");
    auto it = result.records.find(m.id);
    const std::vector<FeatureRecord> none;
    write_feature_file(it == result.records.end() ? none : it->second,
                       static_cast<std::uint32_t>(m.dim), file);
    paths.features.emplace(m.id, file);
  }
  csv::Table answers;
  answers.header = {"sample_id", "label"};
  for (const SynthSample& s : result.samples) {
    if (s.split == Split::kTrain) continue;
    answers.rows.push_back({s.sample_id, result.label_vocab[s.true_label]});
  }
  csv::write_file(paths.answers, answers);
  return paths;
}

std::map<std::string, std::size_t> read_answers(const std::filesystem::path& path,
                                                const std::vector<std::string>& vocab) {
  const csv::Table table = csv::read_file(path);
  const std::size_t id_col = table.column("sample_id");
  const std::size_t label_col = table.column("label");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
  std::map<std::string, std::size_t> out;
  for (const csv::Row& row : table.rows) {
    auto it = index.find(row[label_col]);
    if (it == index.end()) {
      throw ConfigError("answers: label '" + row[label_col] + "' is not in the vocabulary");
    }
    if (!out.emplace(row[id_col], it->second).second) {
      throw ValidationError("answers: duplicate sample id '" + row[id_col] + "'");
    }
  }
  return out;
}

}  // namespace fusionforge
