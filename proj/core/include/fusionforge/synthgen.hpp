// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fusionforge/datastore.hpp"

namespace fusionforge {

struct SynthModality {
  ModalityId id;
  std::size_t dim;
};

/// Gaussian class-mixture generator. Every (class, modality) pair gets a
/// mean vector; the K means of one modality sit on a scaled random
/// orthonormal frame, so every pair is exactly `separation` apart.
struct SynthConfig {
  std::size_t num_classes = 6;
  std::vector<SynthModality> modalities = {
      {modality::kAudio, 32}, {modality::kText, 32}, {modality::kVision, 32},
      {modality::kJointAudioText, 32}};
  double separation = 4.0;  // distance between class means
  double noise = 1.4;       // within-class standard deviation per coordinate
  /// Fraction of samples in which one random modality is drawn from a wrong class.
  double conflict_rate = 0.0;
  /// Fraction of train labels flipped to a wrong class (truth stays sealed).
  double label_noise = 0.0;
  std::size_t labeled = 200;
  std::size_t unlabeled = 2000;
  std::size_t val = 300;
  std::size_t test = 300;
  std::size_t min_rows = 3;
  std::size_t max_rows = 10;
  std::uint64_t seed = 0;
  std::string rng = "splitmix64";
  /// Empty: "mer6" for K = 6, "mer8" for K = 8, otherwise class_0..class_{K-1}.
  std::vector<std::string> label_vocab;

  /// Throws ConfigError, including when a modality has fewer dims than classes.
  void validate() const;
  std::vector<std::string> resolved_vocab() const;
};

struct SynthSample {
  std::string sample_id;
  Split split = Split::kTrain;
  std::size_t true_label = 0;
  std::optional<std::size_t> observed_label;  // what the manifest carries
  std::optional<ModalityId> conflict_modality;
  std::size_t conflict_class = 0;
};

struct SynthResult {
  std::vector<std::string> label_vocab;
  std::vector<SynthSample> samples;
  std::vector<ManifestEntry> manifest;
  std::map<ModalityId, std::vector<FeatureRecord>> records;
  Dataset dataset;
};

SynthResult generate(const SynthConfig& config);

struct SynthPaths {
  std::filesystem::path manifest;
  std::filesystem::path answers;
  std::map<ModalityId, std::filesystem::path> features;
};

/// Writes manifest.csv, one `<modality>.mmf` per modality and answers.csv
/// (`sample_id,label` for every non-train sample) into `dir`.
SynthPaths write_synth(const SynthResult& result, const std::filesystem::path& dir);

/// Reads `sample_id,label` answer files into index labels.
std::map<std::string, std::size_t> read_answers(const std::filesystem::path& path,
                                                const std::vector<std::string>& vocab);

}  // namespace fusionforge
