// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fusionforge/datastore.hpp"
#include "fusionforge/fusion.hpp"
#include "fusionforge/mining.hpp"

namespace fusionforge::cli {

/// Everything a pipeline run needs, loaded from JSON. Relative paths are
/// resolved against the directory of the config file.
///
///   {
///     "manifest": "manifest.csv",
///     "answers": "answers.csv",                 // optional
///     "label_vocab": ["neutral", ...],          // or "label_preset": "mer6"
///     "pooling": "mean",
///     "modalities": [{"id": "audio", "dim": 32, "file": "audio.mmf"}, ...],
///     "group_specs": ["audio+text+vision", ...],
///     "train": {"learning_rate": 0.001, "batch_size": 32, "epochs": 20,
///               "seed": 0, "d_model": 256, "d_z": 128, "weight_decay": 1e-4,
///               "beta1": 0.9, "beta2": 0.999, "adam_epsilon": 1e-8,
///               "fusion": "attention", "rng": "splitmix64"},
///     "mining": {"iterations": 3, "stratify": false},
///     "ensemble": {"rank_split": "val"},
///     "threads": 1
///   }
struct RunConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> answers;
  std::vector<std::string> label_vocab = label_preset(kDefaultLabelPreset);
  Pooling pooling = Pooling::kMean;
  std::vector<ModalitySource> modalities;
  std::vector<GroupSpec> group_specs = default_group_specs();
  TrainConfig train;
  MiningConfig mining;
  Split rank_split = Split::kVal;
};

/// Parses and validates; throws ConfigError naming the offending key.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Serializes with paths written relative to `base_dir` when possible.
std::string to_json(const RunConfig& config, const std::filesystem::path& base_dir);

Dataset load_run_dataset(const RunConfig& config);

}  // namespace fusionforge::cli
