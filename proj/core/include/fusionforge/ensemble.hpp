// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusionforge/datastore.hpp"
#include "fusionforge/fusion.hpp"

namespace fusionforge {

struct NamedModel {
  std::string id;
  FusionModel model;
};

struct RankedModel {
  std::string id;
  double score = 0.0;
};

/// Sorts by score descending, then id ascending.
std::vector<RankedModel> rank_by_score(std::vector<RankedModel> scored);

/// Scores every model by WAF on `split` (which must carry labels) and ranks
/// them. The returned order refers back to `models` by id.
std::vector<RankedModel> rank_models(std::span<const NamedModel> models, const Dataset& dataset,
                                     Split split = Split::kVal);

/// Reorders `models` to follow `ranking`.
std::vector<NamedModel> apply_ranking(std::vector<NamedModel> models,
                                      std::span<const RankedModel> ranking);

struct VoteRound {
  std::vector<std::size_t> active;  // predictions still voting, best-ranked first
  std::vector<std::size_t> modes;   // most common labels this round, ascending
  std::optional<std::size_t> eliminated;  // rank position dropped after this round
};

struct VoteTrace {
  std::vector<VoteRound> rounds;
  std::size_t label = 0;
};

/// Ranked mode voting. Each round counts the most common label among the
/// active predictions; a unique mode wins, otherwise the lowest-ranked
/// active prediction is dropped and the count repeats. Throws
/// ValidationError on empty input.
VoteTrace vote(std::span<const std::size_t> ranked_predictions);

struct EnsembleResult {
  std::vector<std::string> sample_ids;
  std::vector<std::size_t> labels;
  std::vector<VoteTrace> traces;
};

/// Votes per sample over `per_model` predictions given in rank order; every
/// inner vector is index-aligned with `sample_ids`.
EnsembleResult ensemble_vote(std::span<const std::vector<std::size_t>> per_model,
                             std::vector<std::string> sample_ids);

/// Predicts `split` with each model (in the given rank order) and votes.
/// Throws ConfigError when label vocabularies differ.
EnsembleResult ensemble_predict(std::span<const NamedModel> ranked_models, const Dataset& dataset,
                                Split split);

}  // namespace fusionforge
