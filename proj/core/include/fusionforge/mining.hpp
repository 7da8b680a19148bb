// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionforge/datastore.hpp"
#include "fusionforge/fusion.hpp"

namespace fusionforge {

inline constexpr std::size_t kLearnerCount = 4;
inline constexpr std::size_t kMinAgreement = 3;

struct AgreementVote {
  std::size_t label = 0;
  std::size_t agreement = 0;  // 3 or 4

  bool operator==(const AgreementVote&) const = default;
};

/// Accepts a label only when at least three of the four learners agree.
/// Throws ValidationError unless exactly four predictions are given.
std::optional<AgreementVote> pseudo_label(std::span<const std::size_t> predictions);

/// Seeded shuffle dealt round-robin into k subsets (sizes differ by at most
/// one). Each subset is returned in ascending order.
std::vector<std::vector<std::string>> partition(std::span<const std::string> items, std::size_t k,
                                                std::uint64_t seed,
                                                std::string_view rng = "splitmix64");

/// Like partition, but deals each class separately, continuing the
/// round-robin across classes so overall sizes still differ by at most one.
std::vector<std::vector<std::string>> partition_stratified(std::span<const std::string> items,
                                                           std::span<const std::size_t> labels,
                                                           std::size_t k, std::uint64_t seed,
                                                           std::string_view rng = "splitmix64");

struct PseudoLabel {
  std::string sample_id;
  std::size_t label = 0;
  std::size_t agreement = 0;
  std::size_t iteration = 0;  // iteration that admitted the sample
  std::size_t learner = 0;    // learner whose training set received it

  bool operator==(const PseudoLabel&) const = default;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t pseudo = 0;
  std::size_t admitted = 0;
  std::vector<std::size_t> train_sizes;  // per learner
  std::vector<double> val_waf;           // per learner; empty without a val split

  double best_val_waf() const;
  bool operator==(const IterationRecord&) const = default;
};

struct MiningConfig {
  std::size_t iterations = 3;
  bool stratify = false;
  /// Upper bound on learners trained concurrently.
  std::size_t threads = 1;
  Split eval_split = Split::kVal;
};

/// D_l, D_u and D_w plus the four current learners. Pools are pairwise
/// disjoint; D_l never changes.
struct MiningState {
  std::vector<GroupSpec> specs;
  std::vector<std::string> labeled;
  std::vector<std::string> unlabeled;
  std::map<std::string, PseudoLabel> pseudo;
  /// Pseudo-labeled ids owned by each learner (D_lwi minus D_l).
  std::vector<std::vector<std::string>> learner_pseudo;
  std::vector<FusionModel> learners;
  std::size_t iteration = 0;
  std::vector<IterationRecord> history;
};

/// The four group specs used when none are configured.
std::vector<GroupSpec> default_group_specs();

/// Trains the initial weak learners on D_l and records history entry 0.
MiningState init_mining(const Dataset& dataset, std::vector<GroupSpec> specs,
                        const TrainConfig& train_config, const MiningConfig& mining_config = {});

/// One round: vote on D_u, admit ≥3-agreement samples to D_w, split the new
/// admissions four ways, retrain every learner on D_l plus its share, and
/// append a history entry. Returns a new state; `state` is never modified,
/// so a failed round leaves the caller's state intact.
MiningState mine_iteration(const MiningState& state, const Dataset& dataset,
                           const TrainConfig& train_config, const MiningConfig& mining_config = {});

/// init_mining followed by `iterations` rounds.
MiningState run_mining(const Dataset& dataset, std::vector<GroupSpec> specs,
                       std::size_t iterations, const TrainConfig& train_config,
                       const MiningConfig& mining_config = {});

/// history.json payload.
std::string history_json(const MiningState& state);

}  // namespace fusionforge
