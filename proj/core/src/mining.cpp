// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/mining.hpp"

#include <algorithm>
#include <array>
#include <iterator>
#include <future>
#include <nlohmann/json.hpp>
#include <set>

#include "fusionforge/error.hpp"
#include "fusionforge/metrics.hpp"
#include "fusionforge/rng.hpp"

namespace fusionforge {

std::optional<AgreementVote> pseudo_label(std::span<const std::size_t> predictions) {
  if (predictions.size() != kLearnerCount) {
    throw ValidationError("pseudo_label: expected " + std::to_string(kLearnerCount) +
                          " predictions, got " + std::to_string(predictions.size()));
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto n = static_cast<std::size_t>(
        std::count(predictions.begin(), predictions.end(), predictions[i]));
    if (n >= kMinAgreement) return AgreementVote{predictions[i], n};
  }
  return std::nullopt;
}

std::vector<std::vector<std::string>> partition(std::span<const std::string> items, std::size_t k,
                                                std::uint64_t seed, std::string_view rng) {
  if (k == 0) throw ValidationError("partition: k must be >= 1");
  std::vector<std::string> shuffled(items.begin(), items.end());
  Rng(seed, rng).shuffle(shuffled);
  std::vector<std::vector<std::string>> out(k);
  for (std::size_t i = 0; i < shuffled.size(); ++i) out[i % k].push_back(std::move(shuffled[i]));
  for (auto& subset : out) std::sort(subset.begin(), subset.end());
  return out;
}

std::vector<std::vector<std::string>> partition_stratified(std::span<const std::string> items,
                                                           std::span<const std::size_t> labels,
                                                           std::size_t k, std::uint64_t seed,
                                                           std::string_view rng) {
  if (k == 0) throw ValidationError("partition: k must be >= 1");
  if (items.size() != labels.size()) throw ValidationError("partition: labels/items length mismatch");
  std::map<std::size_t, std::vector<std::string>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i) by_class[labels[i]].push_back(items[i]);
  Rng gen(seed, rng);
  std::vector<std::vector<std::string>> out(k);
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    gen.shuffle(members);
    for (std::string& id : members) out[next++ % k].push_back(std::move(id));
  }
  for (auto& subset : out) std::sort(subset.begin(), subset.end());
  return out;
}

double IterationRecord::best_val_waf() const {
  return val_waf.empty() ? 0.0 : *std::max_element(val_waf.begin(), val_waf.end());
}

std::vector<GroupSpec> default_group_specs() {
  using namespace modality;
  return {GroupSpec({kAudio, kText, kVision}), GroupSpec({kAudio, kVision, kJointAudioText}),
          GroupSpec({kText, kVision, kJointAudioText}),
          GroupSpec({kAudio, kText, kVision, kJointAudioText})};
}

namespace {

constexpr std::uint64_t kPartitionStream = 0x5EED0000ULL;

std::vector<std::size_t> dims_for(const Dataset& dataset, const GroupSpec& spec) {
  std::vector<std::size_t> dims;
  for (const ModalityId& m : spec.modalities()) dims.push_back(dataset.dim(m));
  return dims;
}

// D_l ∪ (learner's pseudo share), with manifest labels for D_l and frozen
// pseudo-labels for the rest.
std::vector<Example> learner_examples(const MiningState& state, std::size_t learner,
                                      const Dataset& dataset) {
  const GroupSpec& spec = state.specs[learner];
  std::vector<Example> out = make_examples(dataset, state.labeled, spec);
  const auto& extra = state.learner_pseudo[learner];
  std::vector<std::size_t> labels;
  labels.reserve(extra.size());
  for (const std::string& id : extra) labels.push_back(state.pseudo.at(id).label);
  std::vector<Example> more = make_examples(dataset, extra, spec, labels);
  std::move(more.begin(), more.end(), std::back_inserter(out));
  return out;
}

std::vector<FusionModel> train_learners(const MiningState& state, const Dataset& dataset,
                                        const TrainConfig& config, std::size_t threads) {
  auto job = [&](std::size_t i) {
    return train(learner_examples(state, i, dataset), dataset.label_vocab(), state.specs[i],
                 dims_for(dataset, state.specs[i]), config);
  };
  std::vector<FusionModel> out;
  out.reserve(state.specs.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < state.specs.size(); ++i) out.push_back(job(i));
    return out;
  }
  // Learners are independent; results are collected in learner order.
  for (std::size_t start = 0; start < state.specs.size(); start += threads) {
    const std::size_t end = std::min(state.specs.size(), start + threads);
    std::vector<std::future<FusionModel>> running;
    for (std::size_t i = start; i < end; ++i) running.push_back(std::async(std::launch::async, job, i));
    for (auto& f : running) out.push_back(f.get());
  }
  return out;
}

IterationRecord make_record(const MiningState& state, const Dataset& dataset, Split eval_split,
                            std::size_t admitted) {
  IterationRecord rec;
  rec.iteration = state.iteration;
  rec.labeled = state.labeled.size();
  rec.unlabeled = state.unlabeled.size();
  rec.pseudo = state.pseudo.size();
  rec.admitted = admitted;
  for (const auto& share : state.learner_pseudo) rec.train_sizes.push_back(state.labeled.size() + share.size());

  const std::vector<std::string> ids = dataset.ids(eval_split);
  std::vector<std::size_t> truth;
  for (const std::string& id : ids) {
    const auto& label = dataset.entry(id).label;
    if (!label) return rec;  // unlabeled evaluation split: no scores
    truth.push_back(*label);
  }
  if (truth.empty()) return rec;
  for (const FusionModel& m : state.learners) {
    rec.val_waf.push_back(waf(confusion(truth, predict_labels(m, dataset, ids), dataset.num_classes())));
  }
  return rec;
}

}  // namespace

MiningState init_mining(const Dataset& dataset, std::vector<GroupSpec> specs,
                        const TrainConfig& train_config, const MiningConfig& mining_config) {
  if (specs.size() != kLearnerCount) {
    throw ConfigError("mining: expected " + std::to_string(kLearnerCount) + " group specs, got " +
                      std::to_string(specs.size()));
  }
  for (const GroupSpec& spec : specs) {
    for (const ModalityId& m : spec.modalities()) {
      if (!dataset.has_modality(m)) {
        throw ConfigError("mining: group " + spec.name() + " uses undeclared modality '" + m.str() + "'");
      }
    }
  }
  MiningState state;
  state.specs = std::move(specs);
  state.labeled = dataset.ids(Split::kTrain);
  state.unlabeled = dataset.ids(Split::kUnlabeled);
  if (state.labeled.empty()) throw TrainingError("mining: no labeled samples");
  state.learner_pseudo.assign(kLearnerCount, {});
  state.learners = train_learners(state, dataset, train_config, mining_config.threads);
  state.history.push_back(make_record(state, dataset, mining_config.eval_split, 0));
  return state;
}

MiningState mine_iteration(const MiningState& state, const Dataset& dataset,
                           const TrainConfig& train_config, const MiningConfig& mining_config) {
  if (state.learners.size() != kLearnerCount || state.specs.size() != kLearnerCount) {
    throw ValidationError("mine_iteration: state does not hold four learners");
  }
  MiningState next = state;
  next.iteration = state.iteration + 1;

  // (a)-(b) vote on the remaining unlabeled pool.
  std::vector<std::vector<std::size_t>> preds;
  for (const FusionModel& m : state.learners) preds.push_back(predict_labels(m, dataset, state.unlabeled));
  std::vector<std::string> admitted;
  std::vector<std::size_t> admitted_labels;
  std::vector<std::string> remaining;
  std::array<std::size_t, kLearnerCount> column{};
  for (std::size_t s = 0; s < state.unlabeled.size(); ++s) {
    for (std::size_t m = 0; m < kLearnerCount; ++m) column[m] = preds[m][s];
    if (auto vote = pseudo_label(column)) {
      const std::string& id = state.unlabeled[s];
      next.pseudo.emplace(id, PseudoLabel{id, vote->label, vote->agreement, next.iteration, 0});
      admitted.push_back(id);
      admitted_labels.push_back(vote->label);
    } else {
      remaining.push_back(state.unlabeled[s]);
    }
  }
  // (c) admitted samples leave D_u.
  next.unlabeled = std::move(remaining);

  // (d) split the new admissions; subset s goes to learner (s + iteration) mod 4
  // so the larger remainders rotate between learners.
  const std::uint64_t seed = mix64(train_config.seed ^ (kPartitionStream + next.iteration));
  const auto subsets = mining_config.stratify
                           ? partition_stratified(admitted, admitted_labels, kLearnerCount, seed, train_config.rng)
                           : partition(admitted, kLearnerCount, seed, train_config.rng);
  for (std::size_t s = 0; s < kLearnerCount; ++s) {
    const std::size_t learner = (s + next.iteration) % kLearnerCount;
    auto& share = next.learner_pseudo[learner];
    for (const std::string& id : subsets[s]) {
      next.pseudo.at(id).learner = learner;
      share.push_back(id);
    }
    std::sort(share.begin(), share.end());
  }

  // (e) retrain each learner on D_l ∪ its share.
  next.learners = train_learners(next, dataset, train_config, mining_config.threads);
  next.history.push_back(make_record(next, dataset, mining_config.eval_split, admitted.size()));
  return next;
}

MiningState run_mining(const Dataset& dataset, std::vector<GroupSpec> specs, std::size_t iterations,
                       const TrainConfig& train_config, const MiningConfig& mining_config) {
  MiningState state = init_mining(dataset, std::move(specs), train_config, mining_config);
  for (std::size_t i = 0; i < iterations; ++i) {
    try {
      state = mine_iteration(state, dataset, train_config, mining_config);
    } catch (const TrainingError& e) {
      throw TrainingError("mining iteration " + std::to_string(i + 1) + ": " + e.what(), e.epoch());
    }
  }
  return state;
}

std::string history_json(const MiningState& state) {
  nlohmann::ordered_json j;
  j["group_specs"] = nlohmann::ordered_json::array();
  for (const GroupSpec& s : state.specs) j["group_specs"].push_back(s.name());
  j["iterations"] = nlohmann::ordered_json::array();
  for (const IterationRecord& r : state.history) {
    j["iterations"].push_back({{"iteration", r.iteration},
                               {"labeled", r.labeled},
                               {"unlabeled", r.unlabeled},
                               {"pseudo", r.pseudo},
                               {"admitted", r.admitted},
                               {"train_sizes", r.train_sizes},
                               {"val_waf", r.val_waf},
                               {"best_val_waf", r.best_val_waf()}});
  }
  return j.dump(2) + "\n";
}

}  // namespace fusionforge
