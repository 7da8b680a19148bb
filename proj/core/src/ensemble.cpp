// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/ensemble.hpp"

#include <algorithm>
#include <map>

#include "fusionforge/error.hpp"
#include "fusionforge/metrics.hpp"

namespace fusionforge {

std::vector<RankedModel> rank_by_score(std::vector<RankedModel> scored) {
  std::sort(scored.begin(), scored.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return scored;
}

std::vector<RankedModel> rank_models(std::span<const NamedModel> models, const Dataset& dataset,
                                     Split split) {
  if (models.empty()) throw ValidationError("rank_models: no models");
  const std::vector<std::string> ids = dataset.ids(split);
  std::vector<std::size_t> truth;
  truth.reserve(ids.size());
  for (const std::string& id : ids) {
    const auto& label = dataset.entry(id).label;
    if (!label) {
      throw ValidationError("rank_models: sample '" + id + "' in split '" +
                            std::string(to_string(split)) + "' has no label");
    }
    truth.push_back(*label);
  }
  std::vector<RankedModel> scored;
  for (const NamedModel& m : models) {
    const auto pred = predict_labels(m.model, dataset, ids);
    scored.push_back({m.id, waf(confusion(truth, pred, dataset.num_classes()))});
  }
  return rank_by_score(std::move(scored));
}

std::vector<NamedModel> apply_ranking(std::vector<NamedModel> models,
                                      std::span<const RankedModel> ranking) {
  std::vector<NamedModel> out;
  for (const RankedModel& r : ranking) {
    auto it = std::find_if(models.begin(), models.end(),
                           [&](const NamedModel& m) { return m.id == r.id; });
    if (it == models.end()) throw ValidationError("apply_ranking: unknown model id '" + r.id + "'");
    out.push_back(std::move(*it));
    models.erase(it);
  }
  return out;
}

VoteTrace vote(std::span<const std::size_t> ranked_predictions) {
  if (ranked_predictions.empty()) throw ValidationError("vote: no predictions");
  VoteTrace trace;
  std::vector<std::size_t> active(ranked_predictions.begin(), ranked_predictions.end());
  for (;;) {
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t label : active) ++counts[label];
    std::size_t best = 0;
    for (const auto& [label, n] : counts) best = std::max(best, n);

    VoteRound round;
    round.active = active;
    for (const auto& [label, n] : counts) {
      if (n == best) round.modes.push_back(label);
    }
    if (round.modes.size() == 1) {
      trace.label = round.modes.front();
      trace.rounds.push_back(std::move(round));
      return trace;
    }
    round.eliminated = active.size() - 1;
    active.pop_back();
    trace.rounds.push_back(std::move(round));
  }
}

EnsembleResult ensemble_vote(std::span<const std::vector<std::size_t>> per_model,
                             std::vector<std::string> sample_ids) {
  if (per_model.empty()) throw ValidationError("ensemble: no models");
  for (const auto& preds : per_model) {
    if (preds.size() != sample_ids.size()) {
      throw ValidationError("ensemble: prediction count does not match sample count");
    }
  }
  EnsembleResult result;
  result.sample_ids = std::move(sample_ids);
  std::vector<std::size_t> column(per_model.size());
  for (std::size_t s = 0; s < result.sample_ids.size(); ++s) {
    for (std::size_t m = 0; m < per_model.size(); ++m) column[m] = per_model[m][s];
    VoteTrace t = vote(column);
    result.labels.push_back(t.label);
    result.traces.push_back(std::move(t));
  }
  return result;
}

EnsembleResult ensemble_predict(std::span<const NamedModel> ranked_models, const Dataset& dataset,
                                Split split) {
  if (ranked_models.empty()) throw ValidationError("ensemble: no models");
  for (const NamedModel& m : ranked_models) {
    if (m.model.label_vocab() != ranked_models.front().model.label_vocab() ||
        m.model.label_vocab() != dataset.label_vocab()) {
      throw ConfigError("ensemble: model '" + m.id + "' uses a different label vocabulary");
    }
  }
  std::vector<std::string> ids = dataset.ids(split);
  std::vector<std::vector<std::size_t>> per_model;
  for (const NamedModel& m : ranked_models) per_model.push_back(predict_labels(m.model, dataset, ids));
  return ensemble_vote(per_model, std::move(ids));
}

}  // namespace fusionforge
