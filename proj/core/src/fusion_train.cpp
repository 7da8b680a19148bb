// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include "fusionforge/error.hpp"
#include "fusionforge/fusion.hpp"
#include "fusionforge/rng.hpp"

namespace fusionforge {

namespace {

// Stream ids for Rng::derive, so each consumer of randomness is isolated.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 1000;

void glorot_uniform(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& x : m.flat()) x = rng.uniform(-limit, limit);
}

void round_to_float(FusionModel& model) {
  model.mutable_params().visit(model.spec().modalities(), [](const std::string&, Matrix& m, bool) {
    for (double& x : m.flat()) x = static_cast<double>(static_cast<float>(x));
  });
}

class AdamW {
 public:
  AdamW(const FusionParams& like, const TrainConfig& config)
      : first_(like.zeros_like()), second_(like.zeros_like()), config_(config) {}

  void step(FusionParams& params, const FusionParams& grad, const std::vector<ModalityId>& order) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::vector<Matrix*> p;
    std::vector<bool> is_bias;
    std::vector<const Matrix*> g;
    std::vector<Matrix*> m1;
    std::vector<Matrix*> m2;
    params.visit(order, [&](const std::string&, Matrix& m, bool bias) {
      p.push_back(&m);
      is_bias.push_back(bias);
    });
    grad.visit(order, [&](const std::string&, const Matrix& m, bool) { g.push_back(&m); });
    first_.visit(order, [&](const std::string&, Matrix& m, bool) { m1.push_back(&m); });
    second_.visit(order, [&](const std::string&, Matrix& m, bool) { m2.push_back(&m); });

    const double lr = config_.learning_rate;
    for (std::size_t t = 0; t < p.size(); ++t) {
      auto pv = p[t]->flat();
      auto gv = g[t]->flat();
      auto mv = m1[t]->flat();
      auto vv = m2[t]->flat();
      const double decay = is_bias[t] ? 0.0 : config_.weight_decay;
      for (std::size_t i = 0; i < pv.size(); ++i) {
        mv[i] = config_.beta1 * mv[i] + (1.0 - config_.beta1) * gv[i];
        vv[i] = config_.beta2 * vv[i] + (1.0 - config_.beta2) * gv[i] * gv[i];
        const double mhat = mv[i] / c1;
        const double vhat = vv[i] / c2;
        pv[i] -= lr * (mhat / (std::sqrt(vhat) + config_.adam_epsilon) + decay * pv[i]);
      }
    }
  }

 private:
  FusionParams first_;
  FusionParams second_;
  TrainConfig config_;
  std::uint64_t t_ = 0;
};

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (batch_size == 0) fail("batch_size must be > 0");
  if (d_model == 0) fail("d_model must be > 0");
  if (d_z == 0) fail("d_z must be > 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be > 0");
  if (!Rng::is_known_engine(rng)) fail("unknown rng '" + rng + "'");
}

FusionModel init_model(std::vector<std::string> label_vocab, const GroupSpec& spec,
                       std::vector<std::size_t> dims, const TrainConfig& config) {
  config.validate();
  if (dims.size() != spec.size()) throw ConfigError("init_model: dims do not match group spec");
  Rng rng = Rng(config.seed, config.rng).derive(kInitStream);
  const std::size_t k = label_vocab.size();

  FusionParams params;
  std::size_t in = 0;
  if (config.fusion == FusionMode::kAttention) {
    AttentionParams a;
    a.d_model = config.d_model;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      Projection p{Matrix(dims[i], config.d_model), Matrix(1, config.d_model)};
      glorot_uniform(p.weight, rng);
      a.projections.emplace(spec.modalities()[i], std::move(p));
    }
    a.query = Matrix(config.d_model, config.d_model);
    a.key = Matrix(config.d_model, config.d_model);
    a.value = Matrix(config.d_model, config.d_model);
    glorot_uniform(a.query, rng);
    glorot_uniform(a.key, rng);
    glorot_uniform(a.value, rng);
    params.attention = std::move(a);
    in = config.d_model;
  } else {
    in = std::accumulate(dims.begin(), dims.end(), std::size_t{0});
  }
  params.head.w_z = Matrix(in, config.d_z);
  params.head.b_z = Matrix(1, config.d_z);
  params.head.w_smax = Matrix(config.d_z, k);
  params.head.b_smax = Matrix(1, k);
  glorot_uniform(params.head.w_z, rng);
  glorot_uniform(params.head.w_smax, rng);

  FusionModel model(std::move(label_vocab), spec, std::move(dims), config.fusion, std::move(params));
  TrainingMeta meta;
  meta.config = config;
  model.set_meta(std::move(meta));
  return model;
}

std::vector<Example> make_examples(const Dataset& dataset, std::span<const std::string> ids,
                                   const GroupSpec& spec, std::span<const std::size_t> labels) {
  if (!labels.empty() && labels.size() != ids.size()) {
    throw ValidationError("make_examples: labels and ids differ in length");
  }
  std::vector<Example> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Example ex;
    ex.tokens = group_features(dataset, ids[i], spec);
    if (!labels.empty()) {
      ex.label = labels[i];
    } else {
      const ManifestEntry& e = dataset.entry(ids[i]);
      if (!e.label) throw ValidationError("make_examples: sample '" + ids[i] + "' has no label");
      ex.label = *e.label;
    }
    if (ex.label >= dataset.num_classes()) {
      throw ValidationError("make_examples: label out of range for '" + ids[i] + "'");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

FusionModel train(std::span<const Example> examples, std::vector<std::string> label_vocab,
                  const GroupSpec& spec, std::vector<std::size_t> dims, const TrainConfig& config) {
  if (examples.empty()) throw TrainingError("train: no labeled training samples");
  FusionModel model = init_model(std::move(label_vocab), spec, std::move(dims), config);
  for (const Example& ex : examples) {
    model.check_tokens(ex.tokens);
    if (ex.label >= model.num_classes()) throw ValidationError("train: label out of range");
  }

  const std::vector<ModalityId>& order = spec.modalities();
  TrainingMeta meta = model.meta();

  double initial = 0.0;
  for (const Example& ex : examples) initial += loss(model, ex);
  initial /= static_cast<double>(examples.size());
  if (!std::isfinite(initial)) throw TrainingError("train: non-finite loss at initialization", 0);
  meta.epoch_losses.push_back(initial);

  AdamW optimizer(model.params(), config);
  const Rng base(config.seed, config.rng);
  std::vector<std::size_t> order_idx(examples.size());
  FusionParams grad = model.params().zeros_like();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order_idx.begin(), order_idx.end(), std::size_t{0});
    Rng shuffle_rng = base.derive(kShuffleStream + epoch);
    shuffle_rng.shuffle(order_idx);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order_idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(order_idx.size(), start + config.batch_size);
      grad.visit(order, [](const std::string&, Matrix& m, bool) { m.fill(0.0); });
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += loss_and_gradient(model, examples[order_idx[i]], grad);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("train: loss diverged in epoch " + std::to_string(epoch), epoch);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      grad.visit(order, [&](const std::string&, Matrix& m, bool) {
        for (double& x : m.flat()) x *= inv;
      });
      optimizer.step(model.mutable_params(), grad, order);
      epoch_loss += batch_loss;
    }
    meta.epoch_losses.push_back(epoch_loss / static_cast<double>(examples.size()));
  }

  round_to_float(model);
  bool finite = true;
  model.visit_parameters([&](const std::string&, const Matrix& m, bool) {
    for (double x : m.flat()) finite = finite && std::isfinite(x);
  });
  if (!finite) throw TrainingError("train: parameters diverged", config.epochs);
  meta.final_loss = meta.epoch_losses.back();
  model.set_meta(std::move(meta));
  return model;
}

FusionModel train(const Dataset& dataset, const GroupSpec& spec, const TrainConfig& config) {
  std::vector<std::size_t> dims;
  for (const ModalityId& m : spec.modalities()) dims.push_back(dataset.dim(m));
  const std::vector<std::string> ids = dataset.ids(Split::kTrain);
  const std::vector<Example> examples = make_examples(dataset, ids, spec);
  return train(examples, dataset.label_vocab(), spec, std::move(dims), config);
}

std::vector<std::size_t> predict_labels(const FusionModel& model, const Dataset& dataset,
                                        std::span<const std::string> ids) {
  if (model.label_vocab() != dataset.label_vocab()) {
    throw ConfigError("predict: model and dataset label vocabularies differ");
  }
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    out.push_back(model.predict(group_features(dataset, id, model.spec())).label);
  }
  return out;
}

}  // namespace fusionforge
