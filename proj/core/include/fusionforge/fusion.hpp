// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionforge/datastore.hpp"
#include "fusionforge/matrix.hpp"

namespace fusionforge {

/// Ordered, duplicate-free list of modalities forming one fusion branch.
/// The order is part of the model identity: it fixes the concatenation
/// layout and the parameter order.
class GroupSpec {
 public:
  explicit GroupSpec(std::vector<ModalityId> modalities);

  /// Parses "audio,text,vision" (or '+' separated).
  static GroupSpec parse(std::string_view text);

  const std::vector<ModalityId>& modalities() const noexcept { return modalities_; }
  std::size_t size() const noexcept { return modalities_.size(); }
  /// "audio+text+vision"
  std::string name() const;

  bool operator==(const GroupSpec&) const = default;

 private:
  std::vector<ModalityId> modalities_;
};

/// A modality-tagged pooled feature vector.
struct Token {
  ModalityId modality;
  std::vector<double> values;
};

/// The sample's vectors for each modality of `spec`, in spec order.
std::vector<Token> group_features(const Dataset& dataset, std::string_view sample_id,
                                  const GroupSpec& spec);

/// Flat concatenation of token values in order.
std::vector<double> concatenate(std::span<const Token> tokens);

enum class FusionMode { kAttention, kConcat };

FusionMode parse_fusion_mode(std::string_view name);
std::string_view to_string(FusionMode mode);

/// Per-modality affine map into the shared model width.
struct Projection {
  Matrix weight;  // dim × d_model
  Matrix bias;    // 1 × d_model
};

struct AttentionParams {
  std::size_t d_model = 0;
  std::map<ModalityId, Projection> projections;
  Matrix query;  // d_model × d_model
  Matrix key;
  Matrix value;
};

/// Projects every token to d_model, runs one head of scaled dot-product
/// self-attention across the tokens and averages the attended vectors.
std::vector<double> attention_fuse(std::span<const Token> tokens, const AttentionParams& params);

/// Affine bottleneck followed by an affine softmax classifier.
struct FusionHead {
  Matrix w_z;     // input × d_z
  Matrix b_z;     // 1 × d_z
  Matrix w_smax;  // d_z × K
  Matrix b_smax;  // 1 × K
};

struct Prediction {
  std::vector<double> probs;
  std::size_t label = 0;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
/// Index of the largest element; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Throws NumericError on non-finite input and ValidationError on shape
/// mismatch.
Prediction forward(std::span<const double> fused, const FusionHead& head);

/// Every trainable tensor of a model. Also used as the gradient and
/// optimizer-moment container, so all three share one layout.
struct FusionParams {
  std::optional<AttentionParams> attention;
  FusionHead head;

  /// Visits (name, tensor, is_bias) in canonical order: projections in
  /// group-spec order, then query/key/value, then the head.
  template <typename F>
  void visit(const std::vector<ModalityId>& order, F&& fn);
  template <typename F>
  void visit(const std::vector<ModalityId>& order, F&& fn) const;

  FusionParams zeros_like() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  std::size_t d_model = 256;
  std::size_t d_z = 128;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  FusionMode fusion = FusionMode::kAttention;
  std::string rng = "splitmix64";

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainingMeta {
  TrainConfig config;
  double final_loss = 0.0;
  /// Entry 0 is the mean loss at initialization; entry e is the mean
  /// mini-batch loss observed during epoch e.
  std::vector<double> epoch_losses;

  bool operator==(const TrainingMeta&) const = default;
};

class FusionModel {
 public:
  FusionModel(std::vector<std::string> label_vocab, GroupSpec spec, std::vector<std::size_t> dims,
              FusionMode mode, FusionParams params);

  const std::vector<std::string>& label_vocab() const noexcept { return label_vocab_; }
  std::size_t num_classes() const noexcept { return label_vocab_.size(); }
  const GroupSpec& spec() const noexcept { return spec_; }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  FusionMode mode() const noexcept { return mode_; }
  std::size_t d_model() const noexcept;
  std::size_t d_z() const noexcept { return params_.head.w_z.cols(); }

  const FusionParams& params() const noexcept { return params_; }
  FusionParams& mutable_params() noexcept { return params_; }
  const TrainingMeta& meta() const noexcept { return meta_; }
  void set_meta(TrainingMeta meta) { meta_ = std::move(meta); }

  /// Checks that tokens follow the group spec (order and dims).
  void check_tokens(std::span<const Token> tokens) const;

  std::vector<double> fuse(std::span<const Token> tokens) const;
  Prediction predict(std::span<const Token> tokens) const;

  std::size_t parameter_count() const;

  template <typename F>
  void visit_parameters(F&& fn) const {
    params_.visit(spec_.modalities(), std::forward<F>(fn));
  }

  /// Parameter-wise equality, ignoring training metadata.
  bool same_parameters(const FusionModel& other) const;

 private:
  std::vector<std::string> label_vocab_;
  GroupSpec spec_;
  std::vector<std::size_t> dims_;
  FusionMode mode_;
  FusionParams params_;
  TrainingMeta meta_;
};

/// Glorot-uniform weights, zero biases, drawn from the config's rng.
FusionModel init_model(std::vector<std::string> label_vocab, const GroupSpec& spec,
                       std::vector<std::size_t> dims, const TrainConfig& config);

struct Example {
  std::vector<Token> tokens;
  std::size_t label = 0;
};

/// Builds examples for `ids` using their manifest labels (or `labels`
/// when given, index-aligned with `ids`).
std::vector<Example> make_examples(const Dataset& dataset, std::span<const std::string> ids,
                                   const GroupSpec& spec,
                                   std::span<const std::size_t> labels = {});

/// Cross-entropy −log p[label] and its gradient, accumulated into `grad`.
double loss_and_gradient(const FusionModel& model, const Example& example, FusionParams& grad);
double loss(const FusionModel& model, const Example& example);

/// Mini-batch adaptive-moment training on cross-entropy. Deterministic for
/// a fixed config. Parameters are rounded to float32 at the end so that the
/// returned model round-trips through the model file exactly.
FusionModel train(std::span<const Example> examples, std::vector<std::string> label_vocab,
                  const GroupSpec& spec, std::vector<std::size_t> dims,
                  const TrainConfig& config);
/// Trains on the dataset's train split.
FusionModel train(const Dataset& dataset, const GroupSpec& spec, const TrainConfig& config);

std::vector<std::size_t> predict_labels(const FusionModel& model, const Dataset& dataset,
                                        std::span<const std::string> ids);

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Central finite differences on every parameter against the analytic
/// gradient. `epsilon` must lie in [1e-6, 1e-2].
GradCheckReport grad_check(const FusionModel& model, const Example& example, double epsilon);
/// Same comparison against a caller-supplied gradient.
GradCheckReport compare_gradient(const FusionModel& model, const Example& example,
                                 double epsilon, const FusionParams& analytic);

// Model files: binary `MMFM` blob plus `<path>.json` metadata sidecar.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::byte> encode_model(const FusionModel& model);
FusionModel decode_model(std::span<const std::byte> bytes);
std::string model_metadata_json(const FusionModel& model);

void save_model(const FusionModel& model, const std::filesystem::path& path);
/// Loads the blob; restores metadata from the sidecar when present.
FusionModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

template <typename F>
void FusionParams::visit(const std::vector<ModalityId>& order, F&& fn) {
  if (attention) {
    for (const ModalityId& m : order) {
      Projection& p = attention->projections.at(m);
      fn("proj." + m.str() + ".weight", p.weight, false);
      fn("proj." + m.str() + ".bias", p.bias, true);
    }
    fn(std::string("attn.query"), attention->query, false);
    fn(std::string("attn.key"), attention->key, false);
    fn(std::string("attn.value"), attention->value, false);
  }
  fn(std::string("head.w_z"), head.w_z, false);
  fn(std::string("head.b_z"), head.b_z, true);
  fn(std::string("head.w_smax"), head.w_smax, false);
  fn(std::string("head.b_smax"), head.b_smax, true);
}

template <typename F>
void FusionParams::visit(const std::vector<ModalityId>& order, F&& fn) const {
  const_cast<FusionParams*>(this)->visit(
      order, [&](const std::string& name, Matrix& m, bool bias) {
        fn(name, static_cast<const Matrix&>(m), bias);
      });
}

}  // namespace fusionforge
