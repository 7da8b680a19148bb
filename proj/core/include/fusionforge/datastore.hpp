// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionforge/matrix.hpp"

namespace fusionforge {

/// Identifier of an input channel. Matches [a-z_][a-z0-9_]*.
class ModalityId {
 public:
  explicit ModalityId(std::string id);

  static bool is_valid(std::string_view id) noexcept;

  const std::string& str() const noexcept { return id_; }

  auto operator<=>(const ModalityId&) const = default;

 private:
  std::string id_;
};

namespace modality {
inline const ModalityId kAudio{"audio"};
inline const ModalityId kText{"text"};
inline const ModalityId kVision{"vision"};
inline const ModalityId kJointAudioText{"joint_at"};
}  // namespace modality

/// Native embedding width of the four canonical encoders, if `id` is one.
std::optional<std::size_t> canonical_dim(const ModalityId& id);

/// One sample's embedding sequence: `rows` × `dim` float32 values, row-major.
struct FeatureRecord {
  std::string sample_id;
  std::uint32_t dim = 0;
  std::uint32_t rows = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(values).subspan(r * dim, dim);
  }
};

/// Serializes records into the `MMF1` layout. Throws FormatError on a dim
/// mismatch and ValidationError on duplicate or invalid ids.
std::vector<std::byte> encode_feature_file(std::span<const FeatureRecord> records,
                                           std::uint32_t dim);
std::vector<FeatureRecord> decode_feature_file(std::span<const std::byte> bytes);

void write_feature_file(std::span<const FeatureRecord> records, std::uint32_t dim,
                        const std::filesystem::path& path);
std::vector<FeatureRecord> read_feature_file(const std::filesystem::path& path);

enum class Pooling { kMean, kMax };

Pooling parse_pooling(std::string_view name);
std::string_view to_string(Pooling pooling);

/// Reduces an R×D sequence to a D-vector. Throws ValidationError when R = 0.
std::vector<double> pool_sequence(const Matrix& rows, Pooling method);
std::vector<double> pool_sequence(const FeatureRecord& record, Pooling method);

enum class Split { kTrain, kUnlabeled, kVal, kTest };

Split parse_split(std::string_view name);
std::string_view to_string(Split split);

struct ManifestEntry {
  std::string sample_id;
  Split split = Split::kTrain;
  std::optional<std::size_t> label;

  bool operator==(const ManifestEntry&) const = default;
};

/// Six-class default vocabulary and the eight-class preset.
const std::vector<std::string>& label_preset(std::string_view name);
inline constexpr std::string_view kDefaultLabelPreset = "mer6";

/// Reads `sample_id,split,label`; labels are resolved against `vocab`.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path,
                                         std::span<const std::string> vocab);
void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestEntry> entries,
                    std::span<const std::string> vocab);

struct ModalityInfo {
  ModalityId id;
  std::size_t dim;

  bool operator==(const ModalityInfo&) const = default;
};

/// Immutable collection of pooled per-modality vectors with labels and
/// splits. Entries are kept sorted by sample id, so two datasets built from
/// permuted manifests compare equal.
class Dataset {
 public:
  using PooledMap = std::map<ModalityId, std::map<std::string, std::vector<double>>>;

  Dataset(std::vector<std::string> label_vocab, std::vector<ModalityInfo> modalities,
          std::vector<ManifestEntry> entries, PooledMap pooled);

  const std::vector<std::string>& label_vocab() const noexcept { return label_vocab_; }
  std::size_t num_classes() const noexcept { return label_vocab_.size(); }
  const std::vector<ModalityInfo>& modalities() const noexcept { return modalities_; }
  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }

  bool has_modality(const ModalityId& id) const;
  std::size_t dim(const ModalityId& id) const;

  /// Pooled vector; throws ResolutionError when absent.
  std::span<const double> features(const ModalityId& id, std::string_view sample_id) const;

  const ManifestEntry& entry(std::string_view sample_id) const;
  bool contains(std::string_view sample_id) const;

  /// Sample ids in a split, ascending.
  std::vector<std::string> ids(Split split) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<std::string> label_vocab_;
  std::vector<ModalityInfo> modalities_;
  std::vector<ManifestEntry> entries_;
  PooledMap pooled_;
};

struct ModalitySource {
  ModalityId id;
  std::size_t dim;
  std::filesystem::path file;
};

struct LoadOptions {
  std::vector<std::string> label_vocab = label_preset(kDefaultLabelPreset);
  Pooling pooling = Pooling::kMean;
};

/// Reads the manifest and each declared modality file, pooling every
/// sequence. Records for samples outside the manifest are ignored.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     std::span<const ModalitySource> modalities,
                     const LoadOptions& options = {});

}  // namespace fusionforge
