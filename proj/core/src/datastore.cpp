// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusionforge/datastore.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <unordered_map>

#include "fusionforge/csv.hpp"
#include "fusionforge/error.hpp"

namespace fusionforge {

bool ModalityId::is_valid(std::string_view id) noexcept {
  if (id.empty()) return false;
  auto lower = [](char c) { return c >= 'a' && c <= 'z'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!lower(id[0]) && id[0] != '_') return false;
  return std::all_of(id.begin() + 1, id.end(),
                     [&](char c) { return lower(c) || digit(c) || c == '_'; });
}

ModalityId::ModalityId(std::string id) : id_(std::move(id)) {
  if (!is_valid(id_)) {
    throw ValidationError("invalid modality id '" + id_ + "' (expected [a-z_][a-z0-9_]*)");
  }
}

std::optional<std::size_t> canonical_dim(const ModalityId& id) {
  static const std::map<std::string, std::size_t, std::less<>> kDims = {
      {"audio", 1024}, {"text", 5120}, {"vision", 768}, {"joint_at", 4096}};
  auto it = kDims.find(id.str());
  if (it == kDims.end()) return std::nullopt;
  return it->second;
}

Pooling parse_pooling(std::string_view name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "max") return Pooling::kMax;
  throw ConfigError("unknown pooling method '" + std::string(name) + "'");
}

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::kMean ? "mean" : "max";
}

std::vector<double> pool_sequence(const Matrix& rows, Pooling method) {
  if (rows.rows() == 0) throw ValidationError("pool_sequence: empty sequence");
  std::vector<double> out(rows.row(0).begin(), rows.row(0).end());
  for (std::size_t r = 1; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] = method == Pooling::kMean ? out[c] + row[c] : std::max(out[c], row[c]);
    }
  }
  if (method == Pooling::kMean) {
    const double n = static_cast<double>(rows.rows());
    for (double& v : out) v /= n;
  }
  return out;
}

std::vector<double> pool_sequence(const FeatureRecord& record, Pooling method) {
  Matrix m(record.rows, record.dim);
  for (std::size_t i = 0; i < record.values.size(); ++i) m.flat()[i] = record.values[i];
  return pool_sequence(m, method);
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "unlabeled") return Split::kUnlabeled;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kUnlabeled: return "unlabeled";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

const std::vector<std::string>& label_preset(std::string_view name) {
  static const std::vector<std::string> kMer6 = {"neutral", "angry",   "happy",
                                                 "sad",     "worried", "surprise"};
  static const std::vector<std::string> kMer8 = {"angry", "disgust", "fear",    "happy",
                                                 "sad",   "surprise", "neutral", "worried"};
  if (name == "mer6") return kMer6;
  if (name == "mer8") return kMer8;
  throw ConfigError("unknown label preset '" + std::string(name) + "' (expected mer6 or mer8)");
}

namespace {

void validate_entry(const ManifestEntry& e, std::size_t num_classes) {
  if (e.sample_id.empty()) throw ValidationError("manifest: empty sample id");
  if (e.split == Split::kTrain && !e.label) {
    throw ValidationError("manifest: train sample '" + e.sample_id + "' has no label");
  }
  if (e.split == Split::kUnlabeled && e.label) {
    throw ValidationError("manifest: unlabeled sample '" + e.sample_id + "' carries a label");
  }
  if (e.label && *e.label >= num_classes) {
    throw ValidationError("manifest: label index " + std::to_string(*e.label) +
                          " out of range for sample '" + e.sample_id + "'");
  }
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path,
                                         std::span<const std::string> vocab) {
  const csv::Table table = csv::read_file(path);
  const std::size_t id_col = table.column("sample_id");
  const std::size_t split_col = table.column("split");
  const std::size_t label_col = table.column("label");

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);

  std::vector<ManifestEntry> entries;
  entries.reserve(table.rows.size());
  for (const csv::Row& row : table.rows) {
    ManifestEntry e;
    e.sample_id = row[id_col];
    e.split = parse_split(row[split_col]);
    if (!row[label_col].empty()) {
      auto it = index.find(row[label_col]);
      if (it == index.end()) {
        throw ConfigError("manifest: label '" + row[label_col] + "' of sample '" + e.sample_id +
                          "' is not in the label vocabulary");
      }
      e.label = it->second;
    }
    validate_entry(e, vocab.size());
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries,
                    std::span<const std::string> vocab) {
  csv::Table table;
  table.header = {"sample_id", "split", "label"};
  for (const ManifestEntry& e : entries) {
    validate_entry(e, vocab.size());
    table.rows.push_back({e.sample_id, std::string(to_string(e.split)),
                          e.label ? vocab[*e.label] : std::string()});
  }
  csv::write_file(path, table);
}

Dataset::Dataset(std::vector<std::string> label_vocab, std::vector<ModalityInfo> modalities,
                 std::vector<ManifestEntry> entries, PooledMap pooled)
    : label_vocab_(std::move(label_vocab)),
      modalities_(std::move(modalities)),
      entries_(std::move(entries)),
      pooled_(std::move(pooled)) {
  if (label_vocab_.empty()) throw ConfigError("dataset: empty label vocabulary");
  std::set<std::string_view> names;
  for (const auto& name : label_vocab_) {
    if (!names.insert(name).second) throw ConfigError("dataset: duplicate label '" + name + "'");
  }

  std::set<ModalityId> declared;
  for (const ModalityInfo& m : modalities_) {
    if (m.dim == 0) throw ConfigError("dataset: modality '" + m.id.str() + "' has dim 0");
    if (!declared.insert(m.id).second) {
      throw ConfigError("dataset: modality '" + m.id.str() + "' declared twice");
    }
  }

  std::sort(entries_.begin(), entries_.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.sample_id < b.sample_id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    validate_entry(entries_[i], label_vocab_.size());
    if (i > 0 && entries_[i].sample_id == entries_[i - 1].sample_id) {
      throw ValidationError("dataset: duplicate sample id '" + entries_[i].sample_id + "'");
    }
  }

  // Keep only declared modalities and manifest samples.
  for (auto it = pooled_.begin(); it != pooled_.end();) {
    it = declared.count(it->first) ? std::next(it) : pooled_.erase(it);
  }

  std::vector<ResolutionError::Missing> missing;
  for (const ModalityInfo& m : modalities_) {
    auto& per_sample = pooled_[m.id];
    std::map<std::string, std::vector<double>> kept;
    for (const ManifestEntry& e : entries_) {
      auto it = per_sample.find(e.sample_id);
      if (it == per_sample.end()) {
        missing.emplace_back(m.id.str(), e.sample_id);
        continue;
      }
      if (it->second.size() != m.dim) {
        throw ValidationError("dataset: sample '" + e.sample_id + "' in modality '" +
                              m.id.str() + "' has length " + std::to_string(it->second.size()) +
                              ", expected " + std::to_string(m.dim));
      }
      kept.emplace(e.sample_id, std::move(it->second));
    }
    per_sample = std::move(kept);
  }
  if (!missing.empty()) {
    std::string msg = "dataset: " + std::to_string(missing.size()) + " unresolved sample(s):";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
      msg += " (" + missing[i].first + ", " + missing[i].second + ")";
    }
    if (shown < missing.size()) msg += " ...";
    throw ResolutionError(msg, std::move(missing));
  }
}

bool Dataset::has_modality(const ModalityId& id) const {
  return std::any_of(modalities_.begin(), modalities_.end(),
                     [&](const ModalityInfo& m) { return m.id == id; });
}

std::size_t Dataset::dim(const ModalityId& id) const {
  for (const ModalityInfo& m : modalities_) {
    if (m.id == id) return m.dim;
  }
  throw ConfigError("dataset: modality '" + id.str() + "' is not declared");
}

std::span<const double> Dataset::features(const ModalityId& id,
                                          std::string_view sample_id) const {
  auto mod = pooled_.find(id);
  if (mod != pooled_.end()) {
    auto it = mod->second.find(std::string(sample_id));
    if (it != mod->second.end()) return it->second;
  }
  throw ResolutionError("dataset: no '" + id.str() + "' features for sample '" +
                            std::string(sample_id) + "'",
                        {{id.str(), std::string(sample_id)}});
}

const ManifestEntry& Dataset::entry(std::string_view sample_id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), sample_id,
                             [](const ManifestEntry& e, std::string_view id) { return e.sample_id < id; });
  if (it == entries_.end() || it->sample_id != sample_id) {
    throw ResolutionError("dataset: unknown sample '" + std::string(sample_id) + "'", {});
  }
  return *it;
}

bool Dataset::contains(std::string_view sample_id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), sample_id,
                             [](const ManifestEntry& e, std::string_view id) { return e.sample_id < id; });
  return it != entries_.end() && it->sample_id == sample_id;
}

std::vector<std::string> Dataset::ids(Split split) const {
  std::vector<std::string> out;
  for (const ManifestEntry& e : entries_) {
    if (e.split == split) out.push_back(e.sample_id);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     std::span<const ModalitySource> modalities, const LoadOptions& options) {
  std::vector<ManifestEntry> entries = read_manifest(manifest_path, options.label_vocab);
  std::set<std::string_view> wanted;
  for (const ManifestEntry& e : entries) wanted.insert(e.sample_id);

  std::vector<ModalityInfo> infos;
  Dataset::PooledMap pooled;
  for (const ModalitySource& src : modalities) {
    infos.push_back({src.id, src.dim});
    auto& per_sample = pooled[src.id];
    for (const FeatureRecord& r : read_feature_file(src.file)) {
      if (r.dim != src.dim) {
        throw FormatError(FormatErrorCode::kDimMismatch,
                          "modality '" + src.id.str() + "': file " + src.file.string() +
                              " has dim " + std::to_string(r.dim) + ", declared " +
                              std::to_string(src.dim));
      }
      if (!wanted.count(r.sample_id)) continue;
      per_sample.emplace(r.sample_id, pool_sequence(r, options.pooling));
    }
  }
  return Dataset(options.label_vocab, std::move(infos), std::move(entries), std::move(pooled));
}

}  // namespace fusionforge
