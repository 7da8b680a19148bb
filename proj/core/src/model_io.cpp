// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "byte_io.hpp"
#include "fusionforge/error.hpp"
#include "fusionforge/fusion.hpp"

namespace fusionforge {

namespace {

constexpr std::string_view kModelMagic = "MMFM";

std::uint32_t checked_u32(std::size_t v, std::string_view what) {
  if (v > 0xFFFFFFFFULL) throw ValidationError(std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

// Layout (little-endian):
//   "MMFM" u32 version
//   u32 vocab_count  { u16 len, bytes }*
//   u32 spec_count   { u16 len, bytes, u32 dim }*
//   u32 fusion_mode (0 attention, 1 concat)  u32 d_model  u32 d_z
//   u32 tensor_count { u16 name_len, name, u32 rows, u32 cols, rows*cols f32 }*
std::vector<std::byte> encode_model(const FusionModel& model) {
  detail::ByteWriter w;
  w.put_bytes(kModelMagic);
  w.put<std::uint32_t>(kModelFormatVersion);

  w.put<std::uint32_t>(checked_u32(model.label_vocab().size(), "vocab size"));
  for (const std::string& label : model.label_vocab()) w.put_short_string(label, "label");

  w.put<std::uint32_t>(checked_u32(model.spec().size(), "group size"));
  for (std::size_t i = 0; i < model.spec().size(); ++i) {
    w.put_short_string(model.spec().modalities()[i].str(), "modality id");
    w.put<std::uint32_t>(checked_u32(model.dims()[i], "modality dim"));
  }

  w.put<std::uint32_t>(model.mode() == FusionMode::kAttention ? 0U : 1U);
  w.put<std::uint32_t>(checked_u32(model.d_model(), "d_model"));
  w.put<std::uint32_t>(checked_u32(model.d_z(), "d_z"));

  std::uint32_t count = 0;
  model.visit_parameters([&](const std::string&, const Matrix&, bool) { ++count; });
  w.put<std::uint32_t>(count);
  std::vector<float> buf;
  model.visit_parameters([&](const std::string& name, const Matrix& m, bool) {
    w.put_short_string(name, "tensor name");
    w.put<std::uint32_t>(checked_u32(m.rows(), "rows"));
    w.put<std::uint32_t>(checked_u32(m.cols(), "cols"));
    buf.assign(m.flat().begin(), m.flat().end());
    w.put_floats(buf);
  });
  return std::move(w).take();
}

FusionModel decode_model(std::span<const std::byte> bytes) {
  detail::ByteReader in(bytes, "model file");
  if (in.remaining() < kModelMagic.size() ||
      in.get_bytes(kModelMagic.size(), "magic") != kModelMagic) {
    throw FormatError(FormatErrorCode::kBadMagic, "model file: bad magic (expected MMFM)", 0);
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kModelFormatVersion) {
    throw FormatError(FormatErrorCode::kUnsupportedVersion,
                      "model file: unsupported version " + std::to_string(version), 4);
  }

  std::vector<std::string> vocab(in.get<std::uint32_t>("vocab count"));
  for (std::string& label : vocab) label = in.get_short_string("label");

  const auto spec_count = in.get<std::uint32_t>("group size");
  std::vector<ModalityId> mods;
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < spec_count; ++i) {
    std::string id = in.get_short_string("modality id");
    if (!ModalityId::is_valid(id)) {
      throw FormatError(FormatErrorCode::kMalformed, "model file: invalid modality id '" + id + "'",
                        in.offset());
    }
    mods.emplace_back(std::move(id));
    dims.push_back(in.get<std::uint32_t>("modality dim"));
  }

  const auto mode_code = in.get<std::uint32_t>("fusion mode");
  if (mode_code > 1) {
    throw FormatError(FormatErrorCode::kMalformed, "model file: unknown fusion mode", in.offset());
  }
  const FusionMode mode = mode_code == 0 ? FusionMode::kAttention : FusionMode::kConcat;
  const auto d_model = in.get<std::uint32_t>("d_model");
  const auto d_z = in.get<std::uint32_t>("d_z");

  // Build the expected layout, then fill it tensor by tensor.
  FusionParams params;
  std::size_t head_in = 0;
  if (mode == FusionMode::kAttention) {
    AttentionParams a;
    a.d_model = d_model;
    for (std::size_t i = 0; i < mods.size(); ++i) {
      a.projections.emplace(mods[i], Projection{Matrix(dims[i], d_model), Matrix(1, d_model)});
    }
    a.query = a.key = a.value = Matrix(d_model, d_model);
    params.attention = std::move(a);
    head_in = d_model;
  } else {
    for (std::size_t d : dims) head_in += d;
  }
  params.head = FusionHead{Matrix(head_in, d_z), Matrix(1, d_z), Matrix(d_z, vocab.size()),
                           Matrix(1, vocab.size())};

  const auto tensor_count = in.get<std::uint32_t>("tensor count");
  std::uint32_t seen = 0;
  std::vector<float> buf;
  params.visit(mods, [&](const std::string& name, Matrix& m, bool) {
    if (seen++ >= tensor_count) {
      throw FormatError(FormatErrorCode::kCountMismatch,
                        "model file: missing tensor '" + name + "'", in.offset());
    }
    const std::string got = in.get_short_string("tensor name");
    const auto rows = in.get<std::uint32_t>("tensor rows");
    const auto cols = in.get<std::uint32_t>("tensor cols");
    if (got != name || rows != m.rows() || cols != m.cols()) {
      throw FormatError(FormatErrorCode::kMalformed,
                        "model file: expected tensor '" + name + "' " + std::to_string(m.rows()) +
                            "x" + std::to_string(m.cols()) + ", found '" + got + "' " +
                            std::to_string(rows) + "x" + std::to_string(cols),
                        in.offset());
    }
    buf.resize(m.size());
    in.get_floats(buf, "tensor payload");
    for (std::size_t i = 0; i < buf.size(); ++i) m.flat()[i] = buf[i];
  });
  if (seen != tensor_count || in.remaining() != 0) {
    throw FormatError(FormatErrorCode::kCountMismatch,
                      "model file: unexpected trailing data or tensor count", in.offset());
  }

  try {
    return FusionModel(std::move(vocab), GroupSpec(std::move(mods)), std::move(dims), mode,
                       std::move(params));
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorCode::kMalformed, std::string("model file: ") + e.what());
  }
}

std::string model_metadata_json(const FusionModel& model) {
  const TrainingMeta& meta = model.meta();
  const TrainConfig& c = meta.config;
  nlohmann::ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["group_spec"] = model.spec().name();
  j["label_vocab"] = model.label_vocab();
  j["fusion"] = std::string(to_string(model.mode()));
  j["train"] = {{"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"d_model", c.d_model},
                {"d_z", c.d_z},
                {"weight_decay", c.weight_decay},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_epsilon", c.adam_epsilon},
                {"rng", c.rng}};
  j["final_loss"] = meta.final_loss;
  j["epoch_losses"] = meta.epoch_losses;
  return j.dump(2) + "\n";
}

void save_model(const FusionModel& model, const std::filesystem::path& path) {
  detail::write_binary_file(path.string(), encode_model(model));
  std::ofstream side(path.string() + ".json", std::ios::binary | std::ios::trunc);
  if (!side) throw IoError("cannot write " + path.string() + ".json");
  side << model_metadata_json(model);
}

FusionModel load_model(const std::filesystem::path& path) {
  FusionModel model = decode_model(detail::read_binary_file(path.string()));
  const std::filesystem::path sidecar = path.string() + ".json";
  if (!std::filesystem::exists(sidecar)) return model;

  std::ifstream in(sidecar);
  nlohmann::json j;
  try {
    in >> j;
    TrainingMeta meta;
    const auto& t = j.at("train");
    meta.config.learning_rate = t.at("learning_rate").get<double>();
    meta.config.batch_size = t.at("batch_size").get<std::size_t>();
    meta.config.epochs = t.at("epochs").get<std::size_t>();
    meta.config.seed = t.at("seed").get<std::uint64_t>();
    meta.config.d_model = t.at("d_model").get<std::size_t>();
    meta.config.d_z = t.at("d_z").get<std::size_t>();
    meta.config.weight_decay = t.at("weight_decay").get<double>();
    meta.config.beta1 = t.at("beta1").get<double>();
    meta.config.beta2 = t.at("beta2").get<double>();
    meta.config.adam_epsilon = t.at("adam_epsilon").get<double>();
    meta.config.rng = t.at("rng").get<std::string>();
    meta.config.fusion = model.mode();
    meta.final_loss = j.at("final_loss").get<double>();
    meta.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    model.set_meta(std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorCode::kMalformed,
                      "model sidecar " + sidecar.string() + ": " + e.what());
  }
  return model;
}

}  // namespace fusionforge
