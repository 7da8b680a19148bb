// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "fusionforge/error.hpp"

namespace fusionforge::cli {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + where + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  std::error_code ec;
  auto rel = std::filesystem::relative(p, base, ec);
  if (ec || rel.empty() || rel.string().starts_with("..")) return p.generic_string();
  return rel.generic_string();
}

TrainConfig parse_train(const json& t) {
  TrainConfig c;
  const std::string w = "train.";
  c.learning_rate = get_or(t, "learning_rate", c.learning_rate, w);
  c.batch_size = get_or(t, "batch_size", c.batch_size, w);
  c.epochs = get_or(t, "epochs", c.epochs, w);
  c.seed = get_or(t, "seed", c.seed, w);
  c.d_model = get_or(t, "d_model", c.d_model, w);
  c.d_z = get_or(t, "d_z", c.d_z, w);
  c.weight_decay = get_or(t, "weight_decay", c.weight_decay, w);
  c.beta1 = get_or(t, "beta1", c.beta1, w);
  c.beta2 = get_or(t, "beta2", c.beta2, w);
  c.adam_epsilon = get_or(t, "adam_epsilon", c.adam_epsilon, w);
  c.fusion = parse_fusion_mode(get_or<std::string>(t, "fusion", "attention", w));
  c.rng = get_or<std::string>(t, "rng", c.rng, w);
  c.validate();
  return c;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  RunConfig c;
  if (!j.contains("manifest")) throw ConfigError("config: missing 'manifest'");
  c.manifest = resolve(base_dir, get_or<std::string>(j, "manifest", "", ""));
  if (j.contains("answers")) c.answers = resolve(base_dir, get_or<std::string>(j, "answers", "", ""));

  if (j.contains("label_vocab")) {
    c.label_vocab = get_or<std::vector<std::string>>(j, "label_vocab", {}, "");
  } else {
    c.label_vocab = label_preset(get_or<std::string>(j, "label_preset", "mer6", ""));
  }
  c.pooling = parse_pooling(get_or<std::string>(j, "pooling", "mean", ""));

  if (!j.contains("modalities") || !j.at("modalities").is_array() || j.at("modalities").empty()) {
    throw ConfigError("config: 'modalities' must be a non-empty array");
  }
  std::set<ModalityId> declared;
  for (const json& m : j.at("modalities")) {
    const std::string id = get_or<std::string>(m, "id", "", "modalities[].");
    if (!ModalityId::is_valid(id)) throw ConfigError("config: invalid modality id '" + id + "'");
    ModalityId mid(id);
    std::size_t dim = get_or<std::size_t>(m, "dim", 0, "modalities[].");
    if (dim == 0) {
      auto canonical = canonical_dim(mid);
      if (!canonical) throw ConfigError("config: modality '" + id + "' needs a positive 'dim'");
      dim = *canonical;
    }
    const std::string file = get_or<std::string>(m, "file", id + ".mmf", "modalities[].");
    if (!declared.insert(mid).second) throw ConfigError("config: modality '" + id + "' declared twice");
    c.modalities.push_back({mid, dim, resolve(base_dir, file)});
  }

  if (j.contains("group_specs")) {
    c.group_specs.clear();
    for (const std::string& s : get_or<std::vector<std::string>>(j, "group_specs", {}, "")) {
      c.group_specs.push_back(GroupSpec::parse(s));
    }
  }
  for (const GroupSpec& g : c.group_specs) {
    for (const ModalityId& m : g.modalities()) {
      if (!declared.count(m)) {
        throw ConfigError("config: group '" + g.name() + "' references undeclared modality '" +
                          m.str() + "'");
      }
    }
  }

  c.train = parse_train(j.value("train", json::object()));
  const json mining = j.value("mining", json::object());
  c.mining.iterations = get_or(mining, "iterations", c.mining.iterations, "mining.");
  c.mining.stratify = get_or(mining, "stratify", c.mining.stratify, "mining.");
  c.mining.threads = get_or<std::size_t>(j, "threads", 1, "");
  if (c.mining.threads == 0) c.mining.threads = 1;
  const json ensemble = j.value("ensemble", json::object());
  c.rank_split = parse_split(get_or<std::string>(ensemble, "rank_split", "val", "ensemble."));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig c = parse_run_config(buf.str(), path.parent_path());
  if (!std::filesystem::exists(c.manifest)) {
    throw ConfigError("config: manifest " + c.manifest.string() + " does not exist");
  }
  for (const ModalitySource& m : c.modalities) {
    if (!std::filesystem::exists(m.file)) {
      throw ConfigError("config: feature file " + m.file.string() + " does not exist");
    }
  }
  return c;
}

std::string to_json(const RunConfig& c, const std::filesystem::path& base_dir) {
  nlohmann::ordered_json j;
  j["manifest"] = relative_to(c.manifest, base_dir);
  if (c.answers) j["answers"] = relative_to(*c.answers, base_dir);
  j["label_vocab"] = c.label_vocab;
  j["pooling"] = std::string(to_string(c.pooling));
  j["modalities"] = nlohmann::ordered_json::array();
  for (const ModalitySource& m : c.modalities) {
    j["modalities"].push_back(
        {{"id", m.id.str()}, {"dim", m.dim}, {"file", relative_to(m.file, base_dir)}});
  }
  j["group_specs"] = nlohmann::ordered_json::array();
  for (const GroupSpec& g : c.group_specs) j["group_specs"].push_back(g.name());
  const TrainConfig& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
                {"epochs", t.epochs},               {"seed", t.seed},
                {"d_model", t.d_model},             {"d_z", t.d_z},
                {"weight_decay", t.weight_decay},   {"beta1", t.beta1},
                {"beta2", t.beta2},                 {"adam_epsilon", t.adam_epsilon},
                {"fusion", std::string(to_string(t.fusion))}, {"rng", t.rng}};
  j["mining"] = {{"iterations", c.mining.iterations}, {"stratify", c.mining.stratify}};
  j["ensemble"] = {{"rank_split", std::string(to_string(c.rank_split))}};
  j["threads"] = c.mining.threads;
  return j.dump(2) + "\n";
}

Dataset load_run_dataset(const RunConfig& config) {
  LoadOptions options;
  options.label_vocab = config.label_vocab;
  options.pooling = config.pooling;
  return load_dataset(config.manifest, config.modalities, options);
}

}  // namespace fusionforge::cli
