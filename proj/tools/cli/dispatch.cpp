// Copyright 2026 The FusionForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dispatch.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "fusionforge/csv.hpp"
#include "fusionforge/denoise.hpp"
#include "fusionforge/ensemble.hpp"
#include "fusionforge/error.hpp"
#include "fusionforge/metrics.hpp"
#include "fusionforge/mining.hpp"
#include "fusionforge/synthgen.hpp"
#include "fusionforge/version.hpp"
#include "run_config.hpp"

namespace fusionforge::cli {

namespace {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

/// Train settings written into configs produced by `synth`: small enough to
/// run on one core in seconds.
TrainConfig desk_train_config(std::uint64_t seed) {
  TrainConfig t;
  t.d_model = 32;
  t.d_z = 32;
  t.epochs = 30;
  t.learning_rate = 3e-3;
  t.batch_size = 32;
  t.seed = seed;
  return t;
}

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

RunConfig load_with_overrides(const std::string& path, const GlobalOptions& g) {
  RunConfig c = load_run_config(path);
  if (g.seed) c.train.seed = *g.seed;
  if (g.threads) c.mining.threads = std::max<std::size_t>(1, *g.threads);
  return c;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t classes = 6;
  std::size_t labeled = 200;
  std::size_t unlabeled = 2000;
  std::size_t val = 300;
  std::size_t test = 300;
  double conflict = 0.0;
  double label_noise = 0.0;
  double separation = 4.0;
  double noise = 1.4;
  std::string modalities = "audio,text,vision,joint_at";
  std::size_t dim = 32;
  std::string rng = "splitmix64";
};

int run_synth(const SynthArgs& a, const GlobalOptions& g, std::ostream& out) {
  SynthConfig sc;
  sc.num_classes = a.classes;
  sc.labeled = a.labeled;
  sc.unlabeled = a.unlabeled;
  sc.val = a.val;
  sc.test = a.test;
  sc.conflict_rate = a.conflict;
  sc.label_noise = a.label_noise;
  sc.separation = a.separation;
  sc.noise = a.noise;
  sc.seed = g.seed.value_or(0);
  sc.rng = a.rng;
  sc.modalities.clear();
  for (const std::string& m : split_list(a.modalities)) sc.modalities.push_back({ModalityId(m), a.dim});

  const SynthResult result = generate(sc);
  const fs::path dir(a.out);
  const SynthPaths paths = write_synth(result, dir);

  RunConfig rc;
  rc.manifest = paths.manifest;
  rc.answers = paths.answers;
  rc.label_vocab = result.label_vocab;
  for (const SynthModality& m : sc.modalities) rc.modalities.push_back({m.id, m.dim, paths.features.at(m.id)});
  const bool canonical = std::all_of(sc.modalities.begin(), sc.modalities.end(), [](const SynthModality& m) {
    return canonical_dim(m.id).has_value();
  });
  if (!canonical || sc.modalities.size() != 4) {
    // Mining needs four learners: leave one modality out per learner, or use
    // the full set when there is only one.
    rc.group_specs.clear();
    std::vector<ModalityId> ids;
    for (const SynthModality& m : sc.modalities) ids.push_back(m.id);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<ModalityId> group;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids.size() == 1 || j != i % ids.size()) group.push_back(ids[j]);
      }
      rc.group_specs.emplace_back(std::move(group));
    }
  }
  rc.train = desk_train_config(sc.seed);
  rc.train.rng = sc.rng;
  write_text(dir / "config.json", to_json(rc, dir));
  out << "wrote " << result.samples.size() << " samples to " << dir.string() << "\n";
  return kExitOk;
}

// ---- train / eval ----------------------------------------------------------

int run_train(const std::string& config_path, const std::string& group, const std::string& out_path,
              std::optional<std::size_t> epochs, const std::string& fusion, const GlobalOptions& g,
              std::ostream& out) {
  RunConfig rc = load_with_overrides(config_path, g);
  if (epochs) rc.train.epochs = *epochs;
  if (!fusion.empty()) rc.train.fusion = parse_fusion_mode(fusion);
  const GroupSpec spec = group.empty() ? rc.group_specs.front() : GroupSpec::parse(group);
  for (const ModalityId& m : spec.modalities()) {
    if (std::none_of(rc.modalities.begin(), rc.modalities.end(),
                     [&](const ModalitySource& s) { return s.id == m; })) {
      throw ConfigError("train: group uses undeclared modality '" + m.str() + "'");
    }
  }
  const Dataset dataset = load_run_dataset(rc);
  const FusionModel model = train(dataset, spec, rc.train);
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  save_model(model, out_path);
  out << "trained " << spec.name() << ": final loss " << format_double(model.meta().final_loss) << "\n";
  return kExitOk;
}

std::vector<std::size_t> truth_for(const Dataset& dataset, std::span<const std::string> ids,
                                   const std::optional<fs::path>& answers_path) {
  std::map<std::string, std::size_t> answers;
  if (answers_path) answers = read_answers(*answers_path, dataset.label_vocab());
  std::vector<std::size_t> truth;
  for (const std::string& id : ids) {
    if (const auto& label = dataset.entry(id).label) {
      truth.push_back(*label);
    } else if (auto it = answers.find(id); it != answers.end()) {
      truth.push_back(it->second);
    } else {
      throw ValidationError("eval: no label for sample '" + id + "' (pass --answers)");
    }
  }
  return truth;
}

int run_eval(const std::string& config_path, const std::string& model_path, const std::string& split,
             const std::string& answers, const std::string& out_path, const GlobalOptions& g,
             std::ostream& out) {
  RunConfig rc = load_with_overrides(config_path, g);
  if (!answers.empty()) rc.answers = answers;
  const Dataset dataset = load_run_dataset(rc);
  const FusionModel model = load_model(model_path);
  const std::vector<std::string> ids = dataset.ids(parse_split(split));
  const std::vector<std::size_t> truth = truth_for(dataset, ids, rc.answers);
  const std::vector<std::size_t> pred = predict_labels(model, dataset, ids);
  const std::string report =
      to_json(evaluate(confusion(truth, pred, dataset.num_classes()), dataset.label_vocab()));
  if (out_path.empty()) {
    out << report;
  } else {
    write_text(out_path, report);
  }
  return kExitOk;
}

// ---- mine ------------------------------------------------------------------

int run_mine(const std::string& config_path, std::optional<std::size_t> iterations,
             const std::string& out_dir, bool stratify, const GlobalOptions& g, std::ostream& out) {
  RunConfig rc = load_with_overrides(config_path, g);
  if (iterations) rc.mining.iterations = *iterations;
  if (stratify) rc.mining.stratify = true;
  const Dataset dataset = load_run_dataset(rc);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  auto checkpoint = [&](const MiningState& s) {
    const fs::path iter_dir = dir / ("iter_" + std::to_string(s.iteration));
    fs::create_directories(iter_dir);
    for (std::size_t i = 0; i < s.learners.size(); ++i) {
      save_model(s.learners[i], iter_dir / ("learner_" + std::to_string(i) + ".bin"));
    }
    out << "iteration " << s.iteration << ": unlabeled " << s.unlabeled.size() << ", pseudo "
        << s.pseudo.size() << ", best val WAF " << format_double(s.history.back().best_val_waf())
        << "\n";
  };

  MiningState state = init_mining(dataset, rc.group_specs, rc.train, rc.mining);
  checkpoint(state);
  for (std::size_t i = 0; i < rc.mining.iterations; ++i) {
    state = mine_iteration(state, dataset, rc.train, rc.mining);
    checkpoint(state);
  }

  write_text(dir / "history.json", history_json(state));
  csv::Table pseudo;
  pseudo.header = {"sample_id", "label", "agreement", "iteration"};
  for (const auto& [id, p] : state.pseudo) {
    pseudo.rows.push_back({id, dataset.label_vocab()[p.label], std::to_string(p.agreement),
                           std::to_string(p.iteration)});
  }
  csv::write_file(dir / "pseudo_labels.csv", pseudo);
  return kExitOk;
}

// ---- ensemble --------------------------------------------------------------

int run_ensemble(const std::string& models_arg, const std::string& data_dir,
                 const std::string& config_path, const std::string& split,
                 const std::string& rank_split, const std::string& out_path, const GlobalOptions& g,
                 std::ostream& out) {
  if (data_dir.empty() == config_path.empty()) {
    throw ConfigError("ensemble: pass exactly one of --data or --config");
  }
  const RunConfig rc =
      load_with_overrides(config_path.empty() ? (fs::path(data_dir) / "config.json").string() : config_path, g);
  const Dataset dataset = load_run_dataset(rc);

  std::vector<NamedModel> models;
  for (const std::string& path : split_list(models_arg)) models.push_back({path, load_model(path)});
  if (models.empty()) throw ConfigError("ensemble: --models is empty");

  const Split ranking_split = rank_split.empty() ? rc.rank_split : parse_split(rank_split);
  const std::vector<RankedModel> ranking = rank_models(models, dataset, ranking_split);
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    out << "rank " << i + 1 << ": " << ranking[i].id << " (" << to_string(ranking_split)
        << " WAF " << format_double(ranking[i].score) << ")\n";
  }
  const std::vector<NamedModel> ranked = apply_ranking(std::move(models), ranking);
  const EnsembleResult result = ensemble_predict(ranked, dataset, parse_split(split));

  csv::Table table;
  table.header = {"sample_id", "label", "rounds_used"};
  for (std::size_t i = 0; i < result.sample_ids.size(); ++i) {
    table.rows.push_back({result.sample_ids[i], dataset.label_vocab()[result.labels[i]],
                          std::to_string(result.traces[i].rounds.size())});
  }
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  csv::write_file(out_path, table);
  return kExitOk;
}

// ---- denoise-select --------------------------------------------------------

int run_denoise(const std::string& input, const std::string& out_path, double threshold,
                bool normalize) {
  const csv::Table in = csv::read_file(input);
  const std::size_t id = in.column("sample_id");
  const std::size_t temp = in.column("text_temp");
  const std::size_t id0 = in.column("text_id0");
  const std::size_t id1 = in.column("text_id1");
  csv::Table table;
  table.header = {"sample_id", "choice", "sim0", "sim1"};
  for (const csv::Row& row : in.rows) {
    const SelectionDecision d =
        denoise_decide(TranscriptTriple{row[temp], row[id0], row[id1]}, threshold, normalize);
    table.rows.push_back({row[id], std::string(to_string(d.choice)), format_double(d.sim0),
                          format_double(d.sim1)});
  }
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  csv::write_file(out_path, table);
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fusionforge: multimodal late-fusion emotion recognition toolkit", "fusionforge"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print the version and exit");

  GlobalOptions g;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  auto* seed_opt = app.add_option("--seed", seed, "Override every configured seed");
  auto* threads_opt = app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multimodal dataset");
  synth->fallthrough();
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--classes", synth_args.classes, "Number of classes");
  synth->add_option("--labeled", synth_args.labeled, "Labeled (train) samples");
  synth->add_option("--unlabeled", synth_args.unlabeled, "Unlabeled samples");
  synth->add_option("--val", synth_args.val, "Validation samples");
  synth->add_option("--test", synth_args.test, "Test samples");
  synth->add_option("--conflict", synth_args.conflict, "Modality conflict rate in [0,1]");
  synth->add_option("--label-noise", synth_args.label_noise, "Train label noise in [0,1]");
  synth->add_option("--separation", synth_args.separation, "Distance between class means");
  synth->add_option("--noise", synth_args.noise, "Within-class standard deviation");
  synth->add_option("--modalities", synth_args.modalities, "Comma-separated modality ids");
  synth->add_option("--dim", synth_args.dim, "Dimension of every modality");
  synth->add_option("--rng", synth_args.rng, "Random engine: splitmix64 or mt19937_64");

  std::string config_path;
  std::string group;
  std::string out_path;
  std::string fusion;
  std::optional<std::size_t> epochs;
  auto* train_cmd = app.add_subcommand("train", "Train one fusion model on the train split");
  train_cmd->fallthrough();
  train_cmd->add_option("--config", config_path, "Run config JSON")->required();
  train_cmd->add_option("--group", group, "Group spec, e.g. audio,text,vision");
  train_cmd->add_option("--out", out_path, "Model output path")->required();
  train_cmd->add_option("--epochs", epochs, "Override epochs");
  train_cmd->add_option("--fusion", fusion, "attention or concat");

  std::string model_path;
  std::string split = "val";
  std::string answers;
  auto* eval_cmd = app.add_subcommand("eval", "Score a model (WAF, accuracy, per-class F1)");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--config", config_path, "Run config JSON")->required();
  eval_cmd->add_option("--model", model_path, "Model file")->required();
  eval_cmd->add_option("--split", split, "Split to score");
  eval_cmd->add_option("--answers", answers, "Sealed labels CSV for unlabeled splits");
  eval_cmd->add_option("--out", out_path, "Report path (stdout when omitted)");

  std::optional<std::size_t> iterations;
  bool stratify = false;
  auto* mine_cmd = app.add_subcommand("mine", "Iterative four-learner pseudo-label mining");
  mine_cmd->fallthrough();
  mine_cmd->add_option("--config", config_path, "Run config JSON")->required();
  mine_cmd->add_option("--iterations", iterations, "Number of mining rounds");
  mine_cmd->add_option("--out", out_path, "Output directory")->required();
  mine_cmd->add_flag("--stratify", stratify, "Stratify pseudo-label partitioning by class");

  std::string models_arg;
  std::string data_dir;
  std::string rank_split;
  std::string ens_split = "test";
  auto* ens_cmd = app.add_subcommand("ensemble", "Ranked mode-voting ensemble");
  ens_cmd->fallthrough();
  ens_cmd->add_option("--models", models_arg, "Comma-separated model files")->required();
  ens_cmd->add_option("--data", data_dir, "Dataset directory holding config.json");
  ens_cmd->add_option("--config", config_path, "Run config JSON (instead of --data)");
  ens_cmd->add_option("--split", ens_split, "Split to predict");
  ens_cmd->add_option("--rank-split", rank_split, "Split used to rank models");
  ens_cmd->add_option("--out", out_path, "Predictions CSV")->required();

  std::string input;
  double threshold = kDefaultSelectionThreshold;
  bool normalize = false;
  auto* den_cmd = app.add_subcommand("denoise-select", "Choose separated or original audio from transcripts");
  den_cmd->add_option("--input", input, "CSV sample_id,text_temp,text_id0,text_id1")->required();
  den_cmd->add_option("--out", out_path, "Output CSV")->required();
  den_cmd->add_option("--threshold", threshold, "Similarity gap threshold");
  den_cmd->add_flag("--normalize", normalize, "NFC-normalize and collapse whitespace first");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  if (show_version) {
    out << "fusionforge " << kVersionString << "\n";
    return kExitOk;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;

  try {
    if (*synth) return run_synth(synth_args, g, out);
    if (*train_cmd) return run_train(config_path, group, out_path, epochs, fusion, g, out);
    if (*eval_cmd) return run_eval(config_path, model_path, split, answers, out_path, g, out);
    if (*mine_cmd) return run_mine(config_path, iterations, out_path, stratify, g, out);
    if (*ens_cmd) {
      return run_ensemble(models_arg, data_dir, config_path, ens_split, rank_split, out_path, g, out);
    }
    if (*den_cmd) return run_denoise(input, out_path, threshold, normalize);
    err << "error: a subcommand is required\n\n" << app.help();
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace fusionforge::cli
