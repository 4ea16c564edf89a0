//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Command-line driver: synth, tag, train, eval, rationales, report.
// Exit codes: 0 success, 2 usage or input error, 3 integrity error.

#ifndef INVRAT_CLI_HPP_
#define INVRAT_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "invrat/attributes.hpp"
#include "invrat/checkpoint.hpp"
#include "invrat/corpus.hpp"
#include "invrat/error.hpp"
#include "invrat/eval.hpp"
#include "invrat/game.hpp"
#include "invrat/synth.hpp"
#include "json.hpp"

namespace invrat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIntegrity = 3;

inline constexpr const char* kSplitFiles[3] = {"train.tsv", "dev.tsv", "test.tsv"};
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kLogFile = "train_log.jsonl";
inline constexpr const char* kDevReportsFile = "dev_reports.json";
inline constexpr const char* kCheckpointDir = "checkpoints";

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  bool force = false;
  bool paper_hparams = false;
};

inline std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch-%02d.json", epoch);
  return buf;
}

// Creates `dir`, or wipes it under --force. Refuses an existing dir otherwise.
inline void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!force) {
      throw Error(ErrorKind::kInvalidArgument,
                  "output directory " + dir.string() + " exists (use --force)");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInvalidArgument, "bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw Error(ErrorKind::kInvalidArgument, "empty seed list");
  return seeds;
}

// Defaults, then the preset, then the config file, then --seed.
inline TrainConfig resolve_config(const GlobalOptions& g) {
  TrainConfig cfg = g.paper_hparams ? TrainConfig::paper_preset() : TrainConfig{};
  if (!g.config.empty()) {
    try {
      from_json(read_json(g.config), cfg);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kInvalidArgument, std::string("config: ") + e.what());
    }
  }
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

inline std::vector<Document> lexicon_filtered(std::vector<Document> docs,
                                              const AttributeLexicon& lex) {
  for (auto& d : docs) {
    d = remove_lexicon_tokens(std::move(d), lex);
    // A fully removed doc is one PAD; the predictor reads it as MASKED so
    // pooling has a row to average.
    if (d.tokens.size() == 1 && d.tokens[0] == Vocabulary::kPad) d.tokens[0] = Vocabulary::kMasked;
  }
  return docs;
}

inline std::map<std::string, std::string> lexicon_digests(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const char* name : {"noi.txt", "oi.txt", "oni.txt"}) {
    out[std::string("lexicon/") + name] = file_digest(dir / name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline int cmd_synth(const GlobalOptions& g, const std::string& spec_file) {
  SynthSpec spec;
  if (!spec_file.empty()) {
    try {
      from_json(read_json(spec_file), spec);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kInvalidArgument, std::string("synth spec: ") + e.what());
    }
  }
  if (g.seed) spec.seed = *g.seed;
  spec.validate();
  if (g.out.empty()) throw Error(ErrorKind::kInvalidArgument, "--out is required");
  const auto corpus = synth_generate(spec);
  prepare_output_dir(g.out, g.force);
  const fs::path out(g.out);
  write_tsv(out / kSplitFiles[0], corpus.split.train, true);
  write_tsv(out / kSplitFiles[1], corpus.split.dev, true);
  write_tsv(out / kSplitFiles[2], corpus.split.test, true);
  write_json(out / "synth.json", corpus.sidecar());
  std::cout << "wrote " << corpus.split.train.size() << "/" << corpus.split.dev.size()
            << "/" << corpus.split.test.size() << " docs to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tag
// ---------------------------------------------------------------------------

inline int cmd_tag(const GlobalOptions& g, const std::string& corpus_dir,
                   const std::string& lexicon_dir, const std::string& kind_name) {
  const auto kind = parse_environment_kind(kind_name);
  if (!kind) {
    throw Error(ErrorKind::kInvalidArgument, "unknown environment kind '" + kind_name + "'");
  }
  const auto lex = AttributeLexicon::load(lexicon_dir);
  std::optional<DialectLexicon> dlex;
  const fs::path in_dir(corpus_dir);
  const fs::path out_dir = g.out.empty() ? in_dir : fs::path(g.out);

  std::vector<std::pair<std::string, std::vector<Document>>> parts;
  for (const char* name : kSplitFiles) {
    if (!fs::exists(in_dir / name)) continue;
    parts.emplace_back(name, load_tsv(in_dir / name).docs);
  }
  if (parts.empty()) {
    throw Error(ErrorKind::kIo, "no train/dev/test.tsv in " + in_dir.string());
  }
  bool need_proxy = false;
  for (const auto& [_, docs] : parts) {
    for (const auto& d : docs) need_proxy = need_proxy || !d.dialect_from_column;
  }
  if (need_proxy) dlex = DialectLexicon::load(lexicon_dir);

  if (out_dir != in_dir) {
    if (fs::exists(out_dir) && !g.force) {
      throw Error(ErrorKind::kInvalidArgument,
                  "output directory " + out_dir.string() + " exists (use --force)");
    }
    fs::create_directories(out_dir);
  }
  std::array<std::size_t, EnvironmentId::kNumEnvironments> env_counts{};
  std::size_t total = 0;
  for (auto& [name, docs] : parts) {
    for (auto& d : docs) {
      tag_document(d, lex, dlex ? &*dlex : nullptr, *kind);
      ++env_counts[static_cast<std::size_t>(*d.environment)];
      ++total;
    }
    write_tsv(out_dir / name, docs, true);
  }
  const auto env_name = [&](int i) -> std::string {
    if (*kind == EnvironmentKind::kDialectal) return dialect_name(static_cast<Dialect>(i));
    static const char* names[] = {"nOI", "OI", "OnI", "none"};
    return names[i];
  };
  std::cout << "tagged " << total << " docs (" << environment_kind_name(*kind) << ")\n";
  for (int i = 0; i < EnvironmentId::kNumEnvironments; ++i) {
    const auto n = env_counts[static_cast<std::size_t>(i)];
    char line[128];
    std::snprintf(line, sizeof(line), "  %-8s %8zu  %5.1f%%\n", env_name(i).c_str(), n,
                  100.0 * static_cast<double>(n) / static_cast<double>(total));
    std::cout << line;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainInputs {
  DatasetSplit split;
  Vocabulary vocab;
  std::map<std::string, std::string> digests;
};

inline TrainInputs load_train_inputs(const fs::path& corpus_dir, const TrainConfig& cfg,
                                     const std::string& lexicon_dir) {
  TrainInputs in;
  const auto train_path = corpus_dir / kSplitFiles[0];
  const auto dev_path = corpus_dir / kSplitFiles[1];
  auto train = load_tsv(train_path, std::nullopt, cfg.min_count);
  auto dev = load_tsv(dev_path, train.vocab);
  if (cfg.mode == RunMode::kInvrat) {
    for (const auto* part : {&train, &dev}) {
      for (const auto& d : part->docs) {
        if (!d.environment) {
          throw Error(ErrorKind::kMissingEnvironment,
                      "invrat mode needs a tagged corpus; '" + d.id +
                          "' has no environment (run `invrat tag` first)");
        }
      }
    }
  }
  in.digests["train.tsv"] = file_digest(train_path);
  in.digests["dev.tsv"] = file_digest(dev_path);
  if (fs::exists(corpus_dir / kSplitFiles[2])) {
    in.digests["test.tsv"] = file_digest(corpus_dir / kSplitFiles[2]);
  }
  in.vocab = train.vocab;
  in.split.train = std::move(train.docs);
  in.split.dev = std::move(dev.docs);
  if (cfg.mode == RunMode::kLexicalRemoval) {
    if (lexicon_dir.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "lexical-removal needs --lexicons");
    }
    const auto lex = AttributeLexicon::load(lexicon_dir);
    in.split.train = lexicon_filtered(std::move(in.split.train), lex);
    in.split.dev = lexicon_filtered(std::move(in.split.dev), lex);
    for (const auto& [k, v] : lexicon_digests(lexicon_dir)) in.digests[k] = v;
  }
  return in;
}

inline int run_one_seed(const fs::path& run_dir, const TrainInputs& in, const TrainConfig& cfg,
                        const std::vector<std::uint64_t>& all_seeds,
                        const fs::path& corpus_dir, const std::string& lexicon_dir) {
  fs::create_directories(run_dir / kCheckpointDir);
  RunManifest manifest;
  manifest.config = cfg;
  manifest.input_digests = in.digests;
  manifest.seeds = all_seeds;
  manifest.layout = {{"corpus", fs::absolute(corpus_dir).lexically_normal().string()},
                     {"log", kLogFile},
                     {"dev_reports", kDevReportsFile},
                     {"checkpoints", kCheckpointDir}};
  if (!lexicon_dir.empty()) {
    manifest.layout["lexicons"] = fs::absolute(lexicon_dir).lexically_normal().string();
  }
  manifest.write(run_dir / kManifestFile);

  std::ofstream log(run_dir / kLogFile, std::ios::binary);
  if (!log) throw Error(ErrorKind::kIo, "cannot write training log");
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s, const PlayerSet&) { log << s.to_json().dump() << '\n'; };
  json reports = json::array();
  hooks.on_epoch = [&](const EpochRecord& rec, const TrainState& st) {
    PlayerSet players = st.players;
    save_checkpoint(run_dir / kCheckpointDir / checkpoint_name(rec.epoch), cfg, in.vocab,
                    players, rec.epoch, st.order_rng, st.mask_rng);
    reports.push_back(rec.dev);
    std::cerr << "  seed " << cfg.seed << " epoch " << rec.epoch << "/" << cfg.epochs
              << "  dev F1 " << rec.dev.f1 << "\n";
  };
  train(in.split, in.vocab.size(), cfg, hooks);
  write_json(run_dir / kDevReportsFile, reports);
  return kExitOk;
}

inline int cmd_train(const GlobalOptions& g, const std::string& corpus_dir,
                     const std::string& mode_name, const std::string& seeds_arg,
                     const std::string& lexicon_dir, bool print_config) {
  TrainConfig cfg = resolve_config(g);
  if (!mode_name.empty()) {
    const auto m = parse_run_mode(mode_name);
    if (!m) throw Error(ErrorKind::kInvalidArgument, "unknown mode '" + mode_name + "'");
    cfg.mode = *m;
  }
  cfg.validate();
  if (print_config) {
    std::cout << json(cfg).dump(2) << "\n";
    return kExitOk;
  }
  if (corpus_dir.empty()) throw Error(ErrorKind::kInvalidArgument, "--corpus is required");
  if (g.out.empty()) throw Error(ErrorKind::kInvalidArgument, "--out is required");
  const auto seeds = seeds_arg.empty() ? std::vector<std::uint64_t>{cfg.seed}
                                       : parse_seed_list(seeds_arg);
  const TrainInputs in = load_train_inputs(corpus_dir, cfg, lexicon_dir);

  const fs::path out(g.out);
  for (auto seed : seeds) {
    const auto dir = out / ("seed-" + std::to_string(seed));
    if (fs::exists(dir) && !g.force) {
      throw Error(ErrorKind::kInvalidArgument,
                  "run directory " + dir.string() + " exists (use --force)");
    }
  }
  for (auto seed : seeds) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    const auto dir = out / ("seed-" + std::to_string(seed));
    prepare_output_dir(dir, g.force);
    std::cerr << "training " << run_mode_name(cfg.mode) << " seed " << seed << " -> "
              << dir.string() << "\n";
    run_one_seed(dir, in, run_cfg, seeds, corpus_dir, lexicon_dir);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

struct LoadedRun {
  fs::path dir;
  RunManifest manifest;
  TrainConfig config;
  std::vector<MetricsReport> dev_reports;
};

// Re-hashes every recorded input; any mismatch is an integrity error.
inline void verify_run_inputs(const LoadedRun& run) {
  const fs::path corpus(run.manifest.layout.at("corpus"));
  for (const auto& [name, digest] : run.manifest.input_digests) {
    fs::path path;
    if (name.rfind("lexicon/", 0) == 0) {
      path = fs::path(run.manifest.layout.at("lexicons")) / name.substr(8);
    } else {
      path = corpus / name;
    }
    if (!fs::exists(path)) {
      throw Error(ErrorKind::kIntegrity, "recorded input " + path.string() + " is missing");
    }
    verify_digest(path, digest);
  }
}

inline LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.dir = dir;
  if (!fs::exists(dir / kManifestFile)) {
    throw Error(ErrorKind::kIo, dir.string() + " is not a run directory");
  }
  run.manifest = RunManifest::from_json(read_json(dir / kManifestFile));
  from_json(run.manifest.config, run.config);
  try {
    run.dev_reports = read_json(dir / kDevReportsFile).get<std::vector<MetricsReport>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("dev reports: ") + e.what());
  }
  if (run.dev_reports.empty()) {
    throw Error(ErrorKind::kInvalidArgument, dir.string() + " has no dev reports");
  }
  return run;
}

inline std::vector<Document> load_eval_docs(const LoadedRun& run, const fs::path& file,
                                            const Vocabulary& vocab, bool need_tags) {
  auto loaded = load_tsv(file, vocab);
  if (need_tags && loaded.columns < 6) {
    throw Error(ErrorKind::kParse, file.string() +
                                       " lacks the dialect/attribute/environment columns");
  }
  if (run.config.mode == RunMode::kLexicalRemoval) {
    return lexicon_filtered(std::move(loaded.docs),
                            AttributeLexicon::load(run.manifest.layout.at("lexicons")));
  }
  return std::move(loaded.docs);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

inline int cmd_eval(const GlobalOptions& g, const std::vector<std::string>& run_dirs,
                    const std::string& test_file, const std::string& name) {
  if (test_file.empty()) throw Error(ErrorKind::kInvalidArgument, "--test is required");
  json runs = json::array();
  TableRow row;
  std::vector<LoadedRun> loaded;
  for (const auto& d : run_dirs) loaded.push_back(load_run(d));
  for (const auto& run : loaded) verify_run_inputs(run);
  for (const auto& run : loaded) {
    const Selection sel = select_for_mode(run.config, run.dev_reports);
    if (sel.fallback) {
      std::cerr << "warning: " << run.dir.string()
                << ": no defined dev FPR, fell back to max dev F1\n";
    }
    Checkpoint ckpt = load_checkpoint(run.dir / kCheckpointDir / checkpoint_name(sel.checkpoint));
    const auto docs = load_eval_docs(run, test_file, ckpt.vocab, true);
    MetricsReport report = evaluate(ckpt.players, docs, run.config.seed, sel.checkpoint);
    report.selection_fallback = sel.fallback;
    std::cout << run.dir.string() << ": checkpoint " << sel.checkpoint << "  test F1 "
              << format_cell({report.f1, std::nullopt}) << "\n";
    runs.push_back({{"run", run.dir.string()}, {"report", report}});
    row.runs.push_back(std::move(report));
  }
  row.name = name.empty() ? run_mode_name(loaded.front().config.mode) : name;
  std::cout << "\n" << render_table({row});
  if (!g.out.empty()) {
    write_json(g.out, {{"name", row.name}, {"test_file", test_file}, {"runs", runs}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// rationales
// ---------------------------------------------------------------------------

inline int cmd_rationales(const std::string& run_dir, const std::string& input_file,
                          std::size_t limit, const std::string& format,
                          std::optional<int> checkpoint) {
  if (format != "text" && format != "json") {
    throw Error(ErrorKind::kInvalidArgument, "format must be text or json");
  }
  const LoadedRun run = load_run(run_dir);
  if (run.config.mode != RunMode::kInvrat) {
    throw Error(ErrorKind::kNoGenerator, "run " + run_dir + " has no rationale generator");
  }
  const int id = checkpoint ? *checkpoint : select_for_mode(run.config, run.dev_reports).checkpoint;
  Checkpoint ckpt = load_checkpoint(run.dir / kCheckpointDir / checkpoint_name(id));
  const auto docs = load_eval_docs(run, input_file, ckpt.vocab, false);
  const auto records = rationale_dump(ckpt.players, docs, limit);
  if (format == "json") {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(r.to_json());
    std::cout << arr.dump(2) << "\n";
  } else {
    for (const auto& r : records) std::cout << r.text_line() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

// One table row per eval JSON written by `invrat eval --out`.
inline int cmd_report(const GlobalOptions& g, const std::vector<std::string>& eval_files) {
  std::vector<TableRow> rows;
  for (const auto& f : eval_files) {
    const json j = read_json(f);
    TableRow row;
    try {
      row.name = j.at("name").get<std::string>();
      for (const auto& r : j.at("runs")) row.runs.push_back(r.at("report").get<MetricsReport>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, f + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  const std::string table = render_table(rows);
  std::cout << table;
  if (!g.out.empty()) write_file(g.out, table);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::kIntegrity ? kExitIntegrity : kExitUsage;
}

inline int run(int argc, char** argv) {
  CLI::App app{"Invariant rationalization for toxic-language debiasing"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed override");
  app.add_option("--config", g.config, "Training config JSON");
  app.add_option("--out", g.out, "Output directory or file");
  app.add_flag("--force", g.force, "Replace existing outputs");
  app.add_flag("--paper-hparams", g.paper_hparams, "Start from the published hyperparameters");

  std::string spec_file;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--spec", spec_file, "SynthSpec JSON (defaults if omitted)");

  std::string corpus_dir, lexicon_dir, kind = "lexical";
  auto* tag = app.add_subcommand("tag", "Tag attributes and environments");
  tag->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  tag->add_option("--lexicons", lexicon_dir, "Lexicon directory")->required();
  tag->add_option("--kind", kind, "lexical or dialectal");

  std::string mode, seeds;
  bool print_config = false;
  auto* train_cmd = app.add_subcommand("train", "Train one run per seed");
  train_cmd->add_option("--corpus", corpus_dir, "Tagged corpus directory");
  train_cmd->add_option("--mode", mode, "vanilla, invrat or lexical-removal");
  train_cmd->add_option("--seeds", seeds, "Comma-separated seeds");
  train_cmd->add_option("--lexicons", lexicon_dir, "Lexicons for lexical-removal");
  train_cmd->add_flag("--print-config", print_config, "Print the resolved config and exit");

  std::vector<std::string> run_dirs;
  std::string test_file, name;
  auto* eval_cmd = app.add_subcommand("eval", "Select checkpoints and evaluate on test");
  eval_cmd->add_option("--runs", run_dirs, "Run directories")->required();
  eval_cmd->add_option("--test", test_file, "Tagged test TSV")->required();
  eval_cmd->add_option("--name", name, "Row name in the table");

  std::string run_dir, input_file, format = "text";
  std::size_t limit = 10;
  int checkpoint = 0;
  auto* rat = app.add_subcommand("rationales", "Dump rationales of a trained run");
  rat->add_option("--run", run_dir, "Run directory")->required();
  rat->add_option("--input", input_file, "TSV to annotate")->required();
  rat->add_option("--limit", limit, "Maximum number of records");
  rat->add_option("--format", format, "text or json");
  auto* ckpt_opt = rat->add_option("--checkpoint", checkpoint, "Epoch (default: selected)");

  std::vector<std::string> eval_files;
  auto* report = app.add_subcommand("report", "Render a table from eval JSON files");
  report->add_option("evals", eval_files, "Eval JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*synth) return cmd_synth(g, spec_file);
    if (*tag) return cmd_tag(g, corpus_dir, lexicon_dir, kind);
    if (*train_cmd) return cmd_train(g, corpus_dir, mode, seeds, lexicon_dir, print_config);
    if (*eval_cmd) return cmd_eval(g, run_dirs, test_file, name);
    if (*rat) {
      std::optional<int> ck;
      if (ckpt_opt->count() > 0) ck = checkpoint;
      return cmd_rationales(run_dir, input_file, limit, format, ck);
    }
    if (*report) return cmd_report(g, eval_files);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace invrat::cli

#endif  // INVRAT_CLI_HPP_
