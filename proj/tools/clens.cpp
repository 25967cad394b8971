// clens: command-line front end for lens training, encoding, matching,
// mining and analysis. Every successful run writes a JSON manifest next to
// its output; `clens replay <manifest>` re-executes the recorded argv.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lens/analysis.hpp"
#include "lens/checkpoint.hpp"
#include "lens/config.hpp"
#include "lens/corpus.hpp"
#include "lens/encoders.hpp"
#include "lens/retrieval.hpp"
#include "lens/simd/kernels.hpp"
#include "lens/synth.hpp"
#include "lens/training.hpp"
#include "lens/vectors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunLog {
  json config = nullptr;
  std::vector<std::string> inputs, outputs;
  std::uint64_t seed = 0;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text, RunLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lens::IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw lens::IoError("write failed for " + path.string());
  log.outputs.push_back(path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lens::IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw lens::ParseError(lens::ParseErrorKind::kFormat, path.string(), -1, e.what());
  }
}

// Vectors from a CLVE file, or encoded on the fly from a CLEM corpus.
struct VectorSource {
  std::string checkpoint;
  bool meanpool = false;
  std::size_t threads = 1;

  lens::LensParameters lens() const {
    if (!checkpoint.empty() && meanpool) throw lens::ConfigError("--checkpoint and --meanpool are exclusive");
    if (meanpool) return lens::LensParameters{lens::MeanPool{}};
    if (checkpoint.empty()) throw lens::ConfigError("encoding a .clem corpus needs --checkpoint or --meanpool");
    return lens::read_lens(checkpoint);
  }

  lens::VectorSet load(const std::string& path, RunLog& log) const {
    log.inputs.push_back(path);
    if (fs::path(path).extension() == ".clem") {
      if (!checkpoint.empty()) log.inputs.push_back(checkpoint);
      return lens::batch_encode(lens::read_corpus(path), lens(), threads);
    }
    return lens::read_vectors(path);
  }
};

void add_source_options(CLI::App* cmd, VectorSource& src) {
  cmd->add_option("--checkpoint", src.checkpoint, "Lens checkpoint (.cllp) for .clem inputs");
  cmd->add_flag("--meanpool", src.meanpool, "Mean-pool .clem inputs");
  cmd->add_option("--threads", src.threads, "Worker threads")->check(CLI::PositiveNumber);
}

std::vector<lens::IdPair> read_gold(const std::string& path, RunLog& log) {
  log.inputs.push_back(path);
  const lens::RelatednessList list = lens::read_pairs(path, lens::PairMode::kRank);
  std::vector<lens::IdPair> gold;
  for (const auto& e : list.entries) gold.emplace_back(e.a, e.b);
  if (gold.empty()) throw lens::ConfigError("gold file " + path + " is empty");
  return gold;
}

// LABEL=path arguments.
std::vector<std::pair<std::string, std::string>> labeled_paths(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
      throw lens::ConfigError("expected LABEL=path, got '" + a + "'");
    }
    out.emplace_back(a.substr(0, eq), a.substr(eq + 1));
  }
  return out;
}

lens::EmbeddingCorpus load_corpora(const std::vector<std::string>& paths, RunLog& log) {
  std::vector<lens::EmbeddingCorpus> parts;
  for (const auto& p : paths) {
    log.inputs.push_back(p);
    parts.push_back(lens::read_corpus(p));
  }
  return lens::EmbeddingCorpus::merge(parts);
}

std::string metrics_tsv(const lens::TrainResult& r) {
  std::string out = "step\tlr\tloss\tval_metric\n";
  for (const auto& h : r.history) {
    out += std::to_string(h.step) + '\t' + fmt(h.lr) + '\t' + fmt(h.loss) + '\t' + fmt(h.val_metric) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenSynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t planted = 500, distractors = 500;
};

void cmd_gen_synth(const GenSynthArgs& a, RunLog& log) {
  lens::SynthConfig cfg;
  if (!a.config.empty()) {
    log.inputs.push_back(a.config);
    cfg = lens::load_synth_config(a.config);
  }
  if (a.seed_set) cfg.seed = a.seed;
  cfg.validate();
  log.seed = cfg.seed;
  log.config = json::parse(lens::synth_config_json(cfg));
  const fs::path dir(a.out);
  fs::create_directories(dir);

  auto write_split = [&](const lens::SynthSplit& s, const std::string& name) {
    lens::write_corpus(s.merged(), dir / (name + ".clem"));
    log.outputs.push_back((dir / (name + ".clem")).string());
    for (std::size_t l = 0; l < s.corpora.size(); ++l) {
      const auto p = dir / (name + "." + lens::synth_lang_tag(l) + ".clem");
      lens::write_corpus(s.corpora[l], p);
      log.outputs.push_back(p.string());
      for (std::size_t m = l + 1; m < s.corpora.size(); ++m) {
        const auto g = dir / (name + ".gold." + lens::synth_lang_tag(l) + "-" + lens::synth_lang_tag(m) + ".tsv");
        lens::write_pairs(s.gold(l, m), g);
        log.outputs.push_back(g.string());
      }
    }
    if (s.corpora.size() >= 2 && s.shared > 0) {
      for (const char* kind : {"rank", "classify"}) {
        const auto p = dir / (name + "." + kind + ".tsv");
        lens::write_pairs(std::string(kind) == "rank" ? s.all_pairs() : s.classify_pairs(cfg.seed), p);
        log.outputs.push_back(p.string());
      }
    }
  };
  write_split(lens::gen_synthetic(cfg, lens::SynthSplitKind::kTrain), "train");
  write_split(lens::gen_synthetic(cfg, lens::SynthSplitKind::kValid), "valid");
  write_split(lens::gen_synthetic(cfg, lens::SynthSplitKind::kTest), "test");
  if (a.planted + a.distractors > 0) write_split(lens::gen_mining(cfg, a.planted, a.distractors), "mining");
  write_text(dir / "synth.json", lens::synth_config_json(cfg) + "\n", log);
}

struct TrainArgs {
  std::vector<std::string> corpus, valid_corpus;
  std::string pairs, valid_pairs, config, preset, out;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;
  std::size_t trials = 8, budget = 0;
};

struct TrainInputs {
  lens::TrainConfig cfg;
  lens::EmbeddingCorpus corpus, valid;
  lens::RelatednessList pairs, valid_pairs;
};

TrainInputs load_train_inputs(const TrainArgs& a, RunLog& log) {
  TrainInputs in;
  if (!a.config.empty()) {
    log.inputs.push_back(a.config);
    in.cfg = lens::load_train_config(a.config);
  } else if (!a.preset.empty()) {
    in.cfg = lens::preset_config(a.preset);
  }
  if (a.seed != 0) in.cfg.seed = a.seed;
  if (a.max_steps != 0) in.cfg.max_steps = a.max_steps;
  in.cfg.validate();
  log.seed = in.cfg.seed;
  const auto mode = in.cfg.module == lens::TrainModule::kRanker ? lens::PairMode::kRank : lens::PairMode::kClassify;
  in.corpus = load_corpora(a.corpus, log);
  in.valid = load_corpora(a.valid_corpus, log);
  log.inputs.push_back(a.pairs);
  in.pairs = lens::read_pairs(a.pairs, mode);
  log.inputs.push_back(a.valid_pairs);
  in.valid_pairs = lens::read_pairs(a.valid_pairs, mode);
  return in;
}

void write_train_outputs(const fs::path& dir, const lens::TrainConfig& cfg, const lens::TrainResult& r,
                         RunLog& log) {
  fs::create_directories(dir);
  lens::write_lens(r.lens, dir / "lens.cllp");
  log.outputs.push_back((dir / "lens.cllp").string());
  write_text(dir / "config.json", lens::train_config_json(cfg) + "\n", log);
  write_text(dir / "metrics.tsv", metrics_tsv(r), log);
}

void cmd_train(const TrainArgs& a, RunLog& log) {
  TrainInputs in = load_train_inputs(a, log);
  log.config = json::parse(lens::train_config_json(in.cfg));
  const lens::TrainResult r = lens::train(in.corpus, in.pairs, in.cfg, lens::Validation{&in.valid, in.valid_pairs});
  write_train_outputs(a.out, in.cfg, r, log);
  std::cout << json{{"best_step", r.best_step}, {"best_val_metric", r.best_metric}, {"steps", r.steps}}.dump()
            << "\n";
}

void cmd_search(const TrainArgs& a, RunLog& log) {
  TrainInputs in = load_train_inputs(a, log);
  log.config = json::parse(lens::train_config_json(in.cfg));
  const lens::SearchResult s =
      lens::random_search(in.corpus, in.pairs, lens::Validation{&in.valid, in.valid_pairs}, in.cfg, {}, a.trials,
                          a.budget, in.cfg.seed);
  write_train_outputs(a.out, s.best, s.best_result, log);
  std::string board = "rank\ttrial\tval_metric\tbest_step\tbatch_size\twarmup\tdropout\tgate_size\thidden\tmargin\n";
  for (std::size_t i = 0; i < s.leaderboard.size(); ++i) {
    const auto& t = s.leaderboard[i];
    board += std::to_string(i + 1) + '\t' + std::to_string(t.trial) + '\t' + fmt(t.val_metric) + '\t' +
             std::to_string(t.best_step) + '\t' + std::to_string(t.config.batch_size) + '\t' +
             std::to_string(t.config.warmup) + '\t' + fmt(t.config.dropout) + '\t' +
             std::to_string(t.config.gate_size) + '\t' + std::to_string(t.config.hidden) + '\t' +
             fmt(t.config.margin) + '\n';
  }
  write_text(fs::path(a.out) / "leaderboard.tsv", board, log);
  std::cout << json{{"best_val_metric", s.best_result.best_metric}, {"trials", s.leaderboard.size()}}.dump() << "\n";
}

struct EncodeArgs {
  std::string corpus, out;
  VectorSource src;
};

void cmd_encode(const EncodeArgs& a, RunLog& log) {
  log.inputs.push_back(a.corpus);
  if (!a.src.checkpoint.empty()) log.inputs.push_back(a.src.checkpoint);
  const lens::VectorSet v = lens::batch_encode(lens::read_corpus(a.corpus), a.src.lens(), a.src.threads);
  lens::write_vectors(v, a.out);
  log.outputs.push_back(a.out);
}

struct MatchArgs {
  std::string src, tgt, gold, out;
  VectorSource source;
  bool binary = false;
  float theta = 1.0f;
};

void cmd_match(const MatchArgs& a, RunLog& log) {
  const lens::VectorSet s = a.source.load(a.src, log);
  const lens::VectorSet t = a.source.load(a.tgt, log);
  const auto gold_pairs = read_gold(a.gold, log);
  const lens::SimilarityMatrix S = lens::cosine_matrix(s, t, a.source.threads);
  const auto gold = lens::gold_permutation(S, gold_pairs);
  json report{{"rows", S.rows}, {"cols", S.cols}, {"match_error", lens::match_error(S, gold)}};
  if (a.binary) {
    const lens::BinaryCodes bs = lens::binarize(s, a.theta), bt = lens::binarize(t, a.theta);
    const lens::SimilarityMatrix B = lens::binary_similarity(bs, bt);
    report["binary_match_error"] = lens::match_error(B, gold);
    report["theta"] = a.theta;
    report["active_fraction_src"] = bs.active_fraction;
    report["active_fraction_tgt"] = bt.active_fraction;
  }
  write_text(a.out, report.dump(2) + "\n", log);
  std::cout << report.dump() << "\n";
}

struct MineArgs {
  std::string src, tgt, gold, out, sweep;
  VectorSource source;
  std::size_t k = 4;
  double threshold = std::nan("");
  bool calibrate = false;
};

std::string sweep_tsv(const lens::Calibration& cal) {
  std::string out = "tau\tprecision\trecall\tf1\n";
  for (const auto& row : cal.sweep) {
    out += fmt(row.threshold) + '\t' + fmt(row.prf.precision) + '\t' + fmt(row.prf.recall) + '\t' +
           fmt(row.prf.f1) + '\n';
  }
  return out;
}

lens::SimilarityMatrix scored_matrix(const MineArgs& a, RunLog& log) {
  const lens::VectorSet s = a.source.load(a.src, log);
  const lens::VectorSet t = a.source.load(a.tgt, log);
  return lens::margin_score(lens::cosine_matrix(s, t, a.source.threads), lens::MarginConfig{a.k});
}

void cmd_mine(const MineArgs& a, RunLog& log) {
  const bool fixed = !std::isnan(a.threshold);
  if (fixed == a.calibrate) throw lens::ConfigError("mine needs exactly one of --threshold or --calibrate");
  if (a.calibrate && a.gold.empty()) throw lens::ConfigError("--calibrate needs --gold");
  const lens::SimilarityMatrix M = scored_matrix(a, log);
  float tau = static_cast<float>(a.threshold);
  json summary;
  if (a.calibrate) {
    const lens::Calibration cal = lens::calibrate_threshold(M, read_gold(a.gold, log));
    tau = cal.threshold;
    summary["f1"] = cal.best.f1;
    if (!a.sweep.empty()) write_text(a.sweep, sweep_tsv(cal), log);
  }
  const lens::MiningResult r = lens::mine_pairs(M, tau);
  std::string out = "score\tsrc_id\ttgt_id\n";
  for (const auto& c : r.candidates) out += fmt(c.score) + '\t' + std::to_string(c.src_id) + '\t' + std::to_string(c.tgt_id) + '\n';
  write_text(a.out, out, log);
  summary["threshold"] = tau;
  summary["candidates"] = r.candidates.size();
  summary["flagged"] = lens::count_flagged(M);
  if (!a.calibrate && !a.gold.empty()) summary["f1"] = lens::f1_score(r.candidates, read_gold(a.gold, log)).f1;
  std::cout << summary.dump() << "\n";
}

void cmd_calibrate(const MineArgs& a, RunLog& log) {
  const lens::SimilarityMatrix M = scored_matrix(a, log);
  const lens::Calibration cal = lens::calibrate_threshold(M, read_gold(a.gold, log));
  write_text(a.out, sweep_tsv(cal), log);
  std::cout << json{{"threshold", cal.threshold},
                    {"precision", cal.best.precision},
                    {"recall", cal.best.recall},
                    {"f1", cal.best.f1}}
                   .dump()
            << "\n";
}

struct LabeledArgs {
  std::vector<std::string> inputs;
  std::string out;
  VectorSource source;
  lens::ProbeOptions probe;
  float theta = 1.0f;
};

std::pair<lens::VectorSet, std::vector<std::string>> load_labeled(const LabeledArgs& a, RunLog& log) {
  std::vector<std::string> labels;
  std::optional<lens::VectorSet> all;
  for (const auto& [label, path] : labeled_paths(a.inputs)) {
    lens::VectorSet v = a.source.load(path, log);
    if (!all) all.emplace(v.dim());
    if (v.dim() != all->dim()) throw lens::DimensionError("input " + path + " has a different dimension");
    for (std::size_t i = 0; i < v.size(); ++i) {
      all->push_back(v.ids()[i], v.row(i));
      labels.push_back(label);
    }
  }
  if (!all) throw lens::ConfigError("no inputs given");
  return {std::move(*all), std::move(labels)};
}

void cmd_probe(const LabeledArgs& a, RunLog& log) {
  log.seed = a.probe.seed;
  const auto [vectors, labels] = load_labeled(a, log);
  const lens::ProbeReport rep = lens::probe_train(vectors, labels, a.probe);
  json report{{"classes", rep.model.classes},
              {"train_size", rep.split.train.size()},
              {"test_size", rep.split.test.size()},
              {"train_accuracy", rep.train_accuracy},
              {"test_accuracy", rep.test_accuracy},
              {"train_fraction", a.probe.train_fraction},
              {"iterations", a.probe.iterations}};
  write_text(a.out, report.dump(2) + "\n", log);
  std::cout << report.dump() << "\n";
}

void cmd_langvec(const LabeledArgs& a, RunLog& log) {
  std::vector<lens::LanguageVector> lvs;
  for (const auto& [label, path] : labeled_paths(a.inputs)) lvs.push_back(lens::language_vector(a.source.load(path, log), label));
  lens::export_projection(lens::labeled_rows(lvs), a.out);
  log.outputs.push_back(a.out);
}

void cmd_export_vectors(const LabeledArgs& a, RunLog& log) {
  const auto [vectors, labels] = load_labeled(a, log);
  lens::export_projection(lens::labeled_rows(vectors, labels), a.out);
  log.outputs.push_back(a.out);
}

struct BinarizeArgs {
  std::string vectors, out;
  VectorSource source;
  float theta = 1.0f;
};

void cmd_binarize(const BinarizeArgs& a, RunLog& log) {
  const lens::VectorSet v = a.source.load(a.vectors, log);
  const lens::BinaryCodes codes = lens::binarize(v, a.theta);
  std::vector<float> bits(v.size() * v.dim());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t d = 0; d < v.dim(); ++d) bits[i * v.dim() + d] = codes.bit(i, d) ? 1.0f : 0.0f;
  lens::write_vectors(lens::VectorSet(v.dim(), v.ids(), std::move(bits)), a.out);
  log.outputs.push_back(a.out);
  std::cout << json{{"theta", a.theta}, {"active_fraction", codes.active_fraction}}.dump() << "\n";
}

fs::path manifest_path(const std::string& explicit_path, const std::string& out) {
  if (!explicit_path.empty()) return explicit_path;
  if (fs::is_directory(out)) return fs::path(out) / "manifest.json";
  return fs::path(out + ".manifest.json");
}

int run(const std::vector<std::string>& argv);

int dispatch(const std::vector<std::string>& argv) {
  CLI::App app{"Lens training, sentence-vector matching, mining and analysis", "clens"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string manifest_override;
  app.add_option("--manifest", manifest_override, "Where to write the run manifest");

  GenSynthArgs gen;
  auto* c_gen = app.add_subcommand("gen-synth", "Generate synthetic multilingual corpora and gold lists");
  c_gen->add_option("--config", gen.config, "Synthetic-corpus JSON config")->check(CLI::ExistingFile);
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--seed", gen.seed, "Override the config seed")->each([&](const std::string&) { gen.seed_set = true; });
  c_gen->add_option("--mining-planted", gen.planted, "Planted translations per mining language");
  c_gen->add_option("--mining-distractors", gen.distractors, "Unpaired distractors per mining language");

  TrainArgs tr;
  auto add_train = [&](CLI::App* c) {
    c->add_option("--corpus", tr.corpus, "Training corpora (.clem)")->required();
    c->add_option("--pairs", tr.pairs, "Training relatedness list (.tsv)")->required();
    c->add_option("--valid-corpus", tr.valid_corpus, "Validation corpora (.clem)")->required();
    c->add_option("--valid-pairs", tr.valid_pairs, "Validation relatedness list (.tsv)")->required();
    c->add_option("--config", tr.config, "Training JSON config")->check(CLI::ExistingFile);
    c->add_option("--preset", tr.preset, "Named preset when no config is given");
    c->add_option("--seed", tr.seed, "Override the config seed");
    c->add_option("--max-steps", tr.max_steps, "Override the config step limit");
    c->add_option("--out", tr.out, "Output directory")->required();
  };
  auto* c_train = app.add_subcommand("train", "Train a lens");
  add_train(c_train);
  auto* c_search = app.add_subcommand("search", "Random hyperparameter search");
  add_train(c_search);
  c_search->add_option("--trials", tr.trials, "Number of sampled configurations")->check(CLI::PositiveNumber);
  c_search->add_option("--budget", tr.budget, "Step limit per trial (0 keeps the config)");

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "Encode a corpus into sentence vectors (.clve)");
  c_enc->add_option("--corpus", enc.corpus, "Input corpus (.clem)")->required();
  c_enc->add_option("--out", enc.out, "Output vectors (.clve)")->required();
  add_source_options(c_enc, enc.src);

  MatchArgs match;
  auto* c_match = app.add_subcommand("match", "Cosine nearest-neighbour match error");
  c_match->add_option("--src", match.src, "Source vectors (.clve or .clem)")->required();
  c_match->add_option("--tgt", match.tgt, "Target vectors (.clve or .clem)")->required();
  c_match->add_option("--gold", match.gold, "Gold pairs (.tsv)")->required();
  c_match->add_option("--out", match.out, "Report (.json)")->required();
  c_match->add_flag("--binary", match.binary, "Also match binarised codes");
  c_match->add_option("--theta", match.theta, "Binarisation threshold");
  add_source_options(c_match, match.source);

  MineArgs mine;
  auto add_mine = [&](CLI::App* c) {
    c->add_option("--src", mine.src, "Source vectors (.clve or .clem)")->required();
    c->add_option("--tgt", mine.tgt, "Target vectors (.clve or .clem)")->required();
    c->add_option("--k", mine.k, "Margin neighbourhood size")->check(CLI::PositiveNumber);
    add_source_options(c, mine.source);
  };
  auto* c_mine = app.add_subcommand("mine", "Margin-based bitext mining");
  add_mine(c_mine);
  c_mine->add_option("--threshold", mine.threshold, "Score threshold");
  c_mine->add_flag("--calibrate", mine.calibrate, "Pick the F1-optimal threshold against --gold");
  c_mine->add_option("--gold", mine.gold, "Gold pairs (.tsv)");
  c_mine->add_option("--sweep", mine.sweep, "Write the calibration sweep (.tsv)");
  c_mine->add_option("--out", mine.out, "Candidates (.tsv)")->required();
  auto* c_cal = app.add_subcommand("calibrate", "Threshold sweep against gold pairs");
  add_mine(c_cal);
  c_cal->add_option("--gold", mine.gold, "Gold pairs (.tsv)")->required();
  c_cal->add_option("--out", mine.out, "Sweep table (.tsv)")->required();

  LabeledArgs lab;
  auto add_labeled = [&](CLI::App* c, const char* out_help) {
    c->add_option("inputs", lab.inputs, "LABEL=path vector or corpus files")->required();
    c->add_option("--out", lab.out, out_help)->required();
    add_source_options(c, lab.source);
  };
  auto* c_probe = app.add_subcommand("probe", "Logistic-regression label probe");
  add_labeled(c_probe, "Report (.json)");
  c_probe->add_option("--fraction", lab.probe.train_fraction, "Training fraction per class");
  c_probe->add_option("--seed", lab.probe.seed, "Split seed");
  c_probe->add_option("--iterations", lab.probe.iterations, "Gradient-descent iterations");
  auto* c_langvec = app.add_subcommand("langvec", "Per-language variance vectors (.tsv)");
  add_labeled(c_langvec, "Output table (.tsv)");
  auto* c_export = app.add_subcommand("export-vectors", "Labelled vectors as TSV for projection tools");
  add_labeled(c_export, "Output table (.tsv)");

  BinarizeArgs bin;
  auto* c_bin = app.add_subcommand("binarize", "Threshold vectors into 0/1 codes (.clve)");
  c_bin->add_option("--vectors", bin.vectors, "Input vectors (.clve or .clem)")->required();
  c_bin->add_option("--theta", bin.theta, "Threshold");
  c_bin->add_option("--out", bin.out, "Output codes (.clve)")->required();
  add_source_options(c_bin, bin.source);

  std::string replay_path;
  auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", replay_path, "Manifest (.json)")->required()->check(CLI::ExistingFile);

  std::vector<const char*> cargv;
  for (const auto& s : argv) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (c_replay->parsed()) {
    const json m = read_json(replay_path);
    if (!m.contains("argv") || !m["argv"].is_array()) {
      throw lens::ParseError(lens::ParseErrorKind::kFormat, replay_path, -1, "manifest has no argv array");
    }
    return run(m["argv"].get<std::vector<std::string>>());
  }

  const auto start = std::chrono::steady_clock::now();
  RunLog log;
  std::string sub, out;
  if (c_gen->parsed()) {
    sub = "gen-synth", out = gen.out;
    cmd_gen_synth(gen, log);
  } else if (c_train->parsed()) {
    sub = "train", out = tr.out;
    cmd_train(tr, log);
  } else if (c_search->parsed()) {
    sub = "search", out = tr.out;
    cmd_search(tr, log);
  } else if (c_enc->parsed()) {
    sub = "encode", out = enc.out;
    cmd_encode(enc, log);
  } else if (c_match->parsed()) {
    sub = "match", out = match.out;
    cmd_match(match, log);
  } else if (c_mine->parsed()) {
    sub = "mine", out = mine.out;
    cmd_mine(mine, log);
  } else if (c_cal->parsed()) {
    sub = "calibrate", out = mine.out;
    cmd_calibrate(mine, log);
  } else if (c_probe->parsed()) {
    sub = "probe", out = lab.out;
    cmd_probe(lab, log);
  } else if (c_langvec->parsed()) {
    sub = "langvec", out = lab.out;
    cmd_langvec(lab, log);
  } else if (c_export->parsed()) {
    sub = "export-vectors", out = lab.out;
    cmd_export_vectors(lab, log);
  } else if (c_bin->parsed()) {
    sub = "binarize", out = bin.out;
    cmd_binarize(bin, log);
  }

  json manifest{{"tool", "clens"},
                {"version", kVersion},
                {"subcommand", sub},
                {"argv", argv},
                {"config", log.config},
                {"inputs", log.inputs},
                {"outputs", log.outputs},
                {"seed", log.seed},
                {"simd_backend", std::string(lens::simd::name(lens::simd::active_backend()))},
                {"wall_clock_seconds",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  const fs::path mpath = manifest_path(manifest_override, out);
  std::ofstream mf(mpath, std::ios::binary);
  if (!mf) throw lens::IoError("cannot write manifest " + mpath.string());
  mf << manifest.dump(2) << "\n";
  return 0;
}

int run(const std::vector<std::string>& argv) {
  try {
    return dispatch(argv);
  } catch (const lens::ParseError& e) {
    std::cerr << json{{"error", e.kind()},
                      {"parse_kind", lens::to_string(e.parse_kind())},
                      {"file", e.file()},
                      {"record", e.record()},
                      {"message", e.what()}}
                     .dump()
              << "\n";
  } catch (const lens::Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}
