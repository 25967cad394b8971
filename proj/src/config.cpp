#include "lens/config.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lens {
namespace {

using nlohmann::json;

constexpr std::array kPresets{
    Preset{"bow", LensKind::kMeanPool, TrainModule::kRanker, 0},
    Preset{"sCL-simple-classifier", LensKind::kSimple, TrainModule::kClassifier, 1024},
    Preset{"CL-gatedconv-classifier", LensKind::kGatedConv, TrainModule::kClassifier, 1024},
    Preset{"CL-gatedconv-ranker", LensKind::kGatedConv, TrainModule::kRanker, 1024},
    Preset{"sCL-simple-ranker", LensKind::kSimple, TrainModule::kRanker, 1024},
    Preset{"CL-gatedconv-ranker-4096", LensKind::kGatedConv, TrainModule::kRanker, 4096},
    Preset{"sCL-simple-ranker-4096", LensKind::kSimple, TrainModule::kRanker, 4096},
};

json parse_json(std::string_view text, const std::string& name) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(ParseErrorKind::kFormat, name, -1, e.what());
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Copies json[key] into `out` with a type check naming the key.
template <class T>
void take(const json& j, const char* key, T& out, const std::string& name) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kFormat, name, -1, std::string("key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::span<const char* const> known, const std::string& name) {
  if (!j.is_object()) throw ParseError(ParseErrorKind::kFormat, name, -1, "top level must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError(ParseErrorKind::kFormat, name, -1, "unknown key '" + key + "'");
  }
}

constexpr std::array kTrainKeys{"preset",   "module",  "encoder",   "activation", "output_dim",
                                "batch_size", "warmup", "dropout",   "gate_size",  "hidden",
                                "margin",   "depth",   "width",     "max_steps",  "eval_every",
                                "patience", "single_pass", "seed"};

constexpr std::array kSynthKeys{"languages",  "sentences",   "latent_dim", "dim",   "min_tokens",
                                "max_tokens", "shared_gain", "lang_gain",  "noise", "seed"};

}  // namespace

std::span<const Preset> presets() noexcept { return kPresets; }

TrainConfig preset_config(const std::string& name) {
  for (const Preset& p : kPresets) {
    if (name == p.name) {
      TrainConfig cfg;
      cfg.lens = p.lens;
      cfg.module = p.module;
      if (p.output_dim != 0) cfg.output_dim = p.output_dim;
      return cfg;
    }
  }
  std::string known;
  for (const Preset& p : kPresets) known += std::string(known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

TrainConfig parse_train_config(std::string_view text, const std::string& name) {
  const json j = parse_json(text, name);
  reject_unknown(j, kTrainKeys, name);
  TrainConfig cfg;
  std::string s;
  if (j.contains("preset")) {
    take(j, "preset", s, name);
    cfg = preset_config(s);
  }
  if (j.contains("module")) {
    take(j, "module", s, name);
    cfg.module = parse_train_module(s);
  }
  if (j.contains("encoder")) {
    take(j, "encoder", s, name);
    cfg.lens = parse_lens_kind(s);
  }
  if (j.contains("activation")) {
    take(j, "activation", s, name);
    cfg.activation = parse_activation(s);
  }
  take(j, "output_dim", cfg.output_dim, name);
  take(j, "batch_size", cfg.batch_size, name);
  take(j, "warmup", cfg.warmup, name);
  take(j, "dropout", cfg.dropout, name);
  take(j, "gate_size", cfg.gate_size, name);
  take(j, "hidden", cfg.hidden, name);
  take(j, "margin", cfg.margin, name);
  take(j, "depth", cfg.depth, name);
  take(j, "width", cfg.width, name);
  take(j, "max_steps", cfg.max_steps, name);
  take(j, "eval_every", cfg.eval_every, name);
  take(j, "patience", cfg.patience, name);
  take(j, "single_pass", cfg.single_pass, name);
  take(j, "seed", cfg.seed, name);
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(slurp(path), path.string());
}

std::string train_config_json(const TrainConfig& cfg) {
  json j{{"module", to_string(cfg.module)},
         {"encoder", to_string(cfg.lens)},
         {"activation", to_string(cfg.activation)},
         {"output_dim", cfg.output_dim},
         {"batch_size", cfg.batch_size},
         {"warmup", cfg.warmup},
         {"dropout", cfg.dropout},
         {"gate_size", cfg.gate_size},
         {"hidden", cfg.hidden},
         {"margin", cfg.margin},
         {"depth", cfg.depth},
         {"width", cfg.width},
         {"max_steps", cfg.max_steps},
         {"eval_every", cfg.eval_every},
         {"patience", cfg.patience},
         {"single_pass", cfg.single_pass},
         {"seed", cfg.seed}};
  return j.dump(2);
}

SynthConfig parse_synth_config(std::string_view text, const std::string& name) {
  const json j = parse_json(text, name);
  reject_unknown(j, kSynthKeys, name);
  SynthConfig cfg;
  take(j, "languages", cfg.languages, name);
  take(j, "sentences", cfg.sentences, name);
  take(j, "latent_dim", cfg.latent_dim, name);
  take(j, "dim", cfg.dim, name);
  take(j, "min_tokens", cfg.min_tokens, name);
  take(j, "max_tokens", cfg.max_tokens, name);
  take(j, "shared_gain", cfg.shared_gain, name);
  take(j, "lang_gain", cfg.lang_gain, name);
  take(j, "noise", cfg.noise, name);
  take(j, "seed", cfg.seed, name);
  cfg.validate();
  return cfg;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  return parse_synth_config(slurp(path), path.string());
}

std::string synth_config_json(const SynthConfig& cfg) {
  json j{{"languages", cfg.languages},   {"sentences", cfg.sentences},   {"latent_dim", cfg.latent_dim},
         {"dim", cfg.dim},               {"min_tokens", cfg.min_tokens}, {"max_tokens", cfg.max_tokens},
         {"shared_gain", cfg.shared_gain}, {"lang_gain", cfg.lang_gain}, {"noise", cfg.noise},
         {"seed", cfg.seed}};
  return j.dump(2);
}

}  // namespace lens
