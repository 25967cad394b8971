#include "lens/synth.hpp"

#include <cmath>
#include <random>

namespace lens {
namespace {

struct World {
  Tensor<double> projection;             // d_z x d_z block of P
  std::vector<std::vector<double>> offsets;  // per language, K - d_z
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x6c656e73u};
  return std::mt19937_64(seq);
}

World make_world(const SynthConfig& cfg) {
  auto rng = make_rng(cfg.seed, 0xffffffffu);
  std::normal_distribution<double> normal(0.0, 1.0);
  World w;
  const std::size_t dz = cfg.latent_dim;
  w.projection = Tensor<double>({dz, dz});
  const double scale = 1.0 / std::sqrt(static_cast<double>(dz));
  for (double& v : w.projection.data()) v = normal(rng) * scale;

  const std::size_t nuisance = cfg.dim - dz;
  w.offsets.assign(cfg.languages, std::vector<double>(nuisance));
  for (auto& q : w.offsets)
    for (double& v : q) v = normal(rng);
  // Centre the offsets across languages so that distinct languages point
  // away from each other, then rescale each to unit length.
  if (cfg.languages >= 2) {
    for (std::size_t k = 0; k < nuisance; ++k) {
      double mean = 0.0;
      for (const auto& q : w.offsets) mean += q[k];
      mean /= static_cast<double>(cfg.languages);
      for (auto& q : w.offsets) q[k] -= mean;
    }
  }
  for (auto& q : w.offsets) {
    double norm = 0.0;
    for (double v : q) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& v : q) v /= norm;
  }
  return w;
}

SynthSplit generate(const SynthConfig& cfg, std::size_t shared, std::size_t private_per_lang,
                    SynthSplitKind kind) {
  cfg.validate();
  const World world = make_world(cfg);
  const auto split = static_cast<std::uint32_t>(kind);
  auto rng = make_rng(cfg.seed, split + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> length(cfg.min_tokens, cfg.max_tokens);

  const std::size_t dz = cfg.latent_dim, K = cfg.dim, L = cfg.languages;
  auto draw_latent = [&] {
    std::vector<double> z(dz);
    for (double& v : z) v = normal(rng);
    std::vector<double> pz(dz, 0.0);
    for (std::size_t r = 0; r < dz; ++r)
      for (std::size_t c = 0; c < dz; ++c) pz[r] += world.projection(r, c) * z[c];
    return pz;
  };
  std::vector<std::vector<double>> shared_latents(shared);
  for (auto& z : shared_latents) z = draw_latent();
  std::vector<std::vector<std::vector<double>>> private_latents(L);
  for (auto& per_lang : private_latents) {
    per_lang.resize(private_per_lang);
    for (auto& z : per_lang) z = draw_latent();
  }

  SynthSplit out;
  out.split = split;
  out.shared = shared;
  for (std::size_t l = 0; l < L; ++l) {
    EmbeddingCorpus corpus(K);
    const std::string tag = synth_lang_tag(l);
    for (std::size_t i = 0; i < shared + private_per_lang; ++i) {
      const auto& pz = i < shared ? shared_latents[i] : private_latents[l][i - shared];
      const std::size_t T = length(rng);
      Tensor<float> e({K, T});
      for (std::size_t k = 0; k < K; ++k) {
        const double base = k < dz ? cfg.shared_gain * pz[k] : cfg.lang_gain * world.offsets[l][k - dz];
        for (std::size_t t = 0; t < T; ++t) {
          const double noise = cfg.noise > 0.0 ? cfg.noise * normal(rng) : 0.0;
          e(k, t) = static_cast<float>(base + noise);
        }
      }
      corpus.add(EmbeddingRecord{synth_id(split, l, i), tag, std::move(e)});
    }
    out.corpora.push_back(std::move(corpus));
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synthetic config: " + m); };
  if (languages < 1 || languages >= (1u << 16)) fail("languages must be in [1, 65535]");
  if (sentences < 1 || sentences >= (1u << 24)) fail("sentences must be in [1, 2^24)");
  if (latent_dim < 1 || latent_dim >= dim) fail("need 1 <= latent_dim < dim");
  if (min_tokens < 1 || min_tokens > max_tokens) fail("need 1 <= min_tokens <= max_tokens");
  if (!(shared_gain > 0.0)) fail("shared_gain must be > 0");
  if (!(lang_gain >= 0.0)) fail("lang_gain must be >= 0");
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  if (!std::isfinite(shared_gain) || !std::isfinite(lang_gain) || !std::isfinite(noise)) {
    fail("gains and noise must be finite");
  }
}

std::string synth_lang_tag(std::size_t lang) { return "l" + std::to_string(lang); }

RelatednessList SynthSplit::gold(std::size_t src_lang, std::size_t tgt_lang) const {
  RelatednessList list;
  list.mode = PairMode::kRank;
  for (std::size_t i = 0; i < shared; ++i) {
    list.entries.push_back({synth_id(split, src_lang, i), synth_id(split, tgt_lang, i), -1, 0});
  }
  return list;
}

RelatednessList SynthSplit::all_pairs() const {
  RelatednessList list;
  list.mode = PairMode::kRank;
  for (std::size_t a = 0; a < corpora.size(); ++a)
    for (std::size_t b = a + 1; b < corpora.size(); ++b) {
      auto g = gold(a, b);
      list.entries.insert(list.entries.end(), g.entries.begin(), g.entries.end());
    }
  return list;
}

RelatednessList SynthSplit::classify_pairs(std::uint64_t seed) const {
  RelatednessList list;
  list.mode = PairMode::kClassify;
  if (shared < 2) return list;
  auto rng = make_rng(seed, 0xc1a55u);
  std::uniform_int_distribution<std::size_t> offset(1, shared - 1);
  for (std::size_t a = 0; a < corpora.size(); ++a)
    for (std::size_t b = a + 1; b < corpora.size(); ++b)
      for (std::size_t i = 0; i < shared; ++i) {
        list.entries.push_back({synth_id(split, a, i), synth_id(split, b, i), 1, 0});
        const std::size_t j = (i + offset(rng)) % shared;
        list.entries.push_back({synth_id(split, a, i), synth_id(split, b, j), 0, 0});
      }
  return list;
}

EmbeddingCorpus SynthSplit::merged() const { return EmbeddingCorpus::merge(corpora); }

SynthSplit gen_synthetic(const SynthConfig& cfg, SynthSplitKind split) {
  return generate(cfg, cfg.sentences, 0, split);
}

SynthSplit gen_mining(const SynthConfig& cfg, std::size_t planted, std::size_t distractors,
                      SynthSplitKind split) {
  if (planted + distractors == 0) throw ConfigError("mining corpus needs at least one sentence");
  if (planted + distractors >= (1u << 24)) throw ConfigError("mining corpus too large");
  return generate(cfg, planted, distractors, split);
}

}  // namespace lens
