#pragma once

// Deterministic synthetic multilingual embedding corpora.
//
// Sentence i carries a latent z_i shared by all languages. Token t of the
// sentence in language l is
//     e = g_s * P z_i  (first d_z coordinates)
//       + g_l * q_l    (remaining K - d_z coordinates)
//       + N(0, sigma^2) per coordinate.
// P and q_l form the generator "world" and depend only on the seed; splits
// draw independent sentences from that world.

#include <cstdint>
#include <string>
#include <vector>

#include "lens/corpus.hpp"

namespace lens {

struct SynthConfig {
  std::size_t languages = 3;
  std::size_t sentences = 500;
  std::size_t latent_dim = 16;
  std::size_t dim = 64;
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 12;
  double shared_gain = 1.0;
  double lang_gain = 4.0;
  double noise = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class SynthSplitKind : std::uint32_t { kTrain = 0, kValid = 1, kTest = 2, kMining = 3 };

/// Record id for (split, language, sentence index).
constexpr std::uint64_t synth_id(std::uint32_t split, std::size_t lang, std::size_t index) {
  return (std::uint64_t{split} << 40) | (std::uint64_t{lang} << 24) | std::uint64_t{index};
}

std::string synth_lang_tag(std::size_t lang);

struct SynthSplit {
  std::uint32_t split = 0;
  std::vector<EmbeddingCorpus> corpora;  // one per language, sentence order
  std::size_t shared = 0;                // sentences [0, shared) are translations across languages

  /// Gold translation pairs between two languages (rank-mode list).
  RelatednessList gold(std::size_t src_lang, std::size_t tgt_lang) const;
  /// Every cross-language translation pair (src_lang < tgt_lang).
  RelatednessList all_pairs() const;
  /// Two-class list: label 1 for translations, label 0 for a mismatched
  /// sentence of the other language (offset chosen by `seed`).
  RelatednessList classify_pairs(std::uint64_t seed) const;
  EmbeddingCorpus merged() const;
};

SynthSplit gen_synthetic(const SynthConfig& cfg, SynthSplitKind split = SynthSplitKind::kTrain);

/// Mining corpora: per language `planted` shared translations followed by
/// `distractors` sentences with language-private latents.
SynthSplit gen_mining(const SynthConfig& cfg, std::size_t planted, std::size_t distractors,
                      SynthSplitKind split = SynthSplitKind::kMining);

}  // namespace lens
