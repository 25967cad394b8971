#pragma once

// Embedding corpora (CLEM binary format) and relatedness lists (TSV).
//
// CLEM layout, little-endian:
//   "CLEM" | u32 version=1 | u32 K | u64 N
//   N x ( u64 id | 8-byte ASCII lang, space padded | u32 T | K*T f32, K rows of T )

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lens/tensor.hpp"

namespace lens {

inline constexpr std::uint32_t kCorpusVersion = 1;
inline constexpr std::size_t kLangTagBytes = 8;

struct EmbeddingRecord {
  std::uint64_t id = 0;
  std::string lang;
  Tensor<float> embeddings;  // K x T

  std::size_t dim() const { return embeddings.dim(0); }
  std::size_t tokens() const { return embeddings.dim(1); }
  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

class EmbeddingCorpus {
 public:
  explicit EmbeddingCorpus(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Validates and appends: unique id, T >= 1, K == dim(), finite values, lang
  /// tag of 1..8 printable ASCII characters without spaces.
  void add(EmbeddingRecord record);

  const EmbeddingRecord* find(std::uint64_t id) const;
  const EmbeddingRecord& at_id(std::uint64_t id) const;
  bool contains(std::uint64_t id) const { return index_.contains(id); }

  /// Concatenates corpora in order; dims must agree and ids stay unique.
  static EmbeddingCorpus merge(std::span<const EmbeddingCorpus> parts);

  friend bool operator==(const EmbeddingCorpus& a, const EmbeddingCorpus& b) {
    return a.dim_ == b.dim_ && a.records_ == b.records_;
  }

 private:
  std::size_t dim_;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

std::vector<unsigned char> serialize_corpus(const EmbeddingCorpus& corpus);
EmbeddingCorpus parse_corpus(std::span<const unsigned char> bytes, const std::string& name = "<memory>");

void write_corpus(const EmbeddingCorpus& corpus, const std::filesystem::path& path);
EmbeddingCorpus read_corpus(const std::filesystem::path& path);

/// FNV-1a 64 over the CLEM serialisation.
std::uint64_t content_hash(const EmbeddingCorpus& corpus);
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

// ---------------------------------------------------------------------------
// Relatedness lists

enum class PairMode { kClassify, kRank };

struct PairEntry {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::int32_t label = -1;  // -1 in rank mode
  std::size_t line = 0;     // 1-based source line, 0 when built in memory
};

struct RelatednessList {
  PairMode mode = PairMode::kRank;
  std::vector<PairEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  /// max label + 1 (classify mode); 0 in rank mode.
  std::size_t num_classes() const;
  std::vector<std::size_t> class_histogram() const;
};

/// TSV: "id_a \t id_b" (rank) or "id_a \t id_b \t label" (classify). Blank
/// lines are skipped; anything else malformed is a format error.
RelatednessList parse_pairs(std::string_view text, PairMode mode, const std::string& name = "<memory>");
RelatednessList read_pairs(const std::filesystem::path& path, PairMode mode);
std::string format_pairs(const RelatednessList& list);
void write_pairs(const RelatednessList& list, const std::filesystem::path& path);

/// Checks every id against the corpora (either side may live in any of them).
void bind_pairs(const RelatednessList& list, std::span<const EmbeddingCorpus* const> corpora,
                const std::string& name = "<pairs>");
void bind_pairs(const RelatednessList& list, const EmbeddingCorpus& corpus,
                const std::string& name = "<pairs>");

}  // namespace lens
