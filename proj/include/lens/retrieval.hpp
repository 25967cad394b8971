#pragma once

// Cosine matching, ratio-margin scoring, bitext mining, threshold calibration
// and binarised matching over fixed-length sentence vectors.

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "lens/vectors.hpp"

namespace lens {

/// N_src x N_tgt row-major scores with the ids of both sides.
struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;
  std::vector<std::uint64_t> row_ids;
  std::vector<std::uint64_t> col_ids;

  float at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  float& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * cols, cols);
  }

  static SimilarityMatrix from_values(std::size_t rows, std::size_t cols, std::vector<float> values);
};

/// S[i][j] = <a_i, b_j> / (|a_i| |b_j|). Zero rows are an error naming the id.
/// Rows are split into contiguous blocks across `threads` workers.
SimilarityMatrix cosine_matrix(const VectorSet& a, const VectorSet& b, std::size_t threads = 1);

/// Fraction of rows whose argmax column (ties -> lowest index) differs from
/// gold[row].
double match_error(const SimilarityMatrix& s, std::span<const std::size_t> gold);

/// Gold column per source row from (src_id, tgt_id) pairs; every source id
/// must appear exactly once and every target id must exist.
std::vector<std::size_t> gold_permutation(const SimilarityMatrix& s,
                                          std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs);

struct Neighbors {
  std::size_t k = 0;
  std::vector<std::size_t> index;  // n x k, best first
  std::vector<float> score;        // n x k

  std::span<const std::size_t> indices_of(std::size_t i) const {
    return std::span<const std::size_t>(index).subspan(i * k, k);
  }
  std::span<const float> scores_of(std::size_t i) const {
    return std::span<const float>(score).subspan(i * k, k);
  }
};

/// Exact top-k per row (over columns) / per column (over rows). Ties go to
/// the lower index. Requires 1 <= k < number of candidates.
Neighbors knn_rows(const SimilarityMatrix& s, std::size_t k);
Neighbors knn_cols(const SimilarityMatrix& s, std::size_t k);

enum class MarginKind { kRatio };

struct MarginConfig {
  std::size_t k = 4;
  MarginKind kind = MarginKind::kRatio;
};

/// score(x, y) = cos(x, y) / ( sum_{z in nn_k(x)} cos(x, z) / 2k
///                            + sum_{z in nn_k(y)} cos(y, z) / 2k )
/// with neighbourhoods taken in the opposite corpus (the candidate itself may
/// be among them). Entries whose denominator is <= 0 are flagged as NaN.
SimilarityMatrix margin_score(const SimilarityMatrix& cosines, const MarginConfig& cfg = {});

std::size_t count_flagged(const SimilarityMatrix& s);

struct Candidate {
  std::uint64_t src_id = 0;
  std::uint64_t tgt_id = 0;
  float score = 0.0f;
  std::size_t src = 0;  // row index
  std::size_t tgt = 0;  // column index
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

enum class DirectionPolicy { kBidirectionalUnionGreedy };

struct MiningResult {
  std::vector<Candidate> candidates;  // descending score
  float threshold = 0.0f;
  DirectionPolicy policy = DirectionPolicy::kBidirectionalUnionGreedy;
};

/// Forward (each row's best column) and backward (each column's best row)
/// candidates, unioned and deduplicated, kept when score >= threshold, then
/// made one-to-one greedily in descending score order. Flagged (NaN) entries
/// never become candidates.
MiningResult mine_pairs(const SimilarityMatrix& scored, float threshold);

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using IdPair = std::pair<std::uint64_t, std::uint64_t>;

/// Set-based precision / recall / F1 over exact (src_id, tgt_id) pairs.
PrfScore f1_score(std::span<const Candidate> candidates, std::span<const IdPair> gold);

struct SweepRow {
  float threshold = 0.0f;
  PrfScore prf;
};

struct Calibration {
  float threshold = std::numeric_limits<float>::infinity();
  PrfScore best;
  std::vector<SweepRow> sweep;  // descending threshold
};

/// Threshold maximising F1 over the distinct candidate scores (F1 is piecewise
/// constant between them). Ties keep the larger threshold.
Calibration calibrate_threshold(const SimilarityMatrix& scored, std::span<const IdPair> gold);

struct BinaryCodes {
  std::size_t dim = 0;
  std::size_t words = 0;  // 64-bit words per row
  std::vector<std::uint64_t> bits;
  std::vector<std::uint64_t> ids;
  double active_fraction = 0.0;

  std::size_t size() const noexcept { return ids.size(); }
  bool bit(std::size_t row, std::size_t d) const {
    return (bits[row * words + d / 64] >> (d % 64)) & 1u;
  }
  std::span<const std::uint64_t> row(std::size_t i) const {
    return std::span<const std::uint64_t>(bits).subspan(i * words, words);
  }
};

/// bit = 1 iff value >= threshold.
BinaryCodes binarize(const VectorSet& vectors, float threshold = 1.0f);

/// popcount(a & b) / sqrt(popcount(a) popcount(b)); 0 when either side is empty.
SimilarityMatrix binary_similarity(const BinaryCodes& a, const BinaryCodes& b);

}  // namespace lens
