#include "lens/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <set>
#include <thread>
#include <unordered_map>

#include "lens/simd/kernels.hpp"

namespace lens {
namespace {

std::vector<float> unit_rows(const VectorSet& v, const char* side) {
  std::vector<float> out(v.data().begin(), v.data().end());
  const std::size_t D = v.dim();
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto row = std::span<float>(out).subspan(i * D, D);
    double sq = 0.0;
    for (float x : row) sq += static_cast<double>(x) * x;
    if (!(sq > 0.0)) {
      throw NumericError(std::string("cosine: zero-norm vector in ") + side + " set, id " +
                         std::to_string(v.ids()[i]));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : row) x = static_cast<float>(x * inv);
  }
  return out;
}

template <class Score>
void top_k(std::size_t n, std::size_t k, Score score, std::vector<std::size_t>& order,
           std::size_t* idx_out, float* score_out) {
  order.resize(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  auto better = [&](std::size_t a, std::size_t b) {
    const float sa = score(a), sb = score(b);
    return sa > sb || (sa == sb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  for (std::size_t r = 0; r < k; ++r) {
    idx_out[r] = order[r];
    score_out[r] = score(order[r]);
  }
}

void check_k(std::size_t k, std::size_t n, const char* what) {
  if (k < 1 || k >= n) {
    throw ConfigError(std::string("knn: k=") + std::to_string(k) + " must satisfy 1 <= k < " +
                      std::to_string(n) + " (" + what + ")");
  }
}

}  // namespace

SimilarityMatrix SimilarityMatrix::from_values(std::size_t rows, std::size_t cols, std::vector<float> values) {
  if (values.size() != rows * cols) throw DimensionError("similarity matrix: value count mismatch");
  SimilarityMatrix s;
  s.rows = rows;
  s.cols = cols;
  s.values = std::move(values);
  s.row_ids.resize(rows);
  s.col_ids.resize(cols);
  for (std::size_t i = 0; i < rows; ++i) s.row_ids[i] = i;
  for (std::size_t j = 0; j < cols; ++j) s.col_ids[j] = j;
  return s;
}

SimilarityMatrix cosine_matrix(const VectorSet& a, const VectorSet& b, std::size_t threads) {
  if (a.dim() != b.dim()) {
    throw DimensionError("cosine: dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()) + " differ");
  }
  const std::vector<float> ua = unit_rows(a, "source");
  const std::vector<float> ub = unit_rows(b, "target");
  SimilarityMatrix s;
  s.rows = a.size();
  s.cols = b.size();
  s.row_ids = a.ids();
  s.col_ids = b.ids();
  s.values.assign(s.rows * s.cols, 0.0f);
  const std::size_t D = a.dim();
  const auto& kern = simd::kernels();
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      kern.dot_rows(ua.data() + i * D, ub.data(), s.cols, D, s.values.data() + i * s.cols);
      for (std::size_t j = 0; j < s.cols; ++j) {
        float& v = s.values[i * s.cols + j];
        v = std::clamp(v, -1.0f, 1.0f);
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, s.rows));
  if (threads == 1) {
    work(0, s.rows);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back(work, s.rows * w / threads, s.rows * (w + 1) / threads);
    for (auto& t : pool) t.join();
  }
  return s;
}

double match_error(const SimilarityMatrix& s, std::span<const std::size_t> gold) {
  if (gold.size() != s.rows) throw DimensionError("match_error: gold length differs from row count");
  if (s.rows == 0) throw EmptySequenceError("match_error: no source rows");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    if (gold[i] >= s.cols) {
      throw ConfigError("match_error: gold index " + std::to_string(gold[i]) + " out of range for row " +
                        std::to_string(i));
    }
    auto row = s.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < s.cols; ++j)
      if (row[j] > row[best]) best = j;
    if (best != gold[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(s.rows);
}

std::vector<std::size_t> gold_permutation(const SimilarityMatrix& s,
                                          std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs) {
  std::unordered_map<std::uint64_t, std::size_t> col_of, row_of;
  for (std::size_t j = 0; j < s.cols; ++j) col_of.emplace(s.col_ids[j], j);
  for (std::size_t i = 0; i < s.rows; ++i) row_of.emplace(s.row_ids[i], i);
  const std::size_t unset = s.cols;
  std::vector<std::size_t> gold(s.rows, unset);
  for (const auto& [src, tgt] : pairs) {
    auto r = row_of.find(src);
    auto c = col_of.find(tgt);
    if (r == row_of.end() || c == col_of.end()) {
      throw ConfigError("gold pair (" + std::to_string(src) + ", " + std::to_string(tgt) +
                        ") references an unknown id");
    }
    if (gold[r->second] != unset) throw ConfigError("gold lists source id " + std::to_string(src) + " twice");
    gold[r->second] = c->second;
  }
  for (std::size_t i = 0; i < s.rows; ++i) {
    if (gold[i] == unset) throw ConfigError("no gold target for source id " + std::to_string(s.row_ids[i]));
  }
  return gold;
}

Neighbors knn_rows(const SimilarityMatrix& s, std::size_t k) {
  check_k(k, s.cols, "row neighbours over columns");
  Neighbors nb;
  nb.k = k;
  nb.index.resize(s.rows * k);
  nb.score.resize(s.rows * k);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < s.rows; ++i) {
    auto row = s.row(i);
    top_k(s.cols, k, [&](std::size_t j) { return row[j]; }, order, nb.index.data() + i * k,
          nb.score.data() + i * k);
  }
  return nb;
}

Neighbors knn_cols(const SimilarityMatrix& s, std::size_t k) {
  check_k(k, s.rows, "column neighbours over rows");
  Neighbors nb;
  nb.k = k;
  nb.index.resize(s.cols * k);
  nb.score.resize(s.cols * k);
  std::vector<std::size_t> order;
  std::vector<float> col(s.rows);
  for (std::size_t j = 0; j < s.cols; ++j) {
    for (std::size_t i = 0; i < s.rows; ++i) col[i] = s.at(i, j);
    top_k(s.rows, k, [&](std::size_t i) { return col[i]; }, order, nb.index.data() + j * k,
          nb.score.data() + j * k);
  }
  return nb;
}

SimilarityMatrix margin_score(const SimilarityMatrix& cosines, const MarginConfig& cfg) {
  if (cfg.kind != MarginKind::kRatio) throw ConfigError("margin: only the ratio margin is implemented");
  const Neighbors fwd = knn_rows(cosines, cfg.k);
  const Neighbors bwd = knn_cols(cosines, cfg.k);
  const double two_k = 2.0 * static_cast<double>(cfg.k);
  auto mean_term = [two_k](std::span<const float> scores) {
    double acc = 0.0;
    for (float v : scores) acc += v;
    return acc / two_k;
  };
  std::vector<double> rx(cosines.rows), ry(cosines.cols);
  for (std::size_t i = 0; i < cosines.rows; ++i) rx[i] = mean_term(fwd.scores_of(i));
  for (std::size_t j = 0; j < cosines.cols; ++j) ry[j] = mean_term(bwd.scores_of(j));

  SimilarityMatrix out = cosines;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) {
      const double denom = rx[i] + ry[j];
      out.at(i, j) = denom > 0.0 ? static_cast<float>(cosines.at(i, j) / denom)
                                 : std::numeric_limits<float>::quiet_NaN();
    }
  }
  return out;
}

std::size_t count_flagged(const SimilarityMatrix& s) {
  return static_cast<std::size_t>(std::count_if(s.values.begin(), s.values.end(), [](float v) { return std::isnan(v); }));
}

MiningResult mine_pairs(const SimilarityMatrix& scored, float threshold) {
  if (std::isnan(threshold)) throw ConfigError("mine: threshold is NaN");
  std::vector<std::pair<std::size_t, std::size_t>> raw;
  for (std::size_t i = 0; i < scored.rows; ++i) {
    std::size_t best = scored.cols;
    for (std::size_t j = 0; j < scored.cols; ++j) {
      const float v = scored.at(i, j);
      if (std::isnan(v)) continue;
      if (best == scored.cols || v > scored.at(i, best)) best = j;
    }
    if (best < scored.cols) raw.emplace_back(i, best);
  }
  for (std::size_t j = 0; j < scored.cols; ++j) {
    std::size_t best = scored.rows;
    for (std::size_t i = 0; i < scored.rows; ++i) {
      const float v = scored.at(i, j);
      if (std::isnan(v)) continue;
      if (best == scored.rows || v > scored.at(best, j)) best = i;
    }
    if (best < scored.rows) raw.emplace_back(best, j);
  }
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());

  std::vector<Candidate> pool;
  for (auto [i, j] : raw) {
    const float v = scored.at(i, j);
    if (v >= threshold) pool.push_back({scored.row_ids[i], scored.col_ids[j], v, i, j});
  }
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.src != b.src) return a.src < b.src;
    return a.tgt < b.tgt;
  });

  MiningResult result;
  result.threshold = threshold;
  std::vector<bool> src_used(scored.rows, false), tgt_used(scored.cols, false);
  for (const Candidate& c : pool) {
    if (src_used[c.src] || tgt_used[c.tgt]) continue;
    src_used[c.src] = tgt_used[c.tgt] = true;
    result.candidates.push_back(c);
  }
  return result;
}

PrfScore f1_score(std::span<const Candidate> candidates, std::span<const IdPair> gold) {
  if (gold.empty()) throw ConfigError("f1: gold set is empty");
  const std::set<IdPair> gold_set(gold.begin(), gold.end());
  std::set<IdPair> predicted;
  for (const Candidate& c : candidates) predicted.emplace(c.src_id, c.tgt_id);
  std::size_t hits = 0;
  for (const auto& p : predicted) hits += gold_set.count(p);
  PrfScore s;
  s.precision = predicted.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(predicted.size());
  s.recall = static_cast<double>(hits) / static_cast<double>(gold_set.size());
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

Calibration calibrate_threshold(const SimilarityMatrix& scored, std::span<const IdPair> gold) {
  if (gold.empty()) throw ConfigError("calibrate: gold set is empty");
  // Greedy one-to-one selection over a descending list only looks at earlier
  // entries, so the pairs mined at threshold t are exactly the prefix of the
  // unthresholded result with score >= t.
  const MiningResult all = mine_pairs(scored, -std::numeric_limits<float>::infinity());
  const std::set<IdPair> gold_set(gold.begin(), gold.end());
  const double gold_n = static_cast<double>(gold_set.size());

  Calibration cal;
  std::size_t hits = 0;
  const auto& cs = all.candidates;
  for (std::size_t n = 0; n < cs.size(); ++n) {
    hits += gold_set.count({cs[n].src_id, cs[n].tgt_id});
    if (n + 1 < cs.size() && cs[n + 1].score == cs[n].score) continue;
    SweepRow row;
    row.threshold = cs[n].score;
    row.prf.precision = static_cast<double>(hits) / static_cast<double>(n + 1);
    row.prf.recall = static_cast<double>(hits) / gold_n;
    const double pr = row.prf.precision + row.prf.recall;
    row.prf.f1 = pr > 0.0 ? 2.0 * row.prf.precision * row.prf.recall / pr : 0.0;
    if (cal.sweep.empty() || row.prf.f1 > cal.best.f1) {
      cal.best = row.prf;
      cal.threshold = row.threshold;
    }
    cal.sweep.push_back(row);
  }
  return cal;
}

BinaryCodes binarize(const VectorSet& vectors, float threshold) {
  if (std::isnan(threshold)) throw ConfigError("binarize: threshold is NaN");
  BinaryCodes codes;
  codes.dim = vectors.dim();
  codes.words = (codes.dim + 63) / 64;
  codes.ids = vectors.ids();
  codes.bits.assign(vectors.size() * codes.words, 0);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto row = vectors.row(i);
    for (std::size_t d = 0; d < codes.dim; ++d) {
      if (row[d] >= threshold) {
        codes.bits[i * codes.words + d / 64] |= std::uint64_t{1} << (d % 64);
        ++ones;
      }
    }
  }
  const std::size_t cells = vectors.size() * codes.dim;
  codes.active_fraction = cells ? static_cast<double>(ones) / static_cast<double>(cells) : 0.0;
  return codes;
}

SimilarityMatrix binary_similarity(const BinaryCodes& a, const BinaryCodes& b) {
  if (a.dim != b.dim) throw DimensionError("binary similarity: code lengths differ");
  auto pop = [](std::span<const std::uint64_t> w) {
    std::size_t n = 0;
    for (auto x : w) n += static_cast<std::size_t>(std::popcount(x));
    return n;
  };
  std::vector<std::size_t> pa(a.size()), pb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] = pop(a.row(i));
  for (std::size_t j = 0; j < b.size(); ++j) pb[j] = pop(b.row(j));
  SimilarityMatrix s;
  s.rows = a.size();
  s.cols = b.size();
  s.row_ids = a.ids;
  s.col_ids = b.ids;
  s.values.assign(s.rows * s.cols, 0.0f);
  for (std::size_t i = 0; i < s.rows; ++i) {
    auto ra = a.row(i);
    for (std::size_t j = 0; j < s.cols; ++j) {
      if (pa[i] == 0 || pb[j] == 0) continue;
      auto rb = b.row(j);
      std::size_t common = 0;
      for (std::size_t w = 0; w < a.words; ++w) common += static_cast<std::size_t>(std::popcount(ra[w] & rb[w]));
      s.at(i, j) = static_cast<float>(static_cast<double>(common) /
                                      std::sqrt(static_cast<double>(pa[i]) * static_cast<double>(pb[j])));
    }
  }
  return s;
}

}  // namespace lens
