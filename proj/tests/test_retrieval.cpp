#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "lens/retrieval.hpp"
#include "oracles.hpp"

namespace lens {
namespace {

std::set<std::pair<std::size_t, std::size_t>> gold_cells(const oracle::Instance& inst) {
  return {inst.gold.begin(), inst.gold.end()};
}

std::vector<IdPair> gold_ids(const SimilarityMatrix& s, const std::set<std::pair<std::size_t, std::size_t>>& cells) {
  std::vector<IdPair> out;
  for (auto [i, j] : cells) out.emplace_back(s.row_ids[i], s.col_ids[j]);
  return out;
}

bool same_float(float a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

TEST(Cosine, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = oracle::random_instance(rng, 80);
    const auto s = cosine_matrix(inst.src, inst.tgt);
    const auto want = oracle::cosine(inst.src, inst.tgt);
    ASSERT_EQ(s.values.size(), want.size());
    for (std::size_t n = 0; n < want.size(); ++n) EXPECT_NEAR(s.values[n], want[n], 1e-6);
    EXPECT_EQ(s.row_ids, inst.src.ids());
    EXPECT_EQ(s.col_ids, inst.tgt.ids());
  }
}

TEST(Cosine, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(2);
  const auto inst = oracle::random_instance(rng, 50);
  VectorSet scaled = inst.src;
  for (float& x : scaled.data()) x *= 37.5f;
  const auto a = cosine_matrix(inst.src, inst.tgt), b = cosine_matrix(scaled, inst.tgt);
  for (std::size_t n = 0; n < a.values.size(); ++n) {
    EXPECT_NEAR(a.values[n], b.values[n], 1e-6);
    EXPECT_LE(std::abs(a.values[n]), 1.0f);
  }
  const auto self = cosine_matrix(inst.src, inst.src);
  for (std::size_t i = 0; i < self.rows; ++i) EXPECT_NEAR(self.at(i, i), 1.0f, 1e-6f);
}

TEST(Cosine, ThreadCountDoesNotChangeOutput) {
  std::mt19937_64 rng(3);
  const auto inst = oracle::random_instance(rng, 150);
  const auto one = cosine_matrix(inst.src, inst.tgt, 1);
  for (std::size_t t : {2u, 3u, 7u, 500u}) EXPECT_EQ(cosine_matrix(inst.src, inst.tgt, t).values, one.values);
}

TEST(Cosine, Errors) {
  VectorSet a(2), b(3), z(2);
  a.push_back(1, std::vector<float>{1, 0});
  b.push_back(2, std::vector<float>{1, 0, 0});
  z.push_back(42, std::vector<float>{0, 0});
  EXPECT_THROW(cosine_matrix(a, b), DimensionError);
  try {
    cosine_matrix(a, z);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
}

TEST(MatchError, TiesGoToLowestColumnAndErrorsAreChecked) {
  const auto s = SimilarityMatrix::from_values(3, 3, {0.5f, 0.5f, 0.1f, 0.2f, 0.9f, 0.9f, 0.3f, 0.2f, 0.1f});
  const std::vector<std::size_t> gold{0, 2, 0};
  EXPECT_DOUBLE_EQ(match_error(s, gold), 1.0 / 3.0);
  const std::vector<std::size_t> short_gold{0};
  EXPECT_THROW(match_error(s, short_gold), DimensionError);
  const std::vector<std::size_t> bad{0, 5, 0};
  EXPECT_THROW(match_error(s, bad), ConfigError);
}

TEST(GoldPermutation, MapsIdsAndRejectsBadLists) {
  auto s = SimilarityMatrix::from_values(2, 2, {1, 0, 0, 1});
  s.row_ids = {10, 11};
  s.col_ids = {20, 21};
  const std::vector<std::pair<std::uint64_t, std::uint64_t>> ok{{11, 20}, {10, 21}};
  EXPECT_EQ(gold_permutation(s, ok), (std::vector<std::size_t>{1, 0}));
  const std::vector<std::pair<std::uint64_t, std::uint64_t>> unknown{{10, 20}, {11, 99}};
  EXPECT_THROW(gold_permutation(s, unknown), ConfigError);
  const std::vector<std::pair<std::uint64_t, std::uint64_t>> twice{{10, 20}, {10, 21}};
  EXPECT_THROW(gold_permutation(s, twice), ConfigError);
  const std::vector<std::pair<std::uint64_t, std::uint64_t>> missing{{10, 20}};
  EXPECT_THROW(gold_permutation(s, missing), ConfigError);
}

void expect_knn_matches(const SimilarityMatrix& s, std::size_t k) {
  const Neighbors rows = knn_rows(s, k), cols = knn_cols(s, k);
  for (std::size_t i = 0; i < s.rows; ++i) {
    const auto want = oracle::top_k(oracle::row_of(s, i), k);
    const auto got = rows.indices_of(i);
    ASSERT_TRUE(std::equal(want.begin(), want.end(), got.begin())) << "row " << i << " k=" << k;
    for (std::size_t r = 0; r < k; ++r) EXPECT_EQ(rows.scores_of(i)[r], s.at(i, want[r]));
  }
  for (std::size_t j = 0; j < s.cols; ++j) {
    const auto want = oracle::top_k(oracle::col_of(s, j), k);
    const auto got = cols.indices_of(j);
    ASSERT_TRUE(std::equal(want.begin(), want.end(), got.begin())) << "col " << j << " k=" << k;
  }
}

TEST(Knn, MatchesBruteForceIncludingTies) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = oracle::random_instance(rng, 100);
    expect_knn_matches(cosine_matrix(inst.src, inst.tgt), 1 + rng() % 8);
    expect_knn_matches(oracle::tied_matrix(rng), 1 + rng() % 8);
  }
}

TEST(Knn, KMustLeaveACandidateOut) {
  const auto s = SimilarityMatrix::from_values(3, 4, std::vector<float>(12, 0.5f));
  EXPECT_THROW(knn_rows(s, 0), ConfigError);
  EXPECT_THROW(knn_rows(s, 4), ConfigError);
  EXPECT_NO_THROW(knn_rows(s, 3));
  EXPECT_THROW(knn_cols(s, 3), ConfigError);
}

TEST(Margin, DefaultsToFourNeighbours) { EXPECT_EQ(MarginConfig{}.k, 4u); }

TEST(Margin, UniformNeighbourhoodScoresOne) {
  const auto s = SimilarityMatrix::from_values(6, 6, std::vector<float>(36, 0.35f));
  for (float v : margin_score(s).values) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(Margin, ToyCase) {
  // cos(x, y) = 0.9; both neighbourhoods are {0.9, 0.6, 0.6, 0.6}, so the
  // denominator is (2.7 + 2.7) / 8 = 0.675.
  std::vector<float> v(25, 0.1f);
  v[0] = 0.9f;
  for (std::size_t j = 1; j < 5; ++j) v[j] = v[j * 5] = 0.6f;
  const auto s = SimilarityMatrix::from_values(5, 5, v);
  const auto m = margin_score(s);
  EXPECT_NEAR(m.at(0, 0), 0.9 / 0.675, 1e-6);
  EXPECT_NEAR(m.at(0, 0), 4.0 / 3.0, 1e-6);
  const auto want = oracle::margin(s, 4);
  for (std::size_t n = 0; n < want.size(); ++n) EXPECT_TRUE(same_float(m.values[n], want[n], 1e-6));
}

TEST(Margin, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = oracle::random_instance(rng, 100);
    const auto s = trial % 2 ? cosine_matrix(inst.src, inst.tgt) : oracle::tied_matrix(rng);
    const std::size_t k = 1 + rng() % 8;
    const auto got = margin_score(s, {k});
    const auto want = oracle::margin(s, k);
    std::size_t flagged = 0;
    for (std::size_t n = 0; n < want.size(); ++n) {
      EXPECT_TRUE(same_float(got.values[n], want[n], 1e-6)) << n << ": " << got.values[n] << " vs " << want[n];
      flagged += std::isnan(want[n]);
    }
    EXPECT_EQ(count_flagged(got), flagged);
  }
}

TEST(Margin, NonPositiveDenominatorIsFlagged) {
  const auto s = SimilarityMatrix::from_values(3, 3, {-0.5f, -0.2f, -0.9f, -0.3f, -0.4f, -0.1f, -0.6f, -0.7f, -0.8f});
  const auto m = margin_score(s, {1});
  EXPECT_EQ(count_flagged(m), 9u);
  EXPECT_TRUE(mine_pairs(m, -1e30f).candidates.empty());
}

void expect_mine_matches(const SimilarityMatrix& s, float threshold) {
  const auto got = mine_pairs(s, threshold).candidates;
  const auto want = oracle::mine(s, threshold);
  ASSERT_EQ(got.size(), want.size()) << "threshold " << threshold;
  for (std::size_t n = 0; n < got.size(); ++n) {
    EXPECT_EQ(got[n].src, want[n].i);
    EXPECT_EQ(got[n].tgt, want[n].j);
    EXPECT_EQ(got[n].score, want[n].score);
    EXPECT_EQ(got[n].src_id, s.row_ids[want[n].i]);
    EXPECT_EQ(got[n].tgt_id, s.col_ids[want[n].j]);
  }
}

TEST(Mine, MatchesBruteForce) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = oracle::random_instance(rng, 120);
    const auto m = margin_score(cosine_matrix(inst.src, inst.tgt));
    for (float tau : {-1e30f, 0.9f, 1.0f, 1.05f, 1.2f}) expect_mine_matches(m, tau);
    const auto tied = oracle::tied_matrix(rng);
    for (float tau : {0.0f, 0.5f, 0.875f}) expect_mine_matches(tied, tau);
  }
}

TEST(Mine, OutputIsOneToOneAndAboveThreshold) {
  std::mt19937_64 rng(7);
  const auto inst = oracle::random_instance(rng, 150);
  const auto m = margin_score(cosine_matrix(inst.src, inst.tgt));
  const auto res = mine_pairs(m, 1.0f);
  std::set<std::size_t> rows, cols;
  for (std::size_t n = 0; n < res.candidates.size(); ++n) {
    const Candidate& c = res.candidates[n];
    EXPECT_GE(c.score, 1.0f);
    EXPECT_TRUE(rows.insert(c.src).second);
    EXPECT_TRUE(cols.insert(c.tgt).second);
    if (n > 0) {
      EXPECT_LE(c.score, res.candidates[n - 1].score);
    }
  }
  EXPECT_THROW(mine_pairs(m, std::nanf("")), ConfigError);
}

TEST(Mine, RaisingTheThresholdGivesAPrefix) {
  std::mt19937_64 rng(8);
  const auto inst = oracle::random_instance(rng, 150);
  const auto m = margin_score(cosine_matrix(inst.src, inst.tgt));
  const auto low = mine_pairs(m, 0.95f).candidates, high = mine_pairs(m, 1.1f).candidates;
  ASSERT_LE(high.size(), low.size());
  EXPECT_TRUE(std::equal(high.begin(), high.end(), low.begin()));
}

TEST(F1, HandCases) {
  const std::vector<Candidate> pred{{1, 1, 0.9f, 0, 0}, {2, 3, 0.8f, 1, 1}};
  const std::vector<IdPair> gold{{1, 1}, {2, 2}};
  const PrfScore s = f1_score(pred, gold);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
  const PrfScore none = f1_score(std::vector<Candidate>{}, gold);
  EXPECT_EQ(none.f1, 0.0);
  const std::vector<Candidate> perfect{{1, 1, 0.9f, 0, 0}, {2, 2, 0.8f, 1, 1}};
  EXPECT_DOUBLE_EQ(f1_score(perfect, gold).f1, 1.0);
  EXPECT_THROW(f1_score(perfect, std::vector<IdPair>{}), ConfigError);
}

void expect_calibration_matches(const SimilarityMatrix& s, const std::set<std::pair<std::size_t, std::size_t>>& cells) {
  const auto gold = gold_ids(s, cells);
  const Calibration cal = calibrate_threshold(s, gold);
  const auto want = oracle::calibrate(s, cells);
  EXPECT_EQ(cal.threshold, want.threshold);
  EXPECT_NEAR(cal.best.f1, want.f1, 1e-12);
  // Mining at the calibrated threshold reproduces the reported score.
  EXPECT_NEAR(f1_score(mine_pairs(s, cal.threshold).candidates, gold).f1, cal.best.f1, 1e-12);
  // Every sweep row agrees with a fresh mining run at its threshold.
  for (std::size_t n = 0; n < cal.sweep.size(); n += 1 + cal.sweep.size() / 10) {
    const auto& row = cal.sweep[n];
    EXPECT_NEAR(f1_score(mine_pairs(s, row.threshold).candidates, gold).f1, row.prf.f1, 1e-12);
  }
  // A 0.001-step grid never beats the distinct-score sweep.
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (float v : s.values)
    if (!std::isnan(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double t = lo; t <= hi; t += 0.001)
    EXPECT_LE(f1_score(mine_pairs(s, static_cast<float>(t)).candidates, gold).f1, cal.best.f1 + 1e-12);
}

TEST(Calibrate, MatchesBruteForce) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 15; ++trial) {
    const auto inst = oracle::random_instance(rng, 100);
    auto cells = gold_cells(inst);
    if (cells.empty()) cells.insert({0, 0});
    expect_calibration_matches(margin_score(cosine_matrix(inst.src, inst.tgt)), cells);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = oracle::tied_matrix(rng, 30);
    std::set<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < std::min(s.rows, s.cols); i += 2) cells.insert({i, (i * 7) % s.cols});
    expect_calibration_matches(s, cells);
  }
}

TEST(Calibrate, SweepIsDescendingAndEqualF1KeepsTheLargerThreshold) {
  // Diagonal scores 0.9, 0.8, 0.7, 0.6 with gold at 0.9 and 0.6: F1 is 2/3,
  // 1/2, 2/5 and again 2/3; the larger threshold wins the tie.
  std::vector<float> v(16, 0.0f);
  for (std::size_t i = 0; i < 4; ++i) v[i * 5] = 0.9f - 0.1f * static_cast<float>(i);
  const auto s = SimilarityMatrix::from_values(4, 4, v);
  const std::vector<IdPair> gold{{0, 0}, {3, 3}};
  const Calibration cal = calibrate_threshold(s, gold);
  ASSERT_EQ(cal.sweep.size(), 4u);
  const double f1s[] = {2.0 / 3.0, 0.5, 0.4, 2.0 / 3.0};
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_EQ(cal.sweep[n].threshold, v[n * 5]);
    EXPECT_NEAR(cal.sweep[n].prf.f1, f1s[n], 1e-15);
  }
  EXPECT_EQ(cal.threshold, 0.9f);
  EXPECT_THROW(calibrate_threshold(s, std::vector<IdPair>{}), ConfigError);
}

TEST(Binarize, HandCase) {
  VectorSet v(4);
  v.push_back(1, std::vector<float>{0.5f, 1.2f, 3.0f, 0.0f});
  const BinaryCodes codes = binarize(v);
  EXPECT_FALSE(codes.bit(0, 0));
  EXPECT_TRUE(codes.bit(0, 1));
  EXPECT_TRUE(codes.bit(0, 2));
  EXPECT_FALSE(codes.bit(0, 3));
  EXPECT_DOUBLE_EQ(codes.active_fraction, 0.5);
  VectorSet edge(1);
  edge.push_back(1, std::vector<float>{1.0f});
  EXPECT_TRUE(binarize(edge).bit(0, 0));
}

TEST(Binarize, ActiveFractionIsMonotoneInTheThreshold) {
  std::mt19937_64 rng(10);
  const auto inst = oracle::random_instance(rng, 100);
  double prev = 1.0;
  for (float theta = -3.0f; theta <= 3.0f; theta += 0.125f) {
    const double f = binarize(inst.src, theta).active_fraction;
    EXPECT_LE(f, prev);
    prev = f;
  }
}

TEST(Binarize, SimilarityMatchesBitCounting) {
  std::mt19937_64 rng(11);
  VectorSet a(130), b(130);
  std::uniform_real_distribution<float> u(0.0f, 2.0f);
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<float> x(130), y(130);
    for (auto& e : x) e = u(rng);
    for (auto& e : y) e = u(rng);
    if (i == 3) std::fill(x.begin(), x.end(), 0.0f);
    a.push_back(i, x);
    b.push_back(i, y);
  }
  const BinaryCodes ca = binarize(a), cb = binarize(b);
  const auto s = binary_similarity(ca, cb);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) {
      std::size_t pa = 0, pb = 0, both = 0;
      for (std::size_t d = 0; d < 130; ++d) {
        pa += ca.bit(i, d);
        pb += cb.bit(j, d);
        both += ca.bit(i, d) && cb.bit(j, d);
      }
      const double want = pa && pb ? both / std::sqrt(static_cast<double>(pa) * pb) : 0.0;
      EXPECT_NEAR(s.at(i, j), want, 1e-7);
    }
  EXPECT_THROW(binary_similarity(ca, binarize(VectorSet(3))), DimensionError);
}

}  // namespace
}  // namespace lens
