#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "lens/analysis.hpp"
#include "lens/encoders.hpp"
#include "lens/synth.hpp"

namespace lens {
namespace {

VectorSet rows(std::size_t dim, const std::vector<std::vector<float>>& data) {
  VectorSet v(dim);
  for (std::size_t i = 0; i < data.size(); ++i) v.push_back(i, data[i]);
  return v;
}

std::vector<double> variance_oracle(const VectorSet& v) {
  const std::size_t N = v.size(), D = v.dim();
  std::vector<std::vector<double>> unit(N, std::vector<double>(D));
  for (std::size_t i = 0; i < N; ++i) {
    double n = 0.0;
    for (float x : v.row(i)) n += static_cast<double>(x) * x;
    for (std::size_t d = 0; d < D; ++d) unit[i][d] = v.row(i)[d] / std::sqrt(n);
  }
  std::vector<double> out(D);
  for (std::size_t d = 0; d < D; ++d) {
    double mean = 0.0;
    for (const auto& r : unit) mean += r[d];
    mean /= static_cast<double>(N);
    for (const auto& r : unit) out[d] += (r[d] - mean) * (r[d] - mean);
    out[d] /= static_cast<double>(N);
  }
  return out;
}

VectorSet random_rows(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  VectorSet v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> r(dim);
    for (float& x : r) x = g(rng);
    r[0] += 0.1f;
    v.push_back(i, r);
  }
  return v;
}

TEST(LanguageVector, HandCase) {
  const LanguageVector lv = language_vector(rows(2, {{1, 0}, {0, 1}}), "xx");
  EXPECT_EQ(lv.lang, "xx");
  EXPECT_EQ(lv.count, 2u);
  EXPECT_DOUBLE_EQ(lv.variance[0], 0.25);
  EXPECT_DOUBLE_EQ(lv.variance[1], 0.25);
}

TEST(LanguageVector, IdenticalRowsGiveZero) {
  const LanguageVector lv = language_vector(rows(3, {{1, 2, 3}, {1, 2, 3}, {2, 4, 6}}), "xx");
  for (double v : lv.variance) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(LanguageVector, MatchesOracleAndIsInvariant) {
  std::mt19937_64 rng(1);
  const VectorSet v = random_rows(40, 7, rng);
  const auto want = variance_oracle(v);
  const LanguageVector lv = language_vector(v, "a");
  for (std::size_t d = 0; d < 7; ++d) {
    EXPECT_NEAR(lv.variance[d], want[d], 1e-12);
    EXPECT_GE(lv.variance[d], 0.0);
  }
  VectorSet scaled = v, doubled(7), reversed(7);
  for (float& x : scaled.data()) x *= 8.0f;
  for (std::size_t i = 0; i < 80; ++i) doubled.push_back(i, v.row(i % 40));
  for (std::size_t i = 0; i < 40; ++i) reversed.push_back(i, v.row(39 - i));
  for (const VectorSet* other : {&scaled, &doubled, &reversed}) {
    const LanguageVector o = language_vector(*other, "a");
    for (std::size_t d = 0; d < 7; ++d) EXPECT_NEAR(o.variance[d], lv.variance[d], 1e-12);
  }
}

TEST(LanguageVector, Errors) {
  EXPECT_THROW(language_vector(rows(2, {{1, 0}}), "a"), ConfigError);
  EXPECT_THROW(language_vector(rows(2, {{1, 0}, {0, 0}}), "a"), NumericError);
}

TEST(ProbeSplit, StratifiedDisjointAndDeterministic) {
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 300; ++i) labels.push_back(i < 200 ? 0 : (i < 290 ? 1 : 2));
  const ProbeSplit s = probe_split(labels, 3, 0.1, 4);
  std::vector<std::size_t> per_class(3);
  for (std::size_t i : s.train) ++per_class[labels[i]];
  EXPECT_EQ(per_class, (std::vector<std::size_t>{20, 9, 1}));
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (std::size_t i : s.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 300u);
  EXPECT_EQ(probe_split(labels, 3, 0.1, 4).train, s.train);
  EXPECT_NE(probe_split(labels, 3, 0.1, 5).train, s.train);
  // round(0.9 * 2) = 2, but a class of two keeps one test row.
  const std::vector<std::size_t> tiny{0, 0, 1, 1};
  const ProbeSplit t = probe_split(tiny, 2, 0.9, 1);
  EXPECT_EQ(t.train.size(), 2u);
  EXPECT_EQ(t.test.size(), 2u);
  EXPECT_EQ(probe_split(tiny, 2, 1.0, 1).train.size(), 4u);
  EXPECT_THROW(probe_split(tiny, 2, 0.0, 1), ConfigError);
  EXPECT_THROW(probe_split(tiny, 3, 0.5, 1), ConfigError);
}

TEST(Probe, SeparableDataIsFitPerfectly) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g(0.0f, 0.3f);
  VectorSet v(5);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < 200; ++i) {
    std::vector<float> r(5);
    for (float& x : r) x = g(rng);
    r[i % 2] += 3.0f;
    v.push_back(i, r);
    labels.push_back(i % 2 ? "b" : "a");
  }
  ProbeOptions opts;
  opts.train_fraction = 1.0;
  const ProbeReport rep = probe_train(v, labels, opts);
  EXPECT_EQ(rep.train_accuracy, 1.0);
  EXPECT_EQ(rep.model.classes, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(probe_eval(rep.model, v, labels), 1.0);
}

TEST(Probe, ShuffledLabelsGiveChanceAccuracy) {
  SynthConfig cfg;
  const VectorSet v = batch_encode(gen_synthetic(cfg, SynthSplitKind::kTest).merged(), LensParameters{MeanPool{}});
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < v.size(); ++i) labels.push_back(synth_lang_tag(i % 3));
  std::mt19937_64 rng(3);
  std::shuffle(labels.begin(), labels.end(), rng);
  const ProbeReport rep = probe_train(v, labels);
  EXPECT_NEAR(rep.test_accuracy, 1.0 / 3.0, 0.1);
}

TEST(Probe, EvalAgreesWithARecount) {
  std::mt19937_64 rng(4);
  const VectorSet v = random_rows(90, 4, rng);
  ProbeModel m;
  m.classes = {"a", "b", "c"};
  m.dim = 4;
  m.mean.assign(4, 0.0);
  m.scale.assign(4, 1.0);
  m.weights.assign(12, 0.0);
  m.bias = {1.0, 0.0, 0.0};
  std::vector<std::string> balanced;
  for (std::size_t i = 0; i < 90; ++i) balanced.push_back(m.classes[i % 3]);
  EXPECT_NEAR(probe_eval(m, v, balanced), 1.0 / 3.0, 1e-15);

  std::normal_distribution<double> g(0.0, 1.0);
  for (double& w : m.weights) w = g(rng);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < 90; ++i) hits += m.classes[m.predict(v.row(i))] == balanced[i];
  EXPECT_DOUBLE_EQ(probe_eval(m, v, balanced), static_cast<double>(hits) / 90.0);

  balanced[5] = "zz";
  EXPECT_THROW(probe_eval(m, v, balanced), ConfigError);
}

TEST(Probe, NeedsTwoClasses) {
  std::mt19937_64 rng(5);
  const VectorSet v = random_rows(10, 3, rng);
  const std::vector<std::string> one(10, "a");
  EXPECT_THROW(probe_train(v, one), Error);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> rank_oracle(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double below = 0, equal = 0;
    for (double y : x) below += y < x[i], equal += y == x[i];
    r[i] = 1.0 + below + (equal - 1.0) / 2.0;
  }
  return r;
}

TEST(Spearman, OrderedAndReversed) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{10, 20, 30, 40, 50}, c{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(a, b), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, c), -1.0);
}

TEST(Spearman, TiesMatchTheRankOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = static_cast<double>(rng() % 4);
    for (auto& x : b) x = static_cast<double>(rng() % 5);
    a[0] = 0, a[1] = 1, b[0] = 0, b[1] = 1;
    EXPECT_EQ(average_ranks(a), rank_oracle(a));
    EXPECT_NEAR(spearman(a, b), pearson(rank_oracle(a), rank_oracle(b)), 1e-12);
  }
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<double> a(30), b(30);
  for (auto& x : a) x = g(rng);
  for (std::size_t i = 0; i < 30; ++i) b[i] = a[i] + g(rng);
  std::vector<double> ea(30), cb(30);
  for (std::size_t i = 0; i < 30; ++i) ea[i] = std::exp(a[i]), cb[i] = b[i] * b[i] * b[i];
  EXPECT_NEAR(spearman(ea, cb), spearman(a, b), 1e-12);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, flat{2, 2, 2}, short_v{1, 2};
  EXPECT_THROW(spearman(a, flat), NumericError);
  EXPECT_THROW(spearman(a, short_v), Error);
}

TEST(Export, RoundTripsLabelsAndValues) {
  std::mt19937_64 rng(8);
  const VectorSet v = random_rows(12, 5, rng);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < 12; ++i) labels.push_back("l" + std::to_string(i % 3));
  const LabeledRows lr = labeled_rows(v, labels);
  const auto path = std::filesystem::temp_directory_path() / "lens_test_export.tsv";
  export_projection(lr, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "label\td0\td1\td2\td3\td4");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 12u);
  const LabeledRows back = read_projection(path);
  EXPECT_EQ(back.labels, lr.labels);
  EXPECT_EQ(back.dim, 5u);
  EXPECT_EQ(back.values, lr.values);
  std::filesystem::remove(path);
}

TEST(Export, LanguageVectorsAndMalformedFiles) {
  std::mt19937_64 rng(9);
  const std::vector<LanguageVector> langs{language_vector(random_rows(10, 3, rng), "a"),
                                          language_vector(random_rows(10, 3, rng), "b")};
  const LabeledRows lr = labeled_rows(langs);
  EXPECT_EQ(lr.labels, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(lr.values[4], langs[1].variance[1]);
  const auto path = std::filesystem::temp_directory_path() / "lens_test_bad.tsv";
  std::ofstream(path) << "label\td0\td1\nx\t1\n";
  EXPECT_THROW(read_projection(path), ParseError);
  std::ofstream(path) << "name\td0\nx\t1\n";
  EXPECT_THROW(read_projection(path), ParseError);
  std::ofstream(path) << "label\td0\nx\tabc\n";
  EXPECT_THROW(read_projection(path), ParseError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace lens
