#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lens/ops.hpp"
#include "support.hpp"

namespace lens {
namespace {

using testing::grad_check;
using testing::random_tensor;

constexpr double kGradTol = 1e-5;
constexpr int kPoints = 10;

Tensor<double> mat(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor<double>::matrix(r, c, v); }
Tensor<double> vec(std::vector<double> v) { return Tensor<double>::vector(v); }

TEST(Linear, IdentityMap) {
  Tape<double> t;
  Var y = ops::linear(t, t.constant(mat(2, 2, {1, 0, 0, 1})), t.constant(vec({0, 0})),
                      t.constant(mat(2, 2, {1, -2, -1, 3})));
  EXPECT_EQ(t.value(y), mat(2, 2, {1, -2, -1, 3}));
}

TEST(Linear, HandSum) {
  Tape<double> t;
  Var y = ops::linear(t, t.constant(mat(1, 2, {1, 1})), t.constant(vec({0.5})), t.constant(mat(2, 1, {2, 3})));
  EXPECT_DOUBLE_EQ(t.value(y)[0], 5.5);
}

TEST(Linear, ShapeMismatchThrows) {
  Tape<double> t;
  EXPECT_THROW(ops::linear(t, t.constant(mat(2, 3, std::vector<double>(6))), t.constant(vec({0, 0})),
                           t.constant(mat(2, 2, std::vector<double>(4)))),
               DimensionError);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::linear(t, v[0], v[1], v[2]); },
                        {random_tensor({3, 4}, rng), random_tensor({3}, rng), random_tensor({4, 5}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, 1e-6);
    EXPECT_EQ(r.skipped, 0u);
  }
}

TEST(Conv1d, ZeroPaddedSlidingSum) {
  Tape<double> t;
  Var y = ops::conv1d_same(t, t.constant(Tensor<double>({1, 1, 3}, {1, 1, 1})), t.constant(vec({0})),
                           t.constant(mat(1, 3, {1, 2, 3})));
  EXPECT_EQ(t.value(y), mat(1, 3, {3, 6, 5}));
}

TEST(Conv1d, EvenWidthIsConfigError) {
  Tape<double> t;
  EXPECT_THROW(ops::conv1d_same(t, t.constant(Tensor<double>({1, 1, 2})), t.constant(vec({0})),
                                t.constant(mat(1, 3, {1, 2, 3}))),
               ConfigError);
}

TEST(Conv1d, WidthOneEqualsLinear) {
  std::mt19937_64 rng(3);
  const Tensor<double> w = random_tensor({2, 3}, rng), b = random_tensor({2}, rng), x = random_tensor({3, 6}, rng);
  Tape<double> t;
  Var lin = ops::linear(t, t.constant(w), t.constant(b), t.constant(x));
  Var conv = ops::conv1d_same(t, t.constant(Tensor<double>({2, 3, 1}, w.values())), t.constant(b), t.constant(x));
  for (std::size_t i = 0; i < t.value(lin).size(); ++i) EXPECT_NEAR(t.value(lin)[i], t.value(conv)[i], 1e-15);
}

TEST(Conv1d, OutputLengthEqualsInputLength) {
  std::mt19937_64 rng(4);
  for (std::size_t T : {1u, 2u, 7u}) {
    Tape<double> t;
    Var y = ops::conv1d_same(t, t.constant(random_tensor({2, 3, 5}, rng)), t.constant(random_tensor({2}, rng)),
                             t.constant(random_tensor({3, T}, rng)));
    EXPECT_EQ(t.value(y).shape(), (Shape{2, T}));
  }
}

TEST(Conv1d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check(
        [](Tape<double>& t, const std::vector<Var>& v) { return ops::conv1d_same(t, v[0], v[1], v[2]); },
        {random_tensor({2, 3, 3}, rng), random_tensor({2}, rng), random_tensor({3, 6}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, 1e-6);
  }
}

TEST(Activation, HandValues) {
  Tape<double> t;
  Var r = ops::activation(t, Activation::kRelu, t.constant(vec({-1, 0, 2})));
  EXPECT_EQ(t.value(r), vec({0, 0, 2}));
  Var s = ops::activation(t, Activation::kSigmoid, t.constant(vec({0})));
  EXPECT_DOUBLE_EQ(t.value(s)[0], 0.5);
}

TEST(Activation, ReluSubgradientAtZeroIsZero) {
  Tape<double> t;
  Var x = t.leaf(vec({-1, 0, 2}));
  Var r = ops::activation(t, Activation::kRelu, x);
  auto g = t.backward(r, vec({1, 1, 1}));
  EXPECT_EQ(g.at(x), vec({0, 0, 1}));
}

TEST(Activation, TanhGradientMatchesAnalyticDerivative) {
  std::mt19937_64 rng(5);
  const Tensor<double> x = random_tensor({50}, rng, -3, 3);
  Tape<double> t;
  Var xv = t.leaf(x);
  Var y = ops::activation(t, Activation::kTanh, xv);
  auto g = t.backward(y, Tensor<double>::filled({50}, 1.0));
  for (std::size_t i = 0; i < 50; ++i) {
    const double th = std::tanh(x[i]);
    EXPECT_NEAR(g.at(xv)[i], 1.0 - th * th, 1e-8);
  }
}

TEST(Activation, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  for (Activation a : {Activation::kRelu, Activation::kTanh, Activation::kSigmoid}) {
    for (int p = 0; p < kPoints; ++p) {
      auto r = grad_check([a](Tape<double>& t, const std::vector<Var>& v) { return ops::activation(t, a, v[0]); },
                          {random_tensor({3, 4}, rng, -2, 2)}, rng);
      EXPECT_LE(r.max_rel_error, kGradTol) << to_string(a);
    }
  }
}

TEST(MaxPool, HandCase) {
  Tape<double> t;
  auto res = ops::maxpool_time(t, t.constant(mat(2, 3, {1, -2, 3, 0, 5, -1})));
  EXPECT_EQ(t.value(res.out), vec({3, 5}));
  EXPECT_EQ(res.argmax, (std::vector<std::size_t>{2, 1}));
}

TEST(MaxPool, SingleColumnIsIdentity) {
  Tape<double> t;
  auto res = ops::maxpool_time(t, t.constant(mat(3, 1, {4, -1, 2})));
  EXPECT_EQ(t.value(res.out), vec({4, -1, 2}));
  EXPECT_EQ(res.argmax, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(MaxPool, TiesGoToLowestIndexAndGradientRoutesToWinner) {
  Tape<double> t;
  Var x = t.leaf(mat(1, 3, {2, 2, 1}));
  auto res = ops::maxpool_time(t, x);
  EXPECT_EQ(res.argmax[0], 0u);
  auto g = t.backward(res.out, vec({1}));
  EXPECT_EQ(g.at(x), mat(1, 3, {1, 0, 0}));
}

TEST(MaxPool, EmptySequenceThrows) {
  Tape<double> t;
  EXPECT_THROW(ops::maxpool_time(t, t.constant(Tensor<double>({2, 0}))), EmptySequenceError);
}

TEST(MaxPool, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::maxpool_time(t, v[0]).out; },
                        {random_tensor({4, 6}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, 1e-6);
  }
}

TEST(Elementwise, HandValues) {
  Tape<double> t;
  EXPECT_EQ(t.value(ops::elementwise(t, Elementwise::kMul, t.constant(vec({1, 2})), t.constant(vec({3, 4})))),
            vec({3, 8}));
  EXPECT_EQ(t.value(ops::elementwise(t, Elementwise::kAdd, t.constant(vec({1, 2})), t.constant(vec({0, 0})))),
            vec({1, 2}));
  EXPECT_THROW(ops::elementwise(t, Elementwise::kAdd, t.constant(vec({1, 2})), t.constant(vec({1}))),
               DimensionError);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(15);
  for (Elementwise k : {Elementwise::kMul, Elementwise::kAdd}) {
    for (int p = 0; p < kPoints; ++p) {
      auto r = grad_check([k](Tape<double>& t, const std::vector<Var>& v) { return ops::elementwise(t, k, v[0], v[1]); },
                          {random_tensor({3, 5}, rng), random_tensor({3, 5}, rng)}, rng);
      EXPECT_LE(r.max_rel_error, 1e-6);
    }
  }
}

TEST(ConcatColumns, StacksVectorsAndSplitsGradient) {
  std::mt19937_64 rng(16);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::concat_columns(t, std::span<const Var>(v)); },
                        {random_tensor({4}, rng), random_tensor({4}, rng), random_tensor({4}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, 1e-6);
  }
}

TEST(ClassifierFeatures, HandConstruction) {
  Tape<double> t;
  Var f = ops::classifier_features(t, t.constant(vec({1, 2})), t.constant(vec({3, 1})));
  EXPECT_EQ(t.value(f), vec({1, 2, 3, 1, 3, 2, 2, 1}));
}

TEST(ClassifierFeatures, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check(
        [](Tape<double>& t, const std::vector<Var>& v) { return ops::classifier_features(t, v[0], v[1]); },
        {random_tensor({5}, rng), random_tensor({5}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, kGradTol);
  }
}

TEST(CosineScores, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(18);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::cosine_scores(t, v[0], v[1]); },
                        {random_tensor({4, 3}, rng), random_tensor({4, 5}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, kGradTol);
  }
}

TEST(RankerLoss, GradientMatchesFiniteDifferencesAwayFromKinks) {
  std::mt19937_64 rng(19);
  std::size_t checked = 0, skipped = 0;
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check([](Tape<double>& t, const std::vector<Var>& v) { return ops::ranker_loss(t, v[0], 0.2); },
                        {random_tensor({4, 4}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, kGradTol);
    checked += r.checked;
    skipped += r.skipped;
  }
  EXPECT_GT(checked, 9 * skipped);
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(20);
  const std::vector<std::size_t> labels{0, 2, 1, 2};
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check(
        [&](Tape<double>& t, const std::vector<Var>& v) { return ops::softmax_cross_entropy(t, v[0], labels); },
        {random_tensor({3, 4}, rng, -3, 3)}, rng);
    EXPECT_LE(r.max_rel_error, kGradTol);
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRangeThrows) {
  Tape<double> t;
  const std::vector<std::size_t> labels{3};
  EXPECT_THROW(ops::softmax_cross_entropy(t, t.constant(mat(3, 1, {0, 0, 0})), labels), DimensionError);
}

TEST(Tape, BackwardOnEmptyTapeIsStateError) {
  Tape<double> t;
  EXPECT_THROW(t.backward(Var{0}, vec({1})), StateError);
}

TEST(Tape, SeedShapeMustMatchOutput) {
  Tape<double> t;
  Var x = t.leaf(vec({1, 2}));
  EXPECT_THROW(t.backward(x, vec({1})), DimensionError);
}

TEST(Tape, NonFiniteLeafIsNumericError) {
  Tape<double> t;
  EXPECT_THROW(t.leaf(vec({1, std::nan("")})), NumericError);
}

TEST(Tape, ComposedLinearReluMaxpoolMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int p = 0; p < kPoints; ++p) {
    auto r = grad_check(
        [](Tape<double>& t, const std::vector<Var>& v) {
          return ops::maxpool_time(t, ops::activation(t, Activation::kRelu, ops::linear(t, v[0], v[1], v[2]))).out;
        },
        {random_tensor({3, 4}, rng), random_tensor({3}, rng), random_tensor({4, 5}, rng)}, rng);
    EXPECT_LE(r.max_rel_error, kGradTol);
  }
}

TEST(Tape, BackwardIsLinearInTheSeed) {
  std::mt19937_64 rng(22);
  Tape<double> t;
  Var w = t.leaf(random_tensor({3, 4}, rng));
  Var b = t.leaf(random_tensor({3}, rng));
  Var x = t.leaf(random_tensor({4, 5}, rng));
  Var y = ops::maxpool_time(t, ops::activation(t, Activation::kTanh, ops::linear(t, w, b, x))).out;
  const Tensor<double> seed = random_tensor({3}, rng);
  Tensor<double> seed2 = seed;
  for (double& v : seed2.data()) v *= 2.0;
  const auto g1 = t.backward(y, seed);
  const auto g2 = t.backward(y, seed2);
  for (Var v : {w, b, x}) {
    for (std::size_t i = 0; i < g1.at(v).size(); ++i) EXPECT_EQ(g2.at(v)[i], 2.0 * g1.at(v)[i]);
  }
}

TEST(Tape, ForwardIsBitDeterministic) {
  std::mt19937_64 rng(23);
  const Tensor<float> w = testing::random_tensor_f({8, 6}, rng), b = testing::random_tensor_f({8}, rng),
                      x = testing::random_tensor_f({6, 9}, rng);
  auto run = [&] {
    Tape<float> t;
    return t.value(ops::linear(t, t.constant(w), t.constant(b), t.constant(x)));
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, FrozenInputsReceiveNoGradientSlot) {
  Tape<double> t;
  Var w = t.leaf(mat(1, 2, {1, 1}));
  Var b = t.leaf(vec({0}));
  Var e = t.constant(mat(2, 1, {2, 3}));
  Var y = ops::linear(t, w, b, e);
  auto g = t.backward(y, mat(1, 1, {1}));
  EXPECT_TRUE(g.has(w));
  EXPECT_FALSE(g.has(e));
}

}  // namespace
}  // namespace lens
