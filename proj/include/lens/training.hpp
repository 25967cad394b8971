#pragma once

// Lens training from relatedness lists: a Siamese classifier over
// concat(u, v, u*v, |u-v|) or an in-batch VSE++ ranker over cosine scores,
// optimised with Adam under an inverse-square-root warmup schedule.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lens/corpus.hpp"
#include "lens/encoders.hpp"

namespace lens {

enum class TrainModule : std::uint32_t { kClassifier = 0, kRanker = 1 };

const char* to_string(TrainModule module) noexcept;
TrainModule parse_train_module(const std::string& name);

/// Hyperparameter grid searched at random.
struct SearchSpace {
  std::vector<std::size_t> batch_size{128, 256, 512};
  std::vector<std::size_t> warmup{1000, 2000, 4000, 8000, 16000};
  std::vector<double> dropout{0.0, 0.1, 0.2};
  std::vector<std::size_t> gate_size{128, 256, 512};
  std::vector<std::size_t> hidden{256, 512, 1024};
  std::vector<double> margin{0.1, 0.2, 0.3};
};

struct TrainConfig {
  TrainModule module = TrainModule::kRanker;
  LensKind lens = LensKind::kSimple;
  Activation activation = Activation::kRelu;  // Simple phi / GatedConv fusion
  std::size_t output_dim = 256;

  std::size_t batch_size = 128;
  std::size_t warmup = 1000;
  double dropout = 0.0;
  std::size_t gate_size = 128;
  std::size_t hidden = 256;
  double margin = 0.2;

  std::size_t depth = 2;  // GatedConv M
  std::size_t width = 3;  // GatedConv kernel width

  std::size_t max_steps = 2000;
  std::size_t eval_every = 500;
  std::size_t patience = 5;
  bool single_pass = false;
  std::uint64_t seed = 1;

  void validate() const;
  /// True when every searched field lies in `space`.
  bool in_grid(const SearchSpace& space = {}) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

template <class T>
struct ClassifierHeadT {
  Tensor<T> w1, b1;  // hidden x 4D, hidden
  Tensor<T> w2, b2;  // C x hidden, C

  std::size_t input_dim() const { return w1.dim(1); }
  std::size_t hidden() const { return w1.dim(0); }
  std::size_t classes() const { return w2.dim(0); }
  std::vector<Tensor<T>*> parameters() { return {&w1, &b1, &w2, &b2}; }
  std::vector<const Tensor<T>*> parameters() const { return {&w1, &b1, &w2, &b2}; }
  friend bool operator==(const ClassifierHeadT&, const ClassifierHeadT&) = default;
};

using ClassifierHead = ClassifierHeadT<float>;

ClassifierHead init_head(std::size_t lens_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed);

/// Records the two-layer head (relu hidden layer) on features [4D x B];
/// returns logits [C x B].
template <class T>
Var classifier_logits(Tape<T>& tape, std::span<const Var> head_params, Var features);

/// concat(u, v, u*v, |u-v|).
template <class T>
std::vector<T> classifier_features(std::span<const T> u, std::span<const T> v);

/// Mean softmax cross-entropy of a batch of (E_a, E_b, label) through a shared lens.
template <class T>
T classifier_loss(std::span<const Tensor<T>* const> a, std::span<const Tensor<T>* const> b,
                  std::span<const std::size_t> labels, const LensParametersT<T>& lens,
                  const ClassifierHeadT<T>& head);

/// VSE++ max-of-hinges over a B x B cosine matrix with positives on the diagonal.
template <class T>
T ranker_loss(const Tensor<T>& scores, T margin);

/// D^-0.5 * min(step^-0.5, step * warmup^-1.5).
double lr_schedule(std::size_t step, std::size_t warmup, std::size_t dim);

template <class T>
struct OptimizerStateT {
  std::vector<Tensor<T>> m, v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerState = OptimizerStateT<float>;

/// Bias-corrected Adam. Moments are created on the first call. A non-finite
/// gradient raises DivergenceError naming the tensor.
template <class T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads,
               OptimizerStateT<T>& state, double lr);

/// Held-out pairs used for model selection. Ids must not occur in training.
struct Validation {
  const EmbeddingCorpus* corpus = nullptr;
  RelatednessList pairs;
};

struct HistoryRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();  // mean over the interval
  double val_metric = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  LensParameters lens;
  std::optional<ClassifierHead> head;
  std::vector<HistoryRow> history;
  std::size_t best_step = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
};

/// Validation metric (lower is better): mean per-language-pair match error
/// for rank lists, 1 - accuracy for classify lists.
double validation_metric(const Validation& val, const LensParameters& lens, const ClassifierHead* head);

/// Trains a lens on `pairs` over the frozen `corpus`. Evaluates every
/// `eval_every` steps and returns the best checkpoint seen.
TrainResult train(const EmbeddingCorpus& corpus, const RelatednessList& pairs, const TrainConfig& cfg,
                  const Validation& validation);

struct SearchTrial {
  std::size_t trial = 0;
  TrainConfig config;
  double val_metric = 0.0;
  std::size_t best_step = 0;
};

struct SearchResult {
  TrainConfig best;
  TrainResult best_result;
  std::vector<SearchTrial> leaderboard;  // ascending validation metric
};

/// Samples `trials` configurations uniformly from `space` on top of `base`,
/// each trained for at most `budget` steps (0 keeps base.max_steps).
SearchResult random_search(const EmbeddingCorpus& corpus, const RelatednessList& pairs,
                           const Validation& validation, const TrainConfig& base, const SearchSpace& space,
                           std::size_t trials, std::size_t budget, std::uint64_t seed);

}  // namespace lens
