#include "lens/training.hpp"

#include "lens/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace lens {
namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                    0x7472u};
  return std::mt19937_64(seq);
}

Tensor<float> glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<float> t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(dist(rng));
  return t;
}

template <class T>
bool contains(const std::vector<T>& values, T x) {
  return std::find(values.begin(), values.end(), x) != values.end();
}

// Cosine with the training-loss norm floor, used when a dead (all-zero)
// vector would make the exact cosine undefined.
SimilarityMatrix floored_cosine(const VectorSet& a, const VectorSet& b) {
  auto unit = [](const VectorSet& v) {
    std::vector<float> out(v.data().begin(), v.data().end());
    const std::size_t D = v.dim();
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto row = std::span<float>(out).subspan(i * D, D);
      double sq = 0.0;
      for (float x : row) sq += static_cast<double>(x) * x;
      const double inv = 1.0 / std::max(std::sqrt(sq), 1e-6);
      for (float& x : row) x = static_cast<float>(x * inv);
    }
    return out;
  };
  const std::vector<float> ua = unit(a), ub = unit(b);
  std::vector<float> values(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    simd::kernels().dot_rows(ua.data() + i * a.dim(), ub.data(), b.size(), a.dim(), values.data() + i * b.size());
  return SimilarityMatrix::from_values(a.size(), b.size(), std::move(values));
}

double rank_metric(const Validation& val, const VectorSet& enc) {
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < enc.size(); ++i) row_of.emplace(enc.ids()[i], i);
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
      groups;
  for (const PairEntry& p : val.pairs.entries) {
    auto& g = groups[{val.corpus->at_id(p.a).lang, val.corpus->at_id(p.b).lang}];
    g.first.push_back(row_of.at(p.a));
    g.second.push_back(row_of.at(p.b));
  }
  double total = 0.0;
  for (const auto& [langs, rows] : groups) {
    const VectorSet src = enc.select(rows.first), tgt = enc.select(rows.second);
    SimilarityMatrix s;
    try {
      s = cosine_matrix(src, tgt);
    } catch (const NumericError&) {
      s = floored_cosine(src, tgt);
    }
    std::vector<std::size_t> gold(src.size());
    std::iota(gold.begin(), gold.end(), 0);
    total += match_error(s, gold);
  }
  return total / static_cast<double>(groups.size());
}

double classify_metric(const Validation& val, const VectorSet& enc, const ClassifierHead& head) {
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  for (std::size_t i = 0; i < enc.size(); ++i) row_of.emplace(enc.ids()[i], i);
  Tape<float> tape;
  std::vector<Var> hp;
  for (const Tensor<float>* p : head.parameters()) hp.push_back(tape.constant(*p));
  const std::size_t mark = tape.size();
  std::size_t correct = 0;
  for (const PairEntry& p : val.pairs.entries) {
    const auto feats = classifier_features<float>(enc.row(row_of.at(p.a)), enc.row(row_of.at(p.b)));
    Var x = tape.constant(Tensor<float>({feats.size(), 1}, feats));
    const Tensor<float>& z = tape.value(classifier_logits(tape, hp, x));
    std::size_t arg = 0;
    for (std::size_t c = 1; c < z.dim(0); ++c)
      if (z(c, 0) > z(arg, 0)) arg = c;
    if (static_cast<std::int32_t>(arg) == p.label) ++correct;
    tape.truncate(mark);
  }
  return 1.0 - static_cast<double>(correct) / static_cast<double>(val.pairs.size());
}

LensParameters init_lens(const TrainConfig& cfg, std::size_t K) {
  switch (cfg.lens) {
    case LensKind::kMeanPool:
      return LensParameters{MeanPool{}};
    case LensKind::kSimple:
      return LensParameters{init_simple(K, cfg.output_dim, cfg.seed, cfg.activation)};
    case LensKind::kGatedConv: {
      GatedConvLens g = init_gatedconv(K, cfg.output_dim, cfg.gate_size, cfg.depth, cfg.width, cfg.seed);
      g.fusion_activation = cfg.activation;
      return LensParameters{std::move(g)};
    }
  }
  throw ConfigError("unknown lens kind");
}

}  // namespace

const char* to_string(TrainModule module) noexcept {
  return module == TrainModule::kClassifier ? "classifier" : "ranker";
}

TrainModule parse_train_module(const std::string& name) {
  if (name == "classifier") return TrainModule::kClassifier;
  if (name == "ranker") return TrainModule::kRanker;
  throw ConfigError("unknown training module '" + name + "' (expected classifier or ranker)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (output_dim == 0) fail("output_dim must be >= 1");
  if (batch_size < (module == TrainModule::kRanker ? 2u : 1u)) fail("batch_size too small");
  if (warmup == 0) fail("warmup must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(margin >= 0.0) || !std::isfinite(margin)) fail("margin must be finite and >= 0");
  if (hidden == 0) fail("hidden must be >= 1");
  if (max_steps == 0) fail("max_steps must be >= 1");
  if (eval_every == 0) fail("eval_every must be >= 1");
  if (patience == 0) fail("patience must be >= 1");
  if (lens == LensKind::kGatedConv) {
    if (gate_size == 0 || depth == 0) fail("gatedconv needs gate_size >= 1 and depth >= 1");
    if (width % 2 == 0) fail("gatedconv width must be odd");
  }
}

bool TrainConfig::in_grid(const SearchSpace& s) const {
  return contains(s.batch_size, batch_size) && contains(s.warmup, warmup) && contains(s.dropout, dropout) &&
         contains(s.gate_size, gate_size) && contains(s.hidden, hidden) && contains(s.margin, margin);
}

ClassifierHead init_head(std::size_t lens_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  if (lens_dim == 0 || hidden == 0 || classes < 2) {
    throw ConfigError("classifier head needs D >= 1, hidden >= 1 and at least 2 classes");
  }
  auto rng = stream_rng(seed, 3);
  ClassifierHead h;
  h.w1 = glorot({hidden, 4 * lens_dim}, 4 * lens_dim, hidden, rng);
  h.b1 = Tensor<float>({hidden});
  h.w2 = glorot({classes, hidden}, hidden, classes, rng);
  h.b2 = Tensor<float>({classes});
  return h;
}

template <class T>
Var classifier_logits(Tape<T>& tape, std::span<const Var> head, Var features) {
  if (head.size() != 4) throw DimensionError("classifier head expects 4 parameter tensors");
  Var h = ops::activation(tape, Activation::kRelu, ops::linear(tape, head[0], head[1], features));
  return ops::linear(tape, head[2], head[3], h);
}

template <class T>
std::vector<T> classifier_features(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw DimensionError("classifier_features: lengths " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
  }
  const std::size_t D = u.size();
  std::vector<T> out(4 * D);
  for (std::size_t d = 0; d < D; ++d) {
    out[d] = u[d];
    out[D + d] = v[d];
    out[2 * D + d] = u[d] * v[d];
    out[3 * D + d] = std::abs(u[d] - v[d]);
  }
  return out;
}

template <class T>
T classifier_loss(std::span<const Tensor<T>* const> a, std::span<const Tensor<T>* const> b,
                  std::span<const std::size_t> labels, const LensParametersT<T>& lens,
                  const ClassifierHeadT<T>& head) {
  if (a.size() != b.size() || a.size() != labels.size()) {
    throw DimensionError("classifier_loss: batch sides differ in length");
  }
  if (a.empty()) throw EmptySequenceError("classifier_loss: empty batch");
  Tape<T> tape;
  const BoundLens bound = bind_lens(tape, lens, false);
  std::vector<Var> hp;
  for (const Tensor<T>* p : head.parameters()) hp.push_back(tape.constant(*p));
  std::vector<Var> feats;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Var u = encode_on_tape(tape, bound, tape.constant(*a[i]));
    Var v = encode_on_tape(tape, bound, tape.constant(*b[i]));
    feats.push_back(ops::classifier_features(tape, u, v));
  }
  Var z = classifier_logits(tape, hp, ops::concat_columns(tape, std::span<const Var>(feats)));
  return tape.value(ops::softmax_cross_entropy(tape, z, labels))[0];
}

template <class T>
T ranker_loss(const Tensor<T>& scores, T margin) {
  Tape<T> tape;
  return tape.value(ops::ranker_loss(tape, tape.constant(scores), margin))[0];
}

double lr_schedule(std::size_t step, std::size_t warmup, std::size_t dim) {
  if (warmup == 0) throw ConfigError("lr schedule: warmup must be >= 1");
  if (step == 0) throw ConfigError("lr schedule: step must be >= 1");
  if (dim == 0) throw ConfigError("lr schedule: dimension must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return std::pow(static_cast<double>(dim), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

template <class T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads, OptimizerStateT<T>& st,
               double lr) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter and gradient counts differ");
  if (st.m.empty()) {
    for (const Tensor<T>* p : params) {
      st.m.emplace_back(p->shape());
      st.v.emplace_back(p->shape());
    }
  }
  if (st.m.size() != params.size()) throw StateError("adam: optimizer state built for other parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape() || st.m[i].shape() != params[i]->shape()) {
      throw DimensionError("adam: tensor " + std::to_string(i) + " shape " +
                           shape_string(params[i]->shape()) + " vs gradient " + shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw DivergenceError("adam: non-finite gradient in parameter tensor " + std::to_string(i) + " " +
                            shape_string(grads[i].shape()) + " at step " + std::to_string(st.step + 1));
    }
  }
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = st.m[i].data();
    auto v = st.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = st.beta1 * m[k] + (1.0 - st.beta1) * gk;
      const double vk = st.beta2 * v[k] + (1.0 - st.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + st.eps));
    }
  }
}

double validation_metric(const Validation& val, const LensParameters& lens, const ClassifierHead* head) {
  if (val.corpus == nullptr || val.pairs.entries.empty()) throw ConfigError("validation set is empty");
  const VectorSet enc = batch_encode(*val.corpus, lens, 1);
  if (val.pairs.mode == PairMode::kRank) return rank_metric(val, enc);
  if (head == nullptr) return std::numeric_limits<double>::quiet_NaN();
  return classify_metric(val, enc, *head);
}

TrainResult train(const EmbeddingCorpus& corpus, const RelatednessList& pairs, const TrainConfig& cfg,
                  const Validation& validation) {
  cfg.validate();
  if (pairs.entries.empty()) throw EmptySequenceError("train: relatedness list is empty");
  const bool ranker = cfg.module == TrainModule::kRanker;
  if ((pairs.mode == PairMode::kRank) != ranker) {
    throw ConfigError(std::string("train: ") + to_string(cfg.module) + " needs a " +
                      (ranker ? "rank" : "classify") + "-mode list");
  }
  bind_pairs(pairs, corpus, "<train pairs>");
  if (validation.corpus == nullptr || validation.pairs.entries.empty()) {
    throw ConfigError("train: a non-empty validation set is required");
  }
  if (validation.pairs.mode != pairs.mode) throw ConfigError("train: validation list mode differs");
  bind_pairs(validation.pairs, *validation.corpus, "<validation pairs>");
  {
    std::unordered_set<std::uint64_t> seen;
    for (const PairEntry& p : pairs.entries) {
      seen.insert(p.a);
      seen.insert(p.b);
    }
    for (const PairEntry& p : validation.pairs.entries) {
      if (seen.contains(p.a) || seen.contains(p.b)) {
        throw ConfigError("train: validation pair on line " + std::to_string(p.line) +
                          " reuses a training id (" + std::to_string(seen.contains(p.a) ? p.a : p.b) + ")");
      }
    }
  }

  const std::size_t K = corpus.dim();
  TrainResult result;
  result.lens = init_lens(cfg, K);
  std::optional<ClassifierHead> head;
  if (!ranker && cfg.lens != LensKind::kMeanPool) {
    head = init_head(result.lens.output_dim(K), cfg.hidden, pairs.num_classes(), cfg.seed);
  }

  result.best_metric = validation_metric(validation, result.lens, head ? &*head : nullptr);
  result.history.push_back({0, 0.0, std::numeric_limits<double>::quiet_NaN(), result.best_metric});
  result.head = head;
  if (cfg.lens == LensKind::kMeanPool) return result;

  LensParameters lens = result.lens;
  std::vector<Tensor<float>*> params = lens.parameters();
  if (head) {
    for (Tensor<float>* p : head->parameters()) params.push_back(p);
  }
  OptimizerState opt;

  const std::size_t n = pairs.size();
  const std::size_t B = std::min(cfg.batch_size, n);
  if (ranker && B < 2) throw ConfigError("train: ranker needs at least 2 training pairs");
  const std::size_t per_epoch = n / B;
  const std::size_t max_steps = cfg.single_pass ? std::min(cfg.max_steps, per_epoch) : cfg.max_steps;

  auto shuffle_rng = stream_rng(cfg.seed, 1);
  auto drop_rng = stream_rng(cfg.seed, 2);
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const float keep_scale = static_cast<float>(1.0 / (1.0 - cfg.dropout));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::size_t pos = 0;

  auto embed = [&](Tape<float>& tape, std::uint64_t id) {
    const Tensor<float>& e = corpus.at_id(id).embeddings;
    if (cfg.dropout == 0.0) return tape.constant(e);
    Tensor<float> dropped = e;
    for (float& x : dropped.data()) x = keep(drop_rng) ? x * keep_scale : 0.0f;
    return tape.constant(std::move(dropped));
  };

  std::vector<std::size_t> labels(B);
  double loss_sum = 0.0;
  std::size_t loss_count = 0, bad_evals = 0;
  for (std::size_t step = 1; step <= max_steps; ++step) {
    if (pos + B > n) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      pos = 0;
    }
    Tape<float> tape;
    const BoundLens bound = bind_lens(tape, lens, true);
    std::vector<Var> hp;
    if (head) {
      for (const Tensor<float>* p : head->parameters()) hp.push_back(tape.leaf(*p));
    }
    double loss_value = 0.0;
    Var loss;
    try {
      std::vector<Var> us, vs, feats;
      for (std::size_t k = 0; k < B; ++k) {
        const PairEntry& p = pairs.entries[order[pos + k]];
        Var u = encode_on_tape(tape, bound, embed(tape, p.a));
        Var v = encode_on_tape(tape, bound, embed(tape, p.b));
        if (ranker) {
          us.push_back(u);
          vs.push_back(v);
        } else {
          feats.push_back(ops::classifier_features(tape, u, v));
          labels[k] = static_cast<std::size_t>(p.label);
        }
      }
      if (ranker) {
        Var S = ops::cosine_scores(tape, ops::concat_columns(tape, std::span<const Var>(us)),
                                   ops::concat_columns(tape, std::span<const Var>(vs)));
        loss = ops::ranker_loss(tape, S, static_cast<float>(cfg.margin));
      } else {
        Var z = classifier_logits(tape, hp, ops::concat_columns(tape, std::span<const Var>(feats)));
        loss = ops::softmax_cross_entropy(tape, z, labels);
      }
      loss_value = tape.value(loss)[0];
    } catch (const NumericError& e) {
      throw DivergenceError("train: step " + std::to_string(step) + ": " + e.what());
    }
    pos += B;

    Gradients<float> grads = tape.backward(loss, Tensor<float>({1}, {1.0f}));
    std::vector<Tensor<float>> g;
    std::vector<Var> vars = bound.params;
    vars.insert(vars.end(), hp.begin(), hp.end());
    for (std::size_t i = 0; i < vars.size(); ++i) g.push_back(grads.get_or_zero(vars[i], params[i]->shape()));
    const double lr = lr_schedule(step, cfg.warmup, cfg.output_dim);
    adam_step<float>(params, g, opt, lr);
    loss_sum += loss_value;
    ++loss_count;

    if (step % cfg.eval_every == 0 || step == max_steps) {
      const double metric = validation_metric(validation, lens, head ? &*head : nullptr);
      result.history.push_back({step, lr, loss_sum / static_cast<double>(loss_count), metric});
      loss_sum = 0.0;
      loss_count = 0;
      if (metric < result.best_metric) {
        result.best_metric = metric;
        result.best_step = step;
        result.lens = lens;
        result.head = head;
        bad_evals = 0;
      } else if (++bad_evals >= cfg.patience) {
        result.steps = step;
        return result;
      }
    }
    result.steps = step;
  }
  return result;
}

SearchResult random_search(const EmbeddingCorpus& corpus, const RelatednessList& pairs,
                           const Validation& validation, const TrainConfig& base, const SearchSpace& space,
                           std::size_t trials, std::size_t budget, std::uint64_t seed) {
  if (trials == 0) throw ConfigError("random search: trials must be >= 1");
  auto rng = stream_rng(seed, 4);
  auto pick = [&rng](const auto& values) {
    if (values.empty()) throw ConfigError("random search: empty hyperparameter range");
    std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
    return values[d(rng)];
  };
  SearchResult out;
  bool have = false;
  for (std::size_t t = 0; t < trials; ++t) {
    TrainConfig cfg = base;
    cfg.batch_size = pick(space.batch_size);
    cfg.warmup = pick(space.warmup);
    cfg.dropout = pick(space.dropout);
    cfg.gate_size = pick(space.gate_size);
    cfg.hidden = pick(space.hidden);
    cfg.margin = pick(space.margin);
    if (budget > 0) cfg.max_steps = budget;
    TrainResult r = train(corpus, pairs, cfg, validation);
    out.leaderboard.push_back({t, cfg, r.best_metric, r.best_step});
    if (!have || r.best_metric < out.best_result.best_metric) {
      out.best = cfg;
      out.best_result = std::move(r);
      have = true;
    }
  }
  std::stable_sort(out.leaderboard.begin(), out.leaderboard.end(),
                   [](const SearchTrial& a, const SearchTrial& b) { return a.val_metric < b.val_metric; });
  return out;
}

#define LENS_INSTANTIATE(T)                                                                               \
  template Var classifier_logits<T>(Tape<T>&, std::span<const Var>, Var);                                \
  template std::vector<T> classifier_features<T>(std::span<const T>, std::span<const T>);                \
  template T classifier_loss<T>(std::span<const Tensor<T>* const>, std::span<const Tensor<T>* const>,    \
                                std::span<const std::size_t>, const LensParametersT<T>&,                 \
                                const ClassifierHeadT<T>&);                                              \
  template T ranker_loss<T>(const Tensor<T>&, T);                                                        \
  template void adam_step<T>(std::span<Tensor<T>* const>, std::span<const Tensor<T>>, OptimizerStateT<T>&, \
                             double);

LENS_INSTANTIATE(float)
LENS_INSTANTIATE(double)
#undef LENS_INSTANTIATE

}  // namespace lens
