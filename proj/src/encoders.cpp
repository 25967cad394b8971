#include "lens/encoders.hpp"

#include <cmath>
#include <exception>
#include <random>
#include <thread>

namespace lens {

const char* to_string(Activation act) noexcept {
  switch (act) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

const char* to_string(LensKind kind) noexcept {
  switch (kind) {
    case LensKind::kMeanPool:
      return "meanpool";
    case LensKind::kSimple:
      return "simple";
    case LensKind::kGatedConv:
      return "gatedconv";
  }
  return "unknown";
}

LensKind parse_lens_kind(const std::string& name) {
  if (name == "meanpool") return LensKind::kMeanPool;
  if (name == "simple") return LensKind::kSimple;
  if (name == "gatedconv") return LensKind::kGatedConv;
  throw ConfigError("unknown encoder '" + name + "' (expected meanpool, simple or gatedconv)");
}

// ---------------------------------------------------------------------------
// Validation

template <class T>
void SimpleLensT<T>::validate() const {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(0) || weight.dim(0) == 0) {
    throw DimensionError("simple lens: weight " + shape_string(weight.shape()) + ", bias " +
                         shape_string(bias.shape()));
  }
  if (!weight.all_finite() || !bias.all_finite()) throw NumericError("simple lens: non-finite parameter");
}

template <class T>
void GatedConvLensT<T>::validate() const {
  const std::size_t layers = encoder_weights.size();
  auto fail = [](const std::string& m) { throw DimensionError("gatedconv lens: " + m); };
  if (layers < 2) fail("depth M must be >= 1");
  if (encoder_biases.size() != layers || controller_weights.size() != layers ||
      controller_biases.size() != layers) {
    fail("encoder and controller stacks must have the same number of layers");
  }
  for (std::size_t i = 0; i < layers; ++i) {
    if (encoder_weights[i].shape() != controller_weights[i].shape() ||
        encoder_biases[i].shape() != controller_biases[i].shape()) {
      fail("encoder and controller layer " + std::to_string(i) + " shapes differ");
    }
  }
  const auto& w0 = encoder_weights[0];
  if (w0.rank() != 2) fail("layer 0 must be a G x K matrix");
  const std::size_t G = w0.dim(0);
  for (std::size_t i = 0; i < layers; ++i) {
    const auto& w = encoder_weights[i];
    if (encoder_biases[i].shape() != Shape{G}) fail("bias " + std::to_string(i) + " must have length G");
    if (i > 0) {
      if (w.rank() != 3 || w.dim(0) != G || w.dim(1) != G) fail("conv layer must be G x G x width");
      if (w.dim(2) % 2 == 0) throw ConfigError("gatedconv lens: kernel width must be odd");
      if (w.dim(2) != encoder_weights[1].dim(2)) fail("all conv layers must share the kernel width");
    }
  }
  if (fusion_weight.rank() != 2 || fusion_weight.dim(1) != G || fusion_bias.shape() != Shape{fusion_weight.dim(0)}) {
    fail("fusion must be D x G with a length-D bias");
  }
  auto finite = [](const std::vector<Tensor<T>>& ts) {
    for (const auto& t : ts)
      if (!t.all_finite()) return false;
    return true;
  };
  if (!finite(encoder_weights) || !finite(encoder_biases) || !finite(controller_weights) ||
      !finite(controller_biases) || !fusion_weight.all_finite() || !fusion_bias.all_finite()) {
    throw NumericError("gatedconv lens: non-finite parameter");
  }
}

// ---------------------------------------------------------------------------
// LensParametersT

template <class T>
std::size_t LensParametersT<T>::output_dim(std::size_t in) const {
  switch (kind()) {
    case LensKind::kMeanPool:
      return in;
    case LensKind::kSimple:
      return std::get<SimpleLensT<T>>(lens).output_dim();
    case LensKind::kGatedConv:
      return std::get<GatedConvLensT<T>>(lens).output_dim();
  }
  return 0;
}

template <class T>
std::size_t LensParametersT<T>::input_dim() const {
  switch (kind()) {
    case LensKind::kMeanPool:
      return 0;
    case LensKind::kSimple:
      return std::get<SimpleLensT<T>>(lens).input_dim();
    case LensKind::kGatedConv:
      return std::get<GatedConvLensT<T>>(lens).input_dim();
  }
  return 0;
}

template <class T>
std::vector<Tensor<T>*> LensParametersT<T>::parameters() {
  std::vector<Tensor<T>*> out;
  if (auto* s = std::get_if<SimpleLensT<T>>(&lens)) {
    out = {&s->weight, &s->bias};
  } else if (auto* g = std::get_if<GatedConvLensT<T>>(&lens)) {
    for (std::size_t i = 0; i < g->encoder_weights.size(); ++i) {
      out.push_back(&g->encoder_weights[i]);
      out.push_back(&g->encoder_biases[i]);
    }
    for (std::size_t i = 0; i < g->controller_weights.size(); ++i) {
      out.push_back(&g->controller_weights[i]);
      out.push_back(&g->controller_biases[i]);
    }
    out.push_back(&g->fusion_weight);
    out.push_back(&g->fusion_bias);
  }
  return out;
}

template <class T>
std::vector<const Tensor<T>*> LensParametersT<T>::parameters() const {
  auto mut = const_cast<LensParametersT*>(this)->parameters();
  return std::vector<const Tensor<T>*>(mut.begin(), mut.end());
}

template <class T>
void LensParametersT<T>::validate() const {
  std::visit(
      [](const auto& l) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, MeanPool>) l.validate();
      },
      lens);
}

template <class T>
template <class U>
LensParametersT<U> LensParametersT<T>::cast() const {
  LensParametersT<U> out;
  if (const auto* s = std::get_if<SimpleLensT<T>>(&lens)) {
    out.lens = SimpleLensT<U>{s->weight.template cast<U>(), s->bias.template cast<U>(), s->activation};
  } else if (const auto* g = std::get_if<GatedConvLensT<T>>(&lens)) {
    auto conv = [](const std::vector<Tensor<T>>& ts) {
      std::vector<Tensor<U>> r;
      for (const auto& t : ts) r.push_back(t.template cast<U>());
      return r;
    };
    out.lens = GatedConvLensT<U>{conv(g->encoder_weights),      conv(g->encoder_biases),
                                 conv(g->controller_weights),   conv(g->controller_biases),
                                 g->fusion_weight.template cast<U>(), g->fusion_bias.template cast<U>(),
                                 g->fusion_activation};
  } else {
    out.lens = MeanPool{};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialisation

namespace {

Tensor<float> glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<float> t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(dist(rng));
  return t;
}

}  // namespace

SimpleLens init_simple(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                       Activation activation) {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("simple lens dims must be >= 1");
  std::mt19937_64 rng(seed);
  SimpleLens lens;
  lens.weight = glorot({output_dim, input_dim}, input_dim, output_dim, rng);
  lens.bias = Tensor<float>({output_dim});
  lens.activation = activation;
  return lens;
}

GatedConvLens init_gatedconv(std::size_t input_dim, std::size_t output_dim, std::size_t gate_size,
                             std::size_t depth, std::size_t width, std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0 || gate_size == 0) throw ConfigError("gatedconv dims must be >= 1");
  if (depth < 1) throw ConfigError("gatedconv depth must be >= 1");
  if (width % 2 == 0) throw ConfigError("gatedconv kernel width must be odd");
  std::mt19937_64 rng(seed);
  GatedConvLens lens;
  auto stack = [&](std::vector<Tensor<float>>& ws, std::vector<Tensor<float>>& bs) {
    ws.push_back(glorot({gate_size, input_dim}, input_dim, gate_size, rng));
    bs.emplace_back(Shape{gate_size});
    for (std::size_t i = 1; i <= depth; ++i) {
      ws.push_back(glorot({gate_size, gate_size, width}, gate_size * width, gate_size * width, rng));
      bs.emplace_back(Shape{gate_size});
    }
  };
  stack(lens.encoder_weights, lens.encoder_biases);
  stack(lens.controller_weights, lens.controller_biases);
  lens.fusion_weight = glorot({output_dim, gate_size}, gate_size, output_dim, rng);
  lens.fusion_bias = Tensor<float>({output_dim});
  return lens;
}

// ---------------------------------------------------------------------------
// Tape encoding

namespace {

// Layout of BoundLens::params for GatedConv: (w, b) pairs for the encoder
// stack, then the controller stack, then fusion (w, b).
struct GatedLayout {
  std::size_t layers;
  std::size_t enc_w(std::size_t i) const { return 2 * i; }
  std::size_t enc_b(std::size_t i) const { return 2 * i + 1; }
  std::size_t ctl_w(std::size_t i) const { return 2 * (layers + i); }
  std::size_t ctl_b(std::size_t i) const { return 2 * (layers + i) + 1; }
  std::size_t fus_w() const { return 4 * layers; }
  std::size_t fus_b() const { return 4 * layers + 1; }
};

template <class T>
Var meanpool_on_tape(Tape<T>& tape, Var e) {
  const Tensor<T>& E = tape.value(e);
  if (E.rank() != 2) throw DimensionError("meanpool: input must be K x T");
  const std::size_t K = E.dim(0), len = E.dim(1);
  if (len == 0) throw EmptySequenceError("meanpool: sequence has no time steps");
  Tensor<T> out({K});
  for (std::size_t k = 0; k < K; ++k) {
    T acc{0};
    for (T v : E.row(k)) acc += v;
    out[k] = acc / static_cast<T>(len);
  }
  return tape.record("meanpool", std::move(out), {e},
                     [e, K, len](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       Tensor<T>& ge = grads.slot(e, tp.value(e).shape());
                       for (std::size_t k = 0; k < K; ++k)
                         for (std::size_t t = 0; t < len; ++t) ge(k, t) += g[k] / static_cast<T>(len);
                     });
}

}  // namespace

template <class T>
BoundLens bind_lens(Tape<T>& tape, const LensParametersT<T>& lens, bool trainable) {
  lens.validate();
  BoundLens bound;
  bound.kind = lens.kind();
  for (const Tensor<T>* p : lens.parameters()) bound.params.push_back(tape.leaf(*p, trainable));
  if (const auto* g = std::get_if<GatedConvLensT<T>>(&lens.lens)) {
    bound.activation = g->fusion_activation;
  } else if (const auto* s = std::get_if<SimpleLensT<T>>(&lens.lens)) {
    bound.activation = s->activation;
  }
  return bound;
}

template <class T>
Var encode_on_tape(Tape<T>& tape, const BoundLens& bound, Var e) {
  const Tensor<T>& E = tape.value(e);
  if (E.rank() != 2) throw DimensionError("encode: embeddings must be K x T");
  if (E.dim(1) == 0) throw EmptySequenceError("encode: sequence has no time steps");
  switch (bound.kind) {
    case LensKind::kMeanPool:
      return meanpool_on_tape(tape, e);
    case LensKind::kSimple: {
      Var f = ops::activation(tape, bound.activation, ops::linear(tape, bound.params[0], bound.params[1], e));
      return ops::maxpool_time(tape, f).out;
    }
    case LensKind::kGatedConv: {
      const GatedLayout at{(bound.params.size() - 2) / 4};
      const std::size_t M = at.layers - 1;
      const auto& p = bound.params;
      Var h = ops::activation(tape, Activation::kRelu, ops::linear(tape, p[at.enc_w(0)], p[at.enc_b(0)], e));
      Var g0 = ops::activation(tape, Activation::kRelu, ops::linear(tape, p[at.ctl_w(0)], p[at.ctl_b(0)], e));
      Var g = g0;
      for (std::size_t i = 1; i <= M; ++i) {
        h = ops::activation(tape, i == M ? Activation::kTanh : Activation::kRelu,
                            ops::conv1d_same(tape, p[at.enc_w(i)], p[at.enc_b(i)], h));
        g = ops::activation(tape, i == M ? Activation::kSigmoid : Activation::kRelu,
                            ops::conv1d_same(tape, p[at.ctl_w(i)], p[at.ctl_b(i)], g));
      }
      Var fused = ops::elementwise(tape, Elementwise::kAdd, ops::elementwise(tape, Elementwise::kMul, h, g), g0);
      Var f = ops::activation(tape, bound.activation, ops::linear(tape, p[at.fus_w()], p[at.fus_b()], fused));
      return ops::maxpool_time(tape, f).out;
    }
  }
  throw ConfigError("unknown lens kind");
}

template <class T>
std::vector<T> encode(const Tensor<T>& e, const LensParametersT<T>& lens) {
  if (const std::size_t K = lens.input_dim(); K != 0 && (e.rank() != 2 || e.dim(0) != K)) {
    throw DimensionError("encode: embeddings " + shape_string(e.shape()) + " but lens expects K=" +
                         std::to_string(K));
  }
  Tape<T> tape;
  const BoundLens bound = bind_lens(tape, lens, false);
  Var s = encode_on_tape(tape, bound, tape.constant(e));
  return tape.value(s).values();
}

template <class T>
std::vector<T> encode_meanpool(const Tensor<T>& e) {
  return encode(e, LensParametersT<T>{MeanPool{}});
}

template <class T>
std::vector<T> encode_simple(const Tensor<T>& e, const SimpleLensT<T>& lens) {
  return encode(e, LensParametersT<T>{lens});
}

template <class T>
std::vector<T> encode_gatedconv(const Tensor<T>& e, const GatedConvLensT<T>& lens) {
  return encode(e, LensParametersT<T>{lens});
}

VectorSet batch_encode(const EmbeddingCorpus& corpus, const LensParameters& lens, std::size_t threads) {
  lens.validate();
  const std::size_t K = corpus.dim();
  if (lens.input_dim() != 0 && !corpus.empty() && lens.input_dim() != K) {
    throw DimensionError("batch_encode: corpus K=" + std::to_string(K) + " but lens expects K=" +
                         std::to_string(lens.input_dim()));
  }
  const std::size_t D = lens.output_dim(K);
  const std::size_t N = corpus.size();
  std::vector<float> data(N * D);
  std::vector<std::uint64_t> ids(N);
  threads = std::max<std::size_t>(1, std::min(threads, N));

  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t worker) {
    const std::size_t lo = N * worker / threads, hi = N * (worker + 1) / threads;
    Tape<float> tape;
    const BoundLens bound = bind_lens(tape, lens, false);
    const std::size_t mark = tape.size();
    for (std::size_t i = lo; i < hi; ++i) {
      const EmbeddingRecord& r = corpus[i];
      try {
        Var s = encode_on_tape(tape, bound, tape.constant(r.embeddings));
        const auto v = tape.value(s).data();
        std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(i * D));
        ids[i] = r.id;
        tape.truncate(mark);
      } catch (const Error& err) {
        errors[worker] = std::make_exception_ptr(
            Error(err.kind(), "record id " + std::to_string(r.id) + ": " + err.what()));
        return;
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return VectorSet(D, std::move(ids), std::move(data));
}

#define LENS_INSTANTIATE(T)                                                                   \
  template struct SimpleLensT<T>;                                                             \
  template struct GatedConvLensT<T>;                                                          \
  template struct LensParametersT<T>;                                                         \
  template BoundLens bind_lens<T>(Tape<T>&, const LensParametersT<T>&, bool);                 \
  template Var encode_on_tape<T>(Tape<T>&, const BoundLens&, Var);                            \
  template std::vector<T> encode<T>(const Tensor<T>&, const LensParametersT<T>&);             \
  template std::vector<T> encode_meanpool<T>(const Tensor<T>&);                               \
  template std::vector<T> encode_simple<T>(const Tensor<T>&, const SimpleLensT<T>&);          \
  template std::vector<T> encode_gatedconv<T>(const Tensor<T>&, const GatedConvLensT<T>&);

LENS_INSTANTIATE(float)
LENS_INSTANTIATE(double)
#undef LENS_INSTANTIATE

template LensParametersT<double> LensParametersT<float>::cast<double>() const;
template LensParametersT<float> LensParametersT<double>::cast<float>() const;
template LensParametersT<float> LensParametersT<float>::cast<float>() const;

}  // namespace lens
