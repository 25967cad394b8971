#pragma once

// Forward primitives with reverse-mode rules, recorded on a Tape. The first
// group (linear, conv1d_same, activation, maxpool_time, elementwise) is what
// the lens encoders are built from; the second group holds the fused
// loss-side composites used by training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lens/simd/kernels.hpp"
#include "lens/tape.hpp"

namespace lens {

enum class Activation : std::uint32_t { kRelu = 0, kTanh = 1, kSigmoid = 2 };

const char* to_string(Activation act) noexcept;
Activation parse_activation(const std::string& name);

enum class Elementwise { kMul, kAdd };

namespace ops {

namespace detail {

inline void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + shape_string(s));
  }
}

template <class T>
Tensor<T> transpose(const Tensor<T>& m) {
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = m(i, j);
  return out;
}

}  // namespace detail

/// Y[:,t] = W·X[:,t] + b for W [D×K], b [D], X [K×T].
template <class T>
Var linear(Tape<T>& tape, Var w, Var b, Var x) {
  const Tensor<T>& W = tape.value(w);
  const Tensor<T>& B = tape.value(b);
  const Tensor<T>& X = tape.value(x);
  detail::require_rank(W.shape(), 2, "linear", "weight");
  detail::require_rank(B.shape(), 1, "linear", "bias");
  detail::require_rank(X.shape(), 2, "linear", "input");
  const std::size_t D = W.dim(0), K = W.dim(1), T_ = X.dim(1);
  if (X.dim(0) != K || B.dim(0) != D) {
    throw DimensionError("linear: weight " + shape_string(W.shape()) + ", bias " +
                         shape_string(B.shape()) + ", input " + shape_string(X.shape()));
  }
  const Tensor<T> Xt = detail::transpose(X);
  Tensor<T> Y({D, T_});
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t t = 0; t < T_; ++t) Y(d, t) = B[d] + simd::dot(W.row(d), Xt.row(t));
  }
  return tape.record(
      "linear", std::move(Y), {w, b, x},
      [w, b, x, D, K, T_](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
        const Tensor<T>& W = tp.value(w);
        const Tensor<T>& X = tp.value(x);
        if (tp.requires_grad(w)) {
          const Tensor<T> Xt = detail::transpose(X);
          Tensor<T>& gw = grads.slot(w, W.shape());
          for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T_; ++t) simd::axpy(g(d, t), Xt.row(t), gw.row(d));
        }
        if (tp.requires_grad(b)) {
          Tensor<T>& gb = grads.slot(b, tp.value(b).shape());
          for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 0; t < T_; ++t) gb[d] += g(d, t);
        }
        if (tp.requires_grad(x)) {
          Tensor<T> gxt({T_, K});
          for (std::size_t t = 0; t < T_; ++t)
            for (std::size_t d = 0; d < D; ++d) simd::axpy(g(d, t), W.row(d), gxt.row(t));
          Tensor<T>& gx = grads.slot(x, X.shape());
          for (std::size_t k = 0; k < K; ++k)
            for (std::size_t t = 0; t < T_; ++t) gx(k, t) += gxt(t, k);
        }
      });
}

/// Centred 1-D convolution along time with zero padding (width-1)/2 on each
/// side. W [C_out×C_in×width], b [C_out], X [C_in×T] -> [C_out×T].
template <class T>
Var conv1d_same(Tape<T>& tape, Var w, Var b, Var x) {
  const Tensor<T>& W = tape.value(w);
  const Tensor<T>& B = tape.value(b);
  const Tensor<T>& X = tape.value(x);
  detail::require_rank(W.shape(), 3, "conv1d_same", "weight");
  detail::require_rank(B.shape(), 1, "conv1d_same", "bias");
  detail::require_rank(X.shape(), 2, "conv1d_same", "input");
  const std::size_t Co = W.dim(0), Ci = W.dim(1), width = W.dim(2), T_ = X.dim(1);
  if (width % 2 == 0) {
    throw ConfigError("conv1d_same: kernel width must be odd, got " + std::to_string(width));
  }
  if (X.dim(0) != Ci || B.dim(0) != Co) {
    throw DimensionError("conv1d_same: weight " + shape_string(W.shape()) + ", bias " +
                         shape_string(B.shape()) + ", input " + shape_string(X.shape()));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(width - 1) / 2;
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(T_);
  // Output columns [lo, hi) read input columns [lo+r-pad, hi+r-pad).
  auto range = [pad, len](std::size_t r) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(r) - pad;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len, len - shift);
    return std::tuple{lo, hi, shift};
  };
  auto widx = [Ci, width](std::size_t o, std::size_t i, std::size_t r) {
    return (o * Ci + i) * width + r;
  };

  Tensor<T> Y({Co, T_});
  for (std::size_t o = 0; o < Co; ++o) {
    auto yrow = Y.row(o);
    std::fill(yrow.begin(), yrow.end(), B[o]);
    for (std::size_t i = 0; i < Ci; ++i) {
      auto xrow = X.row(i);
      for (std::size_t r = 0; r < width; ++r) {
        auto [lo, hi, shift] = range(r);
        if (hi <= lo) continue;
        simd::axpy(W[widx(o, i, r)], xrow.subspan(static_cast<std::size_t>(lo + shift), static_cast<std::size_t>(hi - lo)),
                   yrow.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)));
      }
    }
  }
  return tape.record(
      "conv1d_same", std::move(Y), {w, b, x},
      [w, b, x, Co, Ci, width, T_, range, widx](const Tape<T>& tp, const Tensor<T>& g,
                                                  Gradients<T>& grads) {
        const Tensor<T>& W = tp.value(w);
        const Tensor<T>& X = tp.value(x);
        const bool need_w = tp.requires_grad(w), need_x = tp.requires_grad(x);
        Tensor<T>* gw = need_w ? &grads.slot(w, W.shape()) : nullptr;
        Tensor<T>* gx = need_x ? &grads.slot(x, X.shape()) : nullptr;
        if (tp.requires_grad(b)) {
          Tensor<T>& gb = grads.slot(b, tp.value(b).shape());
          for (std::size_t o = 0; o < Co; ++o)
            for (std::size_t t = 0; t < T_; ++t) gb[o] += g(o, t);
        }
        for (std::size_t o = 0; o < Co; ++o) {
          auto grow = g.row(o);
          for (std::size_t i = 0; i < Ci; ++i) {
            for (std::size_t r = 0; r < width; ++r) {
              auto [lo, hi, shift] = range(r);
              if (hi <= lo) continue;
              const auto n = static_cast<std::size_t>(hi - lo);
              auto gseg = grow.subspan(static_cast<std::size_t>(lo), n);
              const auto xoff = static_cast<std::size_t>(lo + shift);
              if (need_w) (*gw)[widx(o, i, r)] += simd::dot(gseg, X.row(i).subspan(xoff, n));
              if (need_x) simd::axpy(W[widx(o, i, r)], gseg, gx->row(i).subspan(xoff, n));
            }
          }
        }
      });
}

template <class T>
T apply_activation(Activation kind, T v) noexcept {
  switch (kind) {
    case Activation::kRelu:
      return v > T{0} ? v : T{0};
    case Activation::kTanh:
      return std::tanh(v);
    case Activation::kSigmoid:
      return T{1} / (T{1} + std::exp(-v));
  }
  return v;
}

/// Elementwise relu / tanh / sigmoid. The relu subgradient at 0 is 0.
template <class T>
Var activation(Tape<T>& tape, Activation kind, Var x) {
  const Tensor<T>& X = tape.value(x);
  Tensor<T> Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = apply_activation(kind, X[i]);
  return tape.record("activation", std::move(Y), {x},
                     [kind, x](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& X = tp.value(x);
                       Tensor<T>& gx = grads.slot(x, X.shape());
                       for (std::size_t i = 0; i < X.size(); ++i) {
                         T local{0};
                         switch (kind) {
                           case Activation::kRelu:
                             local = X[i] > T{0} ? T{1} : T{0};
                             break;
                           case Activation::kTanh: {
                             const T y = std::tanh(X[i]);
                             local = T{1} - y * y;
                             break;
                           }
                           case Activation::kSigmoid: {
                             const T y = T{1} / (T{1} + std::exp(-X[i]));
                             local = y * (T{1} - y);
                             break;
                           }
                         }
                         gx[i] += g[i] * local;
                       }
                     });
}

struct MaxPoolResult {
  Var out;
  std::vector<std::size_t> argmax;
};

/// Max over the time axis of X [D×T] -> [D]. Ties go to the lowest time index;
/// the backward pass routes each row's gradient to its winner only.
template <class T>
MaxPoolResult maxpool_time(Tape<T>& tape, Var x) {
  const Tensor<T>& X = tape.value(x);
  detail::require_rank(X.shape(), 2, "maxpool_time", "input");
  const std::size_t D = X.dim(0), T_ = X.dim(1);
  if (T_ == 0) throw EmptySequenceError("maxpool_time: sequence has no time steps");
  Tensor<T> Y({D});
  std::vector<std::size_t> arg(D, 0);
  for (std::size_t d = 0; d < D; ++d) {
    auto row = X.row(d);
    std::size_t best = 0;
    for (std::size_t t = 1; t < T_; ++t)
      if (row[t] > row[best]) best = t;
    arg[d] = best;
    Y[d] = row[best];
  }
  Var out = tape.record("maxpool_time", std::move(Y), {x},
                        [x, arg](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                          Tensor<T>& gx = grads.slot(x, tp.value(x).shape());
                          for (std::size_t d = 0; d < arg.size(); ++d) gx(d, arg[d]) += g[d];
                        });
  return {out, std::move(arg)};
}

template <class T>
Var elementwise(Tape<T>& tape, Elementwise kind, Var a, Var b) {
  const Tensor<T>& A = tape.value(a);
  const Tensor<T>& B = tape.value(b);
  if (A.shape() != B.shape()) {
    throw DimensionError("elementwise: shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()) + " differ");
  }
  Tensor<T> Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i)
    Y[i] = kind == Elementwise::kMul ? A[i] * B[i] : A[i] + B[i];
  return tape.record(kind == Elementwise::kMul ? "mul" : "add", std::move(Y), {a, b},
                     [kind, a, b](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& A = tp.value(a);
                       const Tensor<T>& B = tp.value(b);
                       if (tp.requires_grad(a)) {
                         Tensor<T>& ga = grads.slot(a, A.shape());
                         for (std::size_t i = 0; i < g.size(); ++i)
                           ga[i] += kind == Elementwise::kMul ? g[i] * B[i] : g[i];
                       }
                       if (tp.requires_grad(b)) {
                         Tensor<T>& gb = grads.slot(b, B.shape());
                         for (std::size_t i = 0; i < g.size(); ++i)
                           gb[i] += kind == Elementwise::kMul ? g[i] * A[i] : g[i];
                       }
                     });
}

// ---------------------------------------------------------------------------
// Loss-side composites

/// Stacks D-vectors as the columns of a [D×B] matrix.
template <class T>
Var concat_columns(Tape<T>& tape, std::span<const Var> cols) {
  if (cols.empty()) throw DimensionError("concat_columns: no inputs");
  const std::size_t D = tape.value(cols[0]).size();
  const std::size_t B = cols.size();
  Tensor<T> Y({D, B});
  for (std::size_t j = 0; j < B; ++j) {
    const Tensor<T>& v = tape.value(cols[j]);
    if (v.rank() != 1 || v.size() != D) {
      throw DimensionError("concat_columns: column " + std::to_string(j) + " has shape " +
                           shape_string(v.shape()));
    }
    for (std::size_t d = 0; d < D; ++d) Y(d, j) = v[d];
  }
  std::vector<Var> inputs(cols.begin(), cols.end());
  return tape.record("concat_columns", std::move(Y), inputs,
                     [inputs, D](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       for (std::size_t j = 0; j < inputs.size(); ++j) {
                         if (!tp.requires_grad(inputs[j])) continue;
                         Tensor<T>& gv = grads.slot(inputs[j], Shape{D});
                         for (std::size_t d = 0; d < D; ++d) gv[d] += g(d, j);
                       }
                     });
}

/// concat(u, v, u⊙v, |u−v|) for u, v of equal length D -> [4D].
/// d|x|/dx at x = 0 is taken as 0.
template <class T>
Var classifier_features(Tape<T>& tape, Var u, Var v) {
  const Tensor<T>& U = tape.value(u);
  const Tensor<T>& V = tape.value(v);
  if (U.rank() != 1 || U.shape() != V.shape()) {
    throw DimensionError("classifier_features: shapes " + shape_string(U.shape()) + " and " +
                         shape_string(V.shape()));
  }
  const std::size_t D = U.size();
  Tensor<T> Y({4 * D});
  for (std::size_t d = 0; d < D; ++d) {
    Y[d] = U[d];
    Y[D + d] = V[d];
    Y[2 * D + d] = U[d] * V[d];
    Y[3 * D + d] = std::abs(U[d] - V[d]);
  }
  return tape.record("classifier_features", std::move(Y), {u, v},
                     [u, v, D](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       const Tensor<T>& U = tp.value(u);
                       const Tensor<T>& V = tp.value(v);
                       auto sign = [](T x) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); };
                       if (tp.requires_grad(u)) {
                         Tensor<T>& gu = grads.slot(u, U.shape());
                         for (std::size_t d = 0; d < D; ++d)
                           gu[d] += g[d] + g[2 * D + d] * V[d] + g[3 * D + d] * sign(U[d] - V[d]);
                       }
                       if (tp.requires_grad(v)) {
                         Tensor<T>& gv = grads.slot(v, V.shape());
                         for (std::size_t d = 0; d < D; ++d)
                           gv[d] += g[D + d] + g[2 * D + d] * U[d] - g[3 * D + d] * sign(U[d] - V[d]);
                       }
                     });
}

/// Cosine of every column of U [D×B] against every column of V [D×M] -> [B×M].
/// Column norms are floored at `eps` (the floor has zero gradient).
template <class T>
Var cosine_scores(Tape<T>& tape, Var u, Var v, T eps = T(1e-6)) {
  const Tensor<T>& U = tape.value(u);
  const Tensor<T>& V = tape.value(v);
  detail::require_rank(U.shape(), 2, "cosine_scores", "left");
  detail::require_rank(V.shape(), 2, "cosine_scores", "right");
  if (U.dim(0) != V.dim(0)) {
    throw DimensionError("cosine_scores: shapes " + shape_string(U.shape()) + " and " +
                         shape_string(V.shape()));
  }
  const std::size_t B = U.dim(1), M = V.dim(1);
  auto normalize = [eps](const Tensor<T>& m, std::vector<T>& norms) {
    Tensor<T> rows = detail::transpose(m);
    norms.resize(rows.dim(0));
    for (std::size_t i = 0; i < rows.dim(0); ++i) {
      const T n = std::max(std::sqrt(simd::dot(rows.row(i), rows.row(i))), eps);
      norms[i] = n;
      for (T& x : rows.row(i)) x /= n;
    }
    return rows;
  };
  std::vector<T> nu, nv;
  const Tensor<T> Uh = normalize(U, nu);
  const Tensor<T> Vh = normalize(V, nv);
  Tensor<T> S({B, M});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < M; ++j) S(i, j) = simd::dot(Uh.row(i), Vh.row(j));
  return tape.record(
      "cosine_scores", S, {u, v},
      [u, v, Uh, Vh, nu, nv, S, eps](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
        const std::size_t B = Uh.dim(0), M = Vh.dim(0), D = Uh.dim(1);
        if (tp.requires_grad(u)) {
          Tensor<T> gr({B, D});
          for (std::size_t i = 0; i < B; ++i) {
            if (nu[i] <= eps) continue;
            for (std::size_t j = 0; j < M; ++j) {
              simd::axpy(g(i, j) / nu[i], Vh.row(j), gr.row(i));
              simd::axpy(-g(i, j) * S(i, j) / nu[i], Uh.row(i), gr.row(i));
            }
          }
          Tensor<T>& gu = grads.slot(u, tp.value(u).shape());
          for (std::size_t i = 0; i < B; ++i)
            for (std::size_t d = 0; d < D; ++d) gu(d, i) += gr(i, d);
        }
        if (tp.requires_grad(v)) {
          Tensor<T> gr({M, D});
          for (std::size_t j = 0; j < M; ++j) {
            if (nv[j] <= eps) continue;
            for (std::size_t i = 0; i < B; ++i) {
              simd::axpy(g(i, j) / nv[j], Uh.row(i), gr.row(j));
              simd::axpy(-g(i, j) * S(i, j) / nv[j], Vh.row(j), gr.row(j));
            }
          }
          Tensor<T>& gv = grads.slot(v, tp.value(v).shape());
          for (std::size_t j = 0; j < M; ++j)
            for (std::size_t d = 0; d < D; ++d) gv(d, j) += gr(j, d);
        }
      });
}

/// Bidirectional max-of-hinges over in-batch negatives, summed over the batch:
///   sum_i [a - S_ii + max_{j!=i} S_ij]_+ + [a - S_ii + max_{j!=i} S_ji]_+
/// Argmax ties go to the lowest index; a hinge at exactly 0 passes no gradient.
template <class T>
Var ranker_loss(Tape<T>& tape, Var s, T margin) {
  const Tensor<T>& S = tape.value(s);
  detail::require_rank(S.shape(), 2, "ranker_loss", "scores");
  const std::size_t B = S.dim(0);
  if (S.dim(1) != B) throw DimensionError("ranker_loss: score matrix must be square");
  if (B < 2) throw ConfigError("ranker_loss: batch needs at least one in-batch negative (B >= 2)");

  struct Hinge {
    std::size_t i, j;  // gradient +1 at (i, j), -1 at the diagonal of `diag`
    std::size_t diag;
  };
  std::vector<Hinge> active;
  T total{0};
  for (std::size_t i = 0; i < B; ++i) {
    std::size_t jr = i == 0 ? 1 : 0, jc = jr;
    for (std::size_t j = 0; j < B; ++j) {
      if (j == i) continue;
      if (S(i, j) > S(i, jr)) jr = j;
      if (S(j, i) > S(jc, i)) jc = j;
    }
    const T row_hinge = margin - S(i, i) + S(i, jr);
    const T col_hinge = margin - S(i, i) + S(jc, i);
    if (row_hinge > T{0}) {
      total += row_hinge;
      active.push_back({i, jr, i});
    }
    if (col_hinge > T{0}) {
      total += col_hinge;
      active.push_back({jc, i, i});
    }
  }
  return tape.record("ranker_loss", Tensor<T>({1}, {total}), {s},
                     [s, active](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       Tensor<T>& gs = grads.slot(s, tp.value(s).shape());
                       for (const Hinge& h : active) {
                         gs(h.i, h.j) += g[0];
                         gs(h.diag, h.diag) -= g[0];
                       }
                     });
}

/// Mean softmax cross-entropy of logits [C×B] (one column per item).
template <class T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const std::size_t> labels) {
  const Tensor<T>& Z = tape.value(logits);
  detail::require_rank(Z.shape(), 2, "softmax_cross_entropy", "logits");
  const std::size_t C = Z.dim(0), B = Z.dim(1);
  if (labels.size() != B) throw DimensionError("softmax_cross_entropy: label count mismatch");
  if (B == 0) throw EmptySequenceError("softmax_cross_entropy: empty batch");
  Tensor<T> P({C, B});
  T total{0};
  for (std::size_t j = 0; j < B; ++j) {
    if (labels[j] >= C) {
      throw DimensionError("softmax_cross_entropy: label " + std::to_string(labels[j]) +
                           " out of range for " + std::to_string(C) + " classes");
    }
    T zmax = Z(0, j);
    for (std::size_t c = 1; c < C; ++c) zmax = std::max(zmax, Z(c, j));
    T denom{0};
    for (std::size_t c = 0; c < C; ++c) denom += std::exp(Z(c, j) - zmax);
    for (std::size_t c = 0; c < C; ++c) P(c, j) = std::exp(Z(c, j) - zmax) / denom;
    total += std::log(denom) + zmax - Z(labels[j], j);
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return tape.record("softmax_cross_entropy", Tensor<T>({1}, {total / static_cast<T>(B)}),
                     {logits},
                     [logits, P, lab](const Tape<T>& tp, const Tensor<T>& g, Gradients<T>& grads) {
                       const std::size_t C = P.dim(0), B = P.dim(1);
                       Tensor<T>& gz = grads.slot(logits, tp.value(logits).shape());
                       const T scale = g[0] / static_cast<T>(B);
                       for (std::size_t j = 0; j < B; ++j)
                         for (std::size_t c = 0; c < C; ++c)
                           gz(c, j) += scale * (P(c, j) - (c == lab[j] ? T{1} : T{0}));
                     });
}

}  // namespace ops
}  // namespace lens
