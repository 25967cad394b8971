#pragma once

// Lens encoders: reduce a K x T contextualized embedding matrix to a fixed
// D-dimensional sentence vector.
//
//   MeanPool   s = mean_t E
//   Simple     s = maxpool_t( phi(W E + b) )
//   GatedConv  H_0 = relu(W_0h E + b_0h),  H_i = act_i(W_ih * H_{i-1} + b_ih)   i = 1..M
//              G_0 = relu(W_0g E + b_0g),  G_i = act_i(W_ig * G_{i-1} + b_ig)
//              (last encoder layer tanh, last controller layer sigmoid, rest relu)
//              F' = H_M (.) G_M + G_0,  F = phi_f(W_f F' + b_f),  s = maxpool_t F

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lens/corpus.hpp"
#include "lens/ops.hpp"
#include "lens/vectors.hpp"

namespace lens {

struct MeanPool {
  friend bool operator==(const MeanPool&, const MeanPool&) = default;
};

template <class T>
struct SimpleLensT {
  Tensor<T> weight;  // D x K
  Tensor<T> bias;    // D
  Activation activation = Activation::kRelu;

  std::size_t input_dim() const { return weight.dim(1); }
  std::size_t output_dim() const { return weight.dim(0); }
  void validate() const;
  friend bool operator==(const SimpleLensT&, const SimpleLensT&) = default;
};

template <class T>
struct GatedConvLensT {
  // Index 0 is the G x K projection; 1..M are G x G x width convolutions.
  std::vector<Tensor<T>> encoder_weights, encoder_biases;
  std::vector<Tensor<T>> controller_weights, controller_biases;
  Tensor<T> fusion_weight;  // D x G
  Tensor<T> fusion_bias;    // D
  Activation fusion_activation = Activation::kRelu;

  std::size_t depth() const { return encoder_weights.empty() ? 0 : encoder_weights.size() - 1; }
  std::size_t input_dim() const { return encoder_weights.at(0).dim(1); }
  std::size_t gate_size() const { return encoder_weights.at(0).dim(0); }
  std::size_t width() const { return encoder_weights.at(1).dim(2); }
  std::size_t output_dim() const { return fusion_weight.dim(0); }
  void validate() const;
  friend bool operator==(const GatedConvLensT&, const GatedConvLensT&) = default;
};

enum class LensKind : std::uint32_t { kMeanPool = 0, kSimple = 1, kGatedConv = 2 };

const char* to_string(LensKind kind) noexcept;
LensKind parse_lens_kind(const std::string& name);

template <class T>
struct LensParametersT {
  std::variant<MeanPool, SimpleLensT<T>, GatedConvLensT<T>> lens;

  LensKind kind() const { return static_cast<LensKind>(lens.index()); }
  /// D; MeanPool passes K through.
  std::size_t output_dim(std::size_t input_dim) const;
  /// Expected K, or 0 for MeanPool (any K).
  std::size_t input_dim() const;
  /// Trainable tensors in a fixed order (empty for MeanPool).
  std::vector<Tensor<T>*> parameters();
  std::vector<const Tensor<T>*> parameters() const;
  void validate() const;

  template <class U>
  LensParametersT<U> cast() const;

  friend bool operator==(const LensParametersT&, const LensParametersT&) = default;
};

using SimpleLens = SimpleLensT<float>;
using GatedConvLens = GatedConvLensT<float>;
using LensParameters = LensParametersT<float>;

SimpleLens init_simple(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                       Activation activation = Activation::kRelu);
GatedConvLens init_gatedconv(std::size_t input_dim, std::size_t output_dim, std::size_t gate_size,
                             std::size_t depth, std::size_t width, std::uint64_t seed);

/// Lens parameters recorded as tape leaves, in parameters() order.
struct BoundLens {
  LensKind kind = LensKind::kMeanPool;
  std::vector<Var> params;
  Activation activation = Activation::kRelu;  // phi (Simple) or phi_f (GatedConv)
};

template <class T>
BoundLens bind_lens(Tape<T>& tape, const LensParametersT<T>& lens, bool trainable);

/// Records the encoder on `tape` for the K x T embedding variable `e`. Returns
/// the D-vector variable.
template <class T>
Var encode_on_tape(Tape<T>& tape, const BoundLens& bound, Var e);

template <class T>
std::vector<T> encode_meanpool(const Tensor<T>& e);
template <class T>
std::vector<T> encode_simple(const Tensor<T>& e, const SimpleLensT<T>& lens);
template <class T>
std::vector<T> encode_gatedconv(const Tensor<T>& e, const GatedConvLensT<T>& lens);
template <class T>
std::vector<T> encode(const Tensor<T>& e, const LensParametersT<T>& lens);

/// Encodes every record; row i is record i. Workers split the corpus into
/// contiguous blocks, so the output does not depend on `threads`.
VectorSet batch_encode(const EmbeddingCorpus& corpus, const LensParameters& lens,
                       std::size_t threads = 1);

}  // namespace lens
