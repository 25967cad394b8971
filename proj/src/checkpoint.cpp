#include "lens/checkpoint.hpp"

#include <cstring>

#include "binio.hpp"

namespace lens {
namespace {
constexpr char kMagic[4] = {'C', 'L', 'L', 'P'};
constexpr std::uint32_t kMaxRank = 3;
}  // namespace

std::vector<unsigned char> serialize_lens(const LensParameters& lens) {
  lens.validate();
  binio::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(lens.kind()));
  Activation act = Activation::kRelu;
  if (const auto* s = std::get_if<SimpleLens>(&lens.lens)) act = s->activation;
  if (const auto* g = std::get_if<GatedConvLens>(&lens.lens)) act = g->fusion_activation;
  w.u32(static_cast<std::uint32_t>(act));
  const auto params = lens.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Tensor<float>* t : params) {
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const Tensor<float>* t : params) w.f32s(t->data());
  return w.release();
}

LensParameters parse_lens(std::span<const unsigned char> bytes, const std::string& name) {
  binio::Reader in(bytes, name);
  if (in.remaining() < 4) in.fail(ParseErrorKind::kBadMagic, "file shorter than magic");
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) in.fail(ParseErrorKind::kBadMagic, "missing CLLP magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    in.fail(ParseErrorKind::kVersionMismatch, "unsupported CLLP version " + std::to_string(version));
  }
  const std::uint32_t kind = in.u32();
  const std::uint32_t act = in.u32();
  if (kind > 2) in.fail(ParseErrorKind::kFormat, "unknown lens kind " + std::to_string(kind));
  if (act > 2) in.fail(ParseErrorKind::kFormat, "unknown activation " + std::to_string(act));
  const std::uint32_t count = in.u32();
  if (count > in.remaining() / 4) in.fail(ParseErrorKind::kTruncated, "tensor table too large");

  std::vector<Shape> shapes(count);
  std::uint64_t total = 0;
  for (auto& shape : shapes) {
    const std::uint32_t rank = in.u32();
    if (rank == 0 || rank > kMaxRank) in.fail(ParseErrorKind::kFormat, "bad tensor rank " + std::to_string(rank));
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = in.u32();
      shape.push_back(d);
      n *= d;
      if (n > bytes.size()) in.fail(ParseErrorKind::kTruncated, "tensor larger than file");
    }
    total += n;
  }
  if (total * 4 > in.remaining()) in.fail(ParseErrorKind::kTruncated, "tensor data truncated");
  std::vector<Tensor<float>> tensors;
  for (auto& shape : shapes) {
    Tensor<float> t(shape);
    in.f32s(t.data());
    tensors.push_back(std::move(t));
  }
  if (in.remaining() != 0) in.fail(ParseErrorKind::kFormat, std::to_string(in.remaining()) + " trailing bytes");

  LensParameters lens;
  const auto activation = static_cast<Activation>(act);
  switch (static_cast<LensKind>(kind)) {
    case LensKind::kMeanPool:
      if (count != 0) in.fail(ParseErrorKind::kFormat, "meanpool checkpoint carries tensors");
      lens.lens = MeanPool{};
      break;
    case LensKind::kSimple:
      if (count != 2) in.fail(ParseErrorKind::kFormat, "simple checkpoint needs 2 tensors");
      lens.lens = SimpleLens{std::move(tensors[0]), std::move(tensors[1]), activation};
      break;
    case LensKind::kGatedConv: {
      if (count < 10 || (count - 2) % 4 != 0) {
        in.fail(ParseErrorKind::kFormat, "gatedconv checkpoint has " + std::to_string(count) + " tensors");
      }
      const std::size_t layers = (count - 2) / 4;
      GatedConvLens g;
      std::size_t k = 0;
      for (std::size_t i = 0; i < layers; ++i) {
        g.encoder_weights.push_back(std::move(tensors[k++]));
        g.encoder_biases.push_back(std::move(tensors[k++]));
      }
      for (std::size_t i = 0; i < layers; ++i) {
        g.controller_weights.push_back(std::move(tensors[k++]));
        g.controller_biases.push_back(std::move(tensors[k++]));
      }
      g.fusion_weight = std::move(tensors[k++]);
      g.fusion_bias = std::move(tensors[k++]);
      g.fusion_activation = activation;
      lens.lens = std::move(g);
      break;
    }
  }
  try {
    lens.validate();
  } catch (const Error& err) {
    in.fail(ParseErrorKind::kInconsistentDim, err.what());
  }
  return lens;
}

void write_lens(const LensParameters& lens, const std::filesystem::path& path) {
  binio::write_file(path, serialize_lens(lens));
}

LensParameters read_lens(const std::filesystem::path& path) {
  return parse_lens(binio::read_file(path), path.string());
}

}  // namespace lens
