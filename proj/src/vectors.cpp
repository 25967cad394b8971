#include "lens/vectors.hpp"

#include <cstring>
#include <limits>

#include "binio.hpp"

namespace lens {
namespace {
constexpr char kMagic[4] = {'C', 'L', 'V', 'E'};
}

VectorSet::VectorSet(std::size_t dim, std::vector<std::uint64_t> ids, std::vector<float> data)
    : dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
  if (ids_.size() * dim_ != data_.size()) {
    throw DimensionError("vector set: " + std::to_string(ids_.size()) + " ids x D=" +
                         std::to_string(dim_) + " does not match " + std::to_string(data_.size()) +
                         " values");
  }
}

void VectorSet::push_back(std::uint64_t id, std::span<const float> v) {
  if (v.size() != dim_) {
    throw DimensionError("vector set: expected D=" + std::to_string(dim_) + ", got " +
                         std::to_string(v.size()));
  }
  ids_.push_back(id);
  data_.insert(data_.end(), v.begin(), v.end());
}

VectorSet VectorSet::select(std::span<const std::size_t> indices) const {
  VectorSet out(dim_);
  for (std::size_t i : indices) out.push_back(ids_.at(i), row(i));
  return out;
}

std::vector<unsigned char> serialize_vectors(const VectorSet& vectors) {
  binio::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVectorFileVersion);
  w.u32(static_cast<std::uint32_t>(vectors.dim()));
  w.u64(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    w.u64(vectors.ids()[i]);
    w.f32s(vectors.row(i));
  }
  return w.release();
}

VectorSet parse_vectors(std::span<const unsigned char> bytes, const std::string& name) {
  binio::Reader in(bytes, name);
  if (in.remaining() < 4) in.fail(ParseErrorKind::kBadMagic, "file shorter than magic");
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) in.fail(ParseErrorKind::kBadMagic, "missing CLVE magic");
  const std::uint32_t version = in.u32();
  if (version != kVectorFileVersion) {
    in.fail(ParseErrorKind::kVersionMismatch, "unsupported CLVE version " + std::to_string(version));
  }
  const std::uint32_t D = in.u32();
  const std::uint64_t N = in.u64();
  if (D == 0 && N > 0) in.fail(ParseErrorKind::kInconsistentDim, "D=0 with records present");
  const std::uint64_t per = 8 + std::uint64_t{D} * 4;
  if (N > in.remaining() / per) {
    in.fail(ParseErrorKind::kTruncated, "header promises " + std::to_string(N) + " records");
  }
  std::vector<std::uint64_t> ids(N);
  std::vector<float> data(N * D);
  for (std::uint64_t i = 0; i < N; ++i) {
    in.set_record(static_cast<std::int64_t>(i));
    ids[i] = in.u64();
    in.f32s(std::span<float>(data).subspan(i * D, D));
  }
  in.set_record(-1);
  if (in.remaining() != 0) {
    in.fail(ParseErrorKind::kFormat, std::to_string(in.remaining()) + " trailing bytes");
  }
  return VectorSet(D, std::move(ids), std::move(data));
}

void write_vectors(const VectorSet& vectors, const std::filesystem::path& path) {
  binio::write_file(path, serialize_vectors(vectors));
}

VectorSet read_vectors(const std::filesystem::path& path) {
  return parse_vectors(binio::read_file(path), path.string());
}

}  // namespace lens
