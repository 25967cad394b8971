#pragma once

// Fixed-length sentence vectors and the CLVE file format:
//   "CLVE" | u32 version=1 | u32 D | u64 N | N x ( u64 id | D f32 )

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lens/errors.hpp"

namespace lens {

inline constexpr std::uint32_t kVectorFileVersion = 1;

/// N x D row-major float vectors with one id per row.
class VectorSet {
 public:
  VectorSet() = default;
  explicit VectorSet(std::size_t dim) : dim_(dim) {}
  VectorSet(std::size_t dim, std::vector<std::uint64_t> ids, std::vector<float> data);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * dim_, dim_);
  }
  std::span<float> row(std::size_t i) { return std::span<float>(data_).subspan(i * dim_, dim_); }

  void push_back(std::uint64_t id, std::span<const float> v);

  /// Rows listed in `indices`, in that order.
  VectorSet select(std::span<const std::size_t> indices) const;

  friend bool operator==(const VectorSet&, const VectorSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint64_t> ids_;
  std::vector<float> data_;
};

std::vector<unsigned char> serialize_vectors(const VectorSet& vectors);
VectorSet parse_vectors(std::span<const unsigned char> bytes, const std::string& name = "<memory>");
void write_vectors(const VectorSet& vectors, const std::filesystem::path& path);
VectorSet read_vectors(const std::filesystem::path& path);

}  // namespace lens
