#pragma once

// Lens checkpoints (CLLP), little-endian:
//   "CLLP" | u32 version=1 | u32 lens kind | u32 activation (phi or phi_f)
//   | u32 tensor count | per tensor: u32 rank, rank x u32 dims
//   | every tensor's f32 data, in LensParameters::parameters() order

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lens/encoders.hpp"

namespace lens {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> serialize_lens(const LensParameters& lens);
LensParameters parse_lens(std::span<const unsigned char> bytes, const std::string& name = "<memory>");
void write_lens(const LensParameters& lens, const std::filesystem::path& path);
LensParameters read_lens(const std::filesystem::path& path);

}  // namespace lens
