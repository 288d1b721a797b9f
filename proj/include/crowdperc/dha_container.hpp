#pragma once

// "DHA1" binary container for attention weights and heatmap pyramids.
//
//   offset 0   char[4]   magic "DHA1"
//          4   uint32    kind (1 = attention weights, 2 = heatmap pyramid)
//          8   uint32    tensor count T
//   then T times:
//              uint32    rank R
//              uint32[R] dims
//              float32[prod(dims)] row-major payload
//
// All integers and floats are little-endian. Attention weights hold three
// [C, C] tensors (query, key, value). A pyramid holds [Hc, Wc] coarse,
// [H, W] regular, [Hf, Wf] fine scores and a [10, Hf, Wf] regression tensor
// with channels (du, dv, z, l, w, h, sin yaw, cos yaw, vx, vy).

#include "crowdperc/dha_core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace crowdperc {

enum class ContainerKind : std::uint32_t { AttentionWeights = 1, HeatmapPyramid = 2 };

std::string encode_attention(const AttentionWeights<float>& w);
AttentionWeights<float> decode_attention(const std::string& bytes);

std::string encode_pyramid(const HeatmapPyramid<float>& p);
HeatmapPyramid<float> decode_pyramid(const std::string& bytes);

/// Reads the kind field without decoding the payload.
ContainerKind peek_container_kind(const std::string& bytes);

std::string read_binary_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never see partial output.
void write_binary_file(const std::string& bytes, const std::filesystem::path& path);

}  // namespace crowdperc
