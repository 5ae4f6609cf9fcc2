#pragma once

#include "lapal/common/binary_io.hpp"
#include "lapal/nncore/mlp.hpp"

namespace lapal::nn {

inline constexpr char kSegmentMagic[4] = {'L', 'P', 'N', 'N'};
inline constexpr std::uint32_t kSegmentVersion = 1;

// Segment layout: magic "LPNN", u32 version, u64 spec digest, then per layer
// weights (row-major) and biases as little-endian f64, then i64 Adam step and
// per-layer first moments (weights, biases) and second moments.
void write_segment(BinaryWriter& out, const Mlp& net);

// Reads a segment into a network that already has the expected spec. Throws
// IoError when magic, version or spec digest disagree.
void read_segment(BinaryReader& in, Mlp& net);

}  // namespace lapal::nn
