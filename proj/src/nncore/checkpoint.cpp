#include "lapal/nncore/checkpoint.hpp"

#include <string_view>

#include "lapal/common/errors.hpp"

namespace lapal::nn {

void write_segment(BinaryWriter& out, const Mlp& net) {
  out.bytes(std::string_view(kSegmentMagic, 4));
  out.u32(kSegmentVersion);
  out.u64(net.spec().digest());
  const ParamTree& p = net.params();
  for (const auto& l : p.layers) {
    out.matrix(l.weights);
    out.vector(l.biases);
  }
  out.i64(p.adam_step);
  for (const auto& l : p.adam_m) {
    out.matrix(l.weights);
    out.vector(l.biases);
  }
  for (const auto& l : p.adam_v) {
    out.matrix(l.weights);
    out.vector(l.biases);
  }
}

void read_segment(BinaryReader& in, Mlp& net) {
  if (in.bytes(4) != std::string_view(kSegmentMagic, 4)) throw IoError("bad network segment magic");
  const auto version = in.u32();
  if (version != kSegmentVersion) {
    throw IoError("unsupported network segment version " + std::to_string(version));
  }
  const auto digest = in.u64();
  if (digest != net.spec().digest()) {
    throw IoError("network segment was written for a different spec than " +
                  net.spec().describe());
  }
  ParamTree& p = net.params();
  for (auto& l : p.layers) {
    in.matrix_into(l.weights);
    in.vector_into(l.biases);
  }
  p.adam_step = in.i64();
  for (auto& l : p.adam_m) {
    in.matrix_into(l.weights);
    in.vector_into(l.biases);
  }
  for (auto& l : p.adam_v) {
    in.matrix_into(l.weights);
    in.vector_into(l.biases);
  }
  p.zero_grad();
}

}  // namespace lapal::nn
