#pragma once

#include <memory>

#include "lapal/latentact/codec.hpp"
#include "lapal/sacgen/agent.hpp"

namespace lapal::orch {

using nn::Matrix;

// Critic input of a latent actor: c = mean g(s, h(s, u)). Backward feeds
// decoder gradients when train_decoder is set (task-aware generator step);
// the encoder only passes gradients through.
class LatentChain final : public sac::ActionChain {
 public:
  LatentChain(latent::ActionCodec& codec, bool train_decoder)
      : codec_(codec), train_decoder_(train_decoder) {}

  int output_dim() const override { return codec_.latent_dim(); }
  Matrix forward(const Matrix& states, const Matrix& u,
                 std::unique_ptr<sac::ChainTape>* tape) const override;
  Matrix backward(const sac::ChainTape& tape, const Matrix& d_c) override;

 private:
  latent::ActionCodec& codec_;
  bool train_decoder_;
};

}  // namespace lapal::orch
