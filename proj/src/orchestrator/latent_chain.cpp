#include "lapal/orchestrator/latent_chain.hpp"

namespace lapal::orch {

namespace {

struct LatentTape : sac::ChainTape {
  nn::Tape decode;
  latent::EncodeTape encode;
};

}  // namespace

Matrix LatentChain::forward(const Matrix& states, const Matrix& u,
                            std::unique_ptr<sac::ChainTape>* tape) const {
  if (!tape) return codec_.encode_mean(states, codec_.decode(states, u));
  auto t = std::make_unique<LatentTape>();
  const Matrix a = codec_.decode(states, u, &t->decode);
  Matrix c = codec_.encode(states, a, &t->encode).mean;
  *tape = std::move(t);
  return c;
}

Matrix LatentChain::backward(const sac::ChainTape& tape, const Matrix& d_c) {
  const auto& t = dynamic_cast<const LatentTape&>(tape);
  const Matrix d_sa = codec_.encode_mean_backward(t.encode, d_c, false);
  const Matrix d_a = d_sa.bottomRows(codec_.action_dim());
  const Matrix d_in = codec_.decode_backward(t.decode, d_a, train_decoder_);
  return d_in.bottomRows(codec_.latent_dim());
}

}  // namespace lapal::orch
