#pragma once

#include <cstdint>
#include <string>

#include "lapal/common/binary_io.hpp"
#include "lapal/nncore/adam.hpp"
#include "lapal/nncore/mlp.hpp"

namespace lapal::adv {

using nn::Matrix;
using nn::Vector;

// Which action space the second input block lives in.
enum class InputSpace { kLatent, kRaw };

// Identifies what a discriminator was trained against. For latent inputs
// codec_digest names the codec; for raw inputs it is 0.
struct InputDescriptor {
  InputSpace space = InputSpace::kRaw;
  int state_dim = 0;
  int action_dim = 0;  // latent_dim or raw action_dim
  std::uint64_t codec_digest = 0;
  bool operator==(const InputDescriptor&) const = default;
  std::string describe() const;
};

struct DiscLoss {
  double loss = 0.0;
  double expert_mean_logit = 0.0;
  double agent_mean_logit = 0.0;
  // dLoss/du for each batch (action_dim x N), used to push gradients into the
  // encoder in task-aware mode.
  Matrix d_expert_u;
  Matrix d_agent_u;
};

// D(s, u) = sigmoid(logit). All arithmetic stays in logit space.
class Discriminator {
 public:
  Discriminator() = default;
  // Tanh hidden layers, identity output.
  Discriminator(InputDescriptor input, std::vector<int> hidden, Rng& rng);

  const InputDescriptor& input() const { return input_; }
  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

  // States enter the network as (s - shift) / scale; identity by default.
  void set_state_normalizer(Vector shift, Vector scale);
  const Vector& state_shift() const { return state_shift_; }
  const Vector& state_scale() const { return state_scale_; }

  // 1 x N logits. Throws ConfigError on a dimension mismatch.
  Matrix logits(const Matrix& states, const Matrix& u, nn::Tape* tape = nullptr) const;
  double logit(const Vector& state, const Vector& u) const;

  // Binary cross-entropy with expert labelled 1 and agent 0, each half
  // averaged separately: mean softplus(-l_E) + mean softplus(l_A). Adds
  // parameter gradients when accumulate is true.
  DiscLoss loss_and_grad(const Matrix& expert_s, const Matrix& expert_u, const Matrix& agent_s,
                         const Matrix& agent_u, bool accumulate = true);

  // r = -log(1 - D) = softplus(logit); 1 x N, finite and >= 0.
  Matrix reward(const Matrix& states, const Matrix& u) const;

  void step(const nn::AdamConfig& cfg) { nn::adam_step(net_.params(), cfg); }
  std::uint64_t digest() const;

  void write(BinaryWriter& out) const;
  // Throws IoError unless the stored descriptor equals the expected one.
  static Discriminator read(BinaryReader& in, const InputDescriptor& expected);

 private:
  InputDescriptor input_;
  Vector state_shift_;
  Vector state_scale_;
  nn::Mlp net_;
};

}  // namespace lapal::adv
