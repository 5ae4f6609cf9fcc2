#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "lapal/common/binary_io.hpp"
#include "lapal/nncore/adam.hpp"
#include "lapal/nncore/mlp.hpp"

namespace lapal::sac {

using nn::Matrix;
using nn::Vector;

// Actor log-std is squashed smoothly into [kActorLogStdMin, kActorLogStdMax].
inline constexpr double kActorLogStdMin = -5.0;
inline constexpr double kActorLogStdMax = 2.0;

struct SacConfig {
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
  nn::Activation activation = nn::Activation::kRelu;
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double alpha_lr = 3e-4;
  double init_log_alpha = 0.0;
  bool auto_alpha = true;
  // Entropy target; NaN selects -dim(action).
  double target_entropy = std::numeric_limits<double>::quiet_NaN();

  void validate() const;
};

// Opaque record of an ActionChain forward pass.
struct ChainTape {
  virtual ~ChainTape() = default;
};

// Maps the actor's squashed output u to the critic's action input c. The
// identity for plain SAC and GAIL; encode(s, decode(s, u)) for latent runs,
// where backward also feeds decoder gradients in task-aware mode.
class ActionChain {
 public:
  virtual ~ActionChain() = default;
  virtual int output_dim() const = 0;
  virtual Matrix forward(const Matrix& states, const Matrix& u,
                         std::unique_ptr<ChainTape>* tape) const = 0;
  // Returns dLoss/du given dLoss/dc.
  virtual Matrix backward(const ChainTape& tape, const Matrix& d_c) = 0;
};

class IdentityChain final : public ActionChain {
 public:
  explicit IdentityChain(int dim) : dim_(dim) {}
  int output_dim() const override { return dim_; }
  Matrix forward(const Matrix&, const Matrix& u, std::unique_ptr<ChainTape>* tape) const override {
    if (tape) *tape = std::make_unique<ChainTape>();
    return u;
  }
  Matrix backward(const ChainTape&, const Matrix& d_c) override { return d_c; }

 private:
  int dim_;
};

// Tanh-squashed Gaussian policy output for a batch.
struct PolicySample {
  Matrix u;        // squashed actions, strictly inside (-1, 1)
  Matrix log_prob;  // 1 x n
  Matrix pre_tanh;
  Matrix mean;
  Matrix log_std;
  Matrix raw_log_std;
  Matrix noise;
  nn::Tape tape;
};

struct CriticStats {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double mean_q = 0.0;
  double mean_target = 0.0;
};

struct ActorStats {
  double loss = 0.0;
  double entropy = 0.0;  // -mean log pi
  double alpha = 0.0;
  double mean_q = 0.0;
};

// log density of u = tanh(x), x ~ N(mean, exp(log_std)^2), per column.
Matrix tanh_gaussian_log_prob(const Matrix& mean, const Matrix& log_std, const Matrix& u);

class SacAgent {
 public:
  SacAgent() = default;
  // u_dim: dimension of the actor output; critic_action_dim: dimension of the
  // chain output the critics consume.
  SacAgent(int state_dim, int u_dim, int critic_action_dim, SacConfig config, Rng& rng);

  int state_dim() const { return state_dim_; }
  int u_dim() const { return u_dim_; }
  int critic_action_dim() const { return critic_action_dim_; }
  const SacConfig& config() const { return config_; }
  double alpha() const { return std::exp(log_alpha_); }
  double log_alpha() const { return log_alpha_; }
  double target_entropy() const;

  // Squashed policy output given standard-normal noise (u_dim x n). With
  // deterministic set the noise is ignored and u = tanh(mean).
  PolicySample sample(const Matrix& states, const Matrix& noise, bool deterministic = false) const;
  Matrix act(const Matrix& states, bool deterministic, Rng& rng) const;
  Vector act_one(const Vector& state, bool deterministic, Rng& rng) const;

  Matrix q_values(int which, const Matrix& states, const Matrix& c) const;  // 1 x n
  Matrix target_q_values(int which, const Matrix& states, const Matrix& c) const;

  // TD targets r + gamma * (min target Q(s', c') - alpha log pi(u'|s')) with
  // u' drawn from next_noise. Time-limit truncation bootstraps as usual.
  Matrix td_targets(const Matrix& rewards, const Matrix& next_states, const Matrix& next_noise,
                    const ActionChain& chain) const;
  // Mean of 0.5 (Q_i - y)^2 for both critics; adds critic gradients when grad.
  CriticStats critic_loss(const Matrix& states, const Matrix& c, const Matrix& targets, bool grad);
  // Full critic step: targets, loss, Adam on both critics, Polyak update.
  CriticStats critic_update(const Matrix& states, const Matrix& c, const Matrix& rewards,
                            const Matrix& next_states, const ActionChain& chain, Rng& rng);

  // Mean of alpha log pi(u|s) - min Q(s, chain(s, u)). With grad set, adds
  // actor gradients and lets the chain accumulate its own parameter gradients.
  ActorStats actor_loss(const Matrix& states, const Matrix& noise, ActionChain& chain, bool grad,
                        Matrix* log_prob_out = nullptr);
  // Actor loss, Adam on the actor, then the temperature step.
  ActorStats actor_update(const Matrix& states, ActionChain& chain, Rng& rng);

  // d/d(log_alpha) of -log_alpha * mean(log pi + target_entropy).
  double alpha_gradient(const Matrix& log_prob) const;
  void alpha_update(const Matrix& log_prob);

  // target <- tau * critic + (1 - tau) * target.
  void polyak(double tau);

  nn::Mlp& actor() { return actor_; }
  const nn::Mlp& actor() const { return actor_; }
  nn::Mlp& critic(int which) { return which == 0 ? critic1_ : critic2_; }
  const nn::Mlp& critic(int which) const { return which == 0 ? critic1_ : critic2_; }
  nn::Mlp& target(int which) { return which == 0 ? target1_ : target2_; }
  const nn::Mlp& target(int which) const { return which == 0 ? target1_ : target2_; }

  std::uint64_t digest() const;
  void write(BinaryWriter& out) const;
  static SacAgent read(BinaryReader& in, int state_dim, int u_dim, int critic_action_dim);

 private:
  int state_dim_ = 0;
  int u_dim_ = 0;
  int critic_action_dim_ = 0;
  SacConfig config_;
  nn::Mlp actor_;
  nn::Mlp critic1_, critic2_, target1_, target2_;
  double log_alpha_ = 0.0;
  nn::ScalarAdam alpha_opt_;
};

}  // namespace lapal::sac
