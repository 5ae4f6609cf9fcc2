#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lapal/common/binary_io.hpp"
#include "lapal/envsim/demos.hpp"
#include "lapal/nncore/adam.hpp"
#include "lapal/nncore/gaussian.hpp"
#include "lapal/nncore/mlp.hpp"

namespace lapal::latent {

using nn::Matrix;
using nn::Vector;

struct CvaeConfig {
  int latent_dim = 4;
  double beta = 0.01;
  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::kLeakyRelu;
  int epochs = 200;
  int batch_size = 128;
  double lr = 3e-4;
  // Posterior means are squashed into (-latent_bound, latent_bound) so that
  // expert latents lie in the box a tanh-squashed latent policy can reach.
  double latent_bound = 1.0;
  // Expert latents for discriminator training: posterior mean, or one sample.
  bool sample_expert_latents = false;

  // Throws ConfigError on non-positive sizes, negative beta or bound <= 0.
  void validate() const;
};

// Batched diagonal Gaussian; columns are samples.
struct BatchGaussian {
  Matrix mean;
  Matrix log_std;
};

struct EncodeTape {
  nn::Tape net;
  Matrix raw_mean;
  Matrix raw_log_std;
};

struct CvaeLoss {
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

// Encoder g(s, a) -> N(mean, diag(exp(log_std)^2)) over latent actions and
// decoder h(s, abar) -> action, tanh-scaled to the action box.
class ActionCodec {
 public:
  ActionCodec() = default;
  ActionCodec(int state_dim, Vector action_low, Vector action_high, CvaeConfig config, Rng& rng);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return static_cast<int>(action_low_.size()); }
  int latent_dim() const { return config_.latent_dim; }
  const CvaeConfig& config() const { return config_; }
  const Vector& action_low() const { return action_low_; }
  const Vector& action_high() const { return action_high_; }

  // Batched. Throws NumericError on non-finite inputs, ConfigError on shape.
  BatchGaussian encode(const Matrix& states, const Matrix& actions, EncodeTape* tape = nullptr) const;
  nn::GaussianDist encode_one(const Vector& state, const Vector& action) const;
  Matrix encode_mean(const Matrix& states, const Matrix& actions) const;

  // Latents handed to the discriminator for expert pairs: the posterior mean,
  // or mean + std * noise when sample_expert_latents is set.
  Matrix expert_latents(const Matrix& states, const Matrix& actions, Rng& rng) const;

  Matrix decode(const Matrix& states, const Matrix& latents, nn::Tape* tape = nullptr) const;
  Vector decode_one(const Vector& state, const Vector& latent) const;

  // Back-propagates dLoss/dmean through the encoder. Adds parameter gradients
  // when accumulate is true (never when frozen). Returns dLoss/d[s; a].
  Matrix encode_mean_backward(const EncodeTape& tape, const Matrix& d_mean, bool accumulate);
  // Back-propagates dLoss/daction through the decoder. Returns dLoss/d[s; abar].
  Matrix decode_backward(const nn::Tape& tape, const Matrix& d_action, bool accumulate);

  // Evaluates the CVAE loss with one reparameterized draw per pair from the
  // given standard-normal noise (latent_dim x batch). With grad set, adds
  // parameter gradients to both networks, scaled by grad_scale.
  CvaeLoss loss(const Matrix& states, const Matrix& actions, const Matrix& noise, bool grad,
                double grad_scale = 1.0);

  // Adam steps on accumulated gradients. Throw StateError when frozen.
  void step_encoder(const nn::AdamConfig& cfg);
  void step_decoder(const nn::AdamConfig& cfg);
  void zero_grad();

  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  nn::Mlp& encoder() { return encoder_; }
  nn::Mlp& decoder() { return decoder_; }
  const nn::Mlp& encoder() const { return encoder_; }
  const nn::Mlp& decoder() const { return decoder_; }

  // Parameters of both networks and the configuration.
  std::uint64_t digest() const;

  void write(BinaryWriter& out) const;
  // Reads a codec; throws IoError if its dimensions disagree with the given
  // state dimension and action box.
  static ActionCodec read(BinaryReader& in, int state_dim, const Vector& action_low,
                          const Vector& action_high);

 private:
  void check_inputs(const Matrix& states, const Matrix& other, int other_rows,
                    const char* what) const;

  int state_dim_ = 0;
  Vector action_low_;
  Vector action_high_;
  Vector action_mid_;
  Vector action_half_;
  CvaeConfig config_;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  bool frozen_ = false;
};

struct CodecTrainRecord {
  std::vector<double> epoch_loss;       // mean training loss per epoch
  std::vector<double> heldout_recon;    // held-out recon MSE after each epoch
  double heldout_recon_mse = 0.0;       // mean ||a - h(s, mean g(s, a))||^2
  double heldout_kl = 0.0;
  double baseline_mse = 0.0;            // mean ||a - mean action||^2 on held-out
  double mean_action_sq_norm = 0.0;     // mean ||a||^2 on held-out
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
};

struct TrainedCodec {
  ActionCodec codec;
  CodecTrainRecord record;
};

// Minibatch Adam on the CVAE loss over a 90/10 shuffled split of the
// transitions. Throws NumericError on a non-finite loss and QualityError when
// the trained codec reconstructs held-out actions worse than the corpus mean.
// With zero epochs the freshly initialized codec is returned unchecked.
TrainedCodec train_codec(const env::DemoBuffer& demos, const Vector& action_low,
                         const Vector& action_high, const CvaeConfig& config, std::uint64_t seed);

// Transition indices train_codec holds out for a corpus of n pairs and seed.
std::vector<std::size_t> heldout_indices(std::size_t n, std::uint64_t seed);

// Held-out style evaluation on arbitrary pairs: recon MSE through the
// posterior mean and mean KL to the prior.
CodecTrainRecord evaluate_codec(const ActionCodec& codec, const Matrix& states, const Matrix& actions);

void save_codec(const std::string& path, const ActionCodec& codec);
ActionCodec load_codec(const std::string& path, int state_dim, const Vector& action_low,
                       const Vector& action_high);

}  // namespace lapal::latent
