#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lapal/adversary/discriminator.hpp"
#include "lapal/common/errors.hpp"
#include "lapal/envsim/demos.hpp"
#include "lapal/latentact/codec.hpp"
#include "lapal/orchestrator/evaluate.hpp"
#include "lapal/sacgen/agent.hpp"

namespace lapal::orch {

enum class Algo { kGail, kLapalAgnostic, kLapalAware };
std::string to_string(Algo a);
// Accepts "gail", "lapal_agnostic"/"lapal-agnostic", "lapal_aware"/"lapal-aware".
Algo algo_from_string(const std::string& name);
inline bool is_lapal(Algo a) { return a != Algo::kGail; }

struct RunConfig {
  Algo algo = Algo::kLapalAgnostic;
  std::string env_id = "pointmass";
  std::int64_t total_env_steps = 20000;
  int steps_per_iteration = 1000;
  int disc_updates_per_iteration = 500;
  int gen_updates_per_iteration = 1000;
  std::int64_t eval_every = 1000;
  int eval_episodes = kDefaultEvalEpisodes;
  std::uint64_t eval_seed = kEvalSeed;

  // Each discriminator minibatch holds batch_size / 2 expert and agent pairs.
  int batch_size = 256;
  std::vector<int> disc_hidden{256, 256};
  double disc_lr = 3e-5;
  // Standardize discriminator state inputs with expert-corpus statistics.
  bool normalize_disc_states = true;
  std::size_t replay_capacity = 100000;
  // Env steps at the start of a run whose policy output is drawn uniformly.
  std::int64_t warmup_steps = 1000;
  sac::SacConfig sac;

  // Codec settings; used for pretraining inside the run when no codec is given.
  latent::CvaeConfig cvae;
  // Task-aware learning rates of the encoder (with the discriminator) and the
  // decoder (with the actor).
  double encoder_lr = 3e-4;
  double decoder_lr = 3e-4;
  // Start lapal runs from a randomly initialized codec.
  bool skip_codec_pretraining = false;
  // Critic and discriminator consume the policy's emitted latent instead of
  // re-encoding the stored raw action. Agnostic mode only.
  bool reuse_emitted_latents = false;
  // Task-aware only: weight of an auxiliary codec loss added to both codec
  // updates; 0 disables it.
  double aux_recon_weight = 0.0;

  // Abort when an evaluation after half the budget falls below the random
  // policy, or when any loss turns non-finite.
  bool divergence_guard = true;

  // Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct CurveRow {
  std::int64_t env_steps = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double normalized_return = 0.0;
  double disc_loss = 0.0;    // mean over the last discriminator phase
  double critic_loss = 0.0;  // mean of both critics over the last generator phase
  double actor_loss = 0.0;
  double alpha = 0.0;
  double recon_mse = 0.0;  // codec reconstruction error on the demos; NaN for gail
  std::uint64_t agent_digest = 0;
  std::uint64_t disc_digest = 0;
  std::uint64_t codec_digest = 0;
};

struct LearningCurve {
  std::vector<CurveRow> rows;
  ReturnReference reference;

  // First env-step count whose normalized return reaches the threshold, if any.
  std::optional<std::int64_t> steps_to_reach(double normalized) const;
  // Column order of to_csv.
  static const std::vector<std::string>& csv_columns();
  std::string to_csv() const;
};

// Per-update losses and end-of-iteration digests, for differential tests.
struct IterationTrace {
  std::int64_t env_steps = 0;
  std::vector<double> disc_losses;
  std::vector<double> critic_losses;
  std::vector<double> actor_losses;
  std::uint64_t agent_digest = 0;
  std::uint64_t disc_digest = 0;
  std::uint64_t codec_digest = 0;
};

// Serialized learner state: algo, env id, agent, discriminator and codec.
struct RunCheckpoint {
  std::int64_t env_steps = 0;
  std::string bytes;
};

struct LoadedCheckpoint {
  Algo algo = Algo::kGail;
  std::string env_id;
  std::int64_t env_steps = 0;
  std::shared_ptr<sac::SacAgent> agent;
  std::shared_ptr<adv::Discriminator> disc;
  std::shared_ptr<latent::ActionCodec> codec;  // null for gail

  PolicyBundle policy() const;
};

// Binary layout: magic "LPRC", u32 version, u32 algo, env id, i64 env steps,
// u32 has_codec, [codec], agent, discriminator.
std::string encode_checkpoint(Algo algo, const std::string& env_id, std::int64_t env_steps,
                              const sac::SacAgent& agent, const adv::Discriminator& disc,
                              const latent::ActionCodec* codec);
LoadedCheckpoint decode_checkpoint(const std::string& bytes);

struct RunResult {
  LearningCurve curve;
  RunCheckpoint initial;
  RunCheckpoint final;
  std::vector<IterationTrace> trace;  // filled when RunOptions::record_trace
  std::shared_ptr<sac::SacAgent> agent;
  std::shared_ptr<adv::Discriminator> disc;
  std::shared_ptr<latent::ActionCodec> codec;  // null for gail
  std::uint64_t codec_digest_before = 0;
  std::uint64_t demo_digest_before = 0;

  PolicyBundle policy() const;
};

struct RunOptions {
  bool record_trace = false;
  // Stop after this many iterations (0: run the whole budget).
  int max_iterations = 0;
  // Called after every evaluation row; returning false stops training early.
  std::function<bool(const CurveRow&)> on_eval;
};

// Raised by the divergence detector. what() carries the diagnostic summary.
class DivergenceError : public QualityError {
 public:
  DivergenceError(const std::string& what, std::string diagnostics)
      : QualityError(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

// Adversarial imitation. For lapal modes codec must hold a pretrained codec
// unless config.skip_codec_pretraining is set or it is empty, in which case
// one is trained (or freshly initialized) from the demos with the run seed.
// Gail runs reject a codec. The demos are never modified.
RunResult run_training(const RunConfig& config, const env::DemoBuffer& demos,
                       std::optional<latent::ActionCodec> codec, std::uint64_t seed,
                       const RunOptions& options = {});

// Soft actor-critic on the ground-truth reward in the raw action space. The
// discriminator and codec settings of config are ignored.
LearningCurve run_sac_true_reward(const RunConfig& config, std::uint64_t seed,
                                  const RunOptions& options = {});

// Composes the source latent actor with a codec trained only on the target
// demos. Throws ConfigError when the latent dimensions disagree.
struct TransferResult {
  PolicyBundle policy;
  latent::TrainedCodec target_codec;
};
TransferResult transfer_policy(std::shared_ptr<const sac::SacAgent> source_actor,
                               const env::DemoBuffer& target_demos,
                               const latent::CvaeConfig& cvae_config, std::uint64_t seed);

}  // namespace lapal::orch
