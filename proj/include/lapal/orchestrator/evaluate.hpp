#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "lapal/envsim/env.hpp"
#include "lapal/latentact/codec.hpp"
#include "lapal/sacgen/agent.hpp"

namespace lapal::orch {

using nn::Matrix;
using nn::Vector;

inline constexpr int kDefaultEvalEpisodes = 16;
// Base seed of the evaluation episode set shared by every run, so returns and
// their expert/random references are measured on the same initial states.
inline constexpr std::uint64_t kEvalSeed = 0x6576616c;

// Something that maps a batch of states to raw actions.
struct PolicyBundle {
  enum class Kind { kExpert, kRandom, kRawActor, kLatentActor };
  Kind kind = Kind::kExpert;
  std::shared_ptr<const sac::SacAgent> agent;
  std::shared_ptr<const latent::ActionCodec> codec;  // latent actors only
  std::uint64_t random_seed = 0;                     // random policy only

  static PolicyBundle expert();
  static PolicyBundle random(std::uint64_t seed);
  static PolicyBundle raw_actor(std::shared_ptr<const sac::SacAgent> agent);
  static PolicyBundle latent_actor(std::shared_ptr<const sac::SacAgent> agent,
                                   std::shared_ptr<const latent::ActionCodec> codec);

  // Deterministic raw actions for a batch of states (random draws from rng
  // for the random policy).
  Matrix actions(const env::Env& env, const Matrix& states, Rng& rng) const;
};

// Maps a squashed actor output in (-1, 1) to the env action box.
Matrix scale_to_box(const env::EnvSpec& spec, const Matrix& u);
// Inverse of scale_to_box.
Matrix normalize_from_box(const env::EnvSpec& spec, const Matrix& a);

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population std over episodes
  std::vector<double> returns;
};

// Rolls out n_episodes fresh episodes (reset seeds episode_seed(seed, i)) in
// lockstep and sums the ground-truth eval reward.
EvalResult evaluate_policy(const PolicyBundle& policy, const env::Env& env, int n_episodes,
                           std::uint64_t seed);

// Expert and uniform-random mean returns on the shared evaluation set.
struct ReturnReference {
  double expert = 0.0;
  double random = 0.0;
  // (R - random) / (expert - random): 0 for the random policy, 1 for the expert.
  double normalize(double r) const { return (r - random) / (expert - random); }
};

ReturnReference reference_returns(const env::Env& env, int n_episodes = kDefaultEvalEpisodes,
                                  std::uint64_t seed = kEvalSeed);

}  // namespace lapal::orch
