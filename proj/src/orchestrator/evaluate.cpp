#include "lapal/orchestrator/evaluate.hpp"

#include <cmath>

#include "lapal/common/errors.hpp"
#include "lapal/envsim/demos.hpp"

namespace lapal::orch {

PolicyBundle PolicyBundle::expert() { return {}; }

PolicyBundle PolicyBundle::random(std::uint64_t seed) {
  PolicyBundle b;
  b.kind = Kind::kRandom;
  b.random_seed = seed;
  return b;
}

PolicyBundle PolicyBundle::raw_actor(std::shared_ptr<const sac::SacAgent> agent) {
  if (!agent) throw ConfigError("raw actor bundle needs an agent");
  PolicyBundle b;
  b.kind = Kind::kRawActor;
  b.agent = std::move(agent);
  return b;
}

PolicyBundle PolicyBundle::latent_actor(std::shared_ptr<const sac::SacAgent> agent,
                                        std::shared_ptr<const latent::ActionCodec> codec) {
  if (!agent || !codec) throw ConfigError("latent actor bundle needs an agent and a codec");
  if (agent->u_dim() != codec->latent_dim()) {
    throw ConfigError("actor emits " + std::to_string(agent->u_dim()) +
                      "-dim latents but the decoder expects " +
                      std::to_string(codec->latent_dim()));
  }
  PolicyBundle b;
  b.kind = Kind::kLatentActor;
  b.agent = std::move(agent);
  b.codec = std::move(codec);
  return b;
}

Matrix scale_to_box(const env::EnvSpec& spec, const Matrix& u) {
  const Vector mid = 0.5 * (spec.action_high + spec.action_low);
  const Vector half = 0.5 * (spec.action_high - spec.action_low);
  return (u.array().colwise() * half.array()).colwise() + mid.array();
}

Matrix normalize_from_box(const env::EnvSpec& spec, const Matrix& a) {
  const Vector mid = 0.5 * (spec.action_high + spec.action_low);
  const Vector half = 0.5 * (spec.action_high - spec.action_low);
  return (a.array().colwise() - mid.array()).colwise() / half.array();
}

Matrix PolicyBundle::actions(const env::Env& env, const Matrix& states, Rng& rng) const {
  const auto& spec = env.spec();
  switch (kind) {
    case Kind::kExpert: {
      Matrix a(spec.action_dim, states.cols());
      for (Eigen::Index j = 0; j < states.cols(); ++j) a.col(j) = env.scripted_expert(states.col(j));
      return a;
    }
    case Kind::kRandom: {
      Matrix a(spec.action_dim, states.cols());
      for (Eigen::Index j = 0; j < states.cols(); ++j) {
        for (int i = 0; i < spec.action_dim; ++i) {
          a(i, j) = std::uniform_real_distribution<double>(spec.action_low(i), spec.action_high(i))(rng);
        }
      }
      return a;
    }
    case Kind::kRawActor:
      return scale_to_box(spec, agent->act(states, true, rng));
    case Kind::kLatentActor:
      return codec->decode(states, agent->act(states, true, rng));
  }
  throw StateError("unknown policy kind");
}

EvalResult evaluate_policy(const PolicyBundle& policy, const env::Env& env, int n_episodes,
                           std::uint64_t seed) {
  if (n_episodes <= 0) throw ConfigError("evaluation needs at least one episode");
  const auto& spec = env.spec();
  Matrix states(spec.state_dim, n_episodes);
  for (int i = 0; i < n_episodes; ++i) states.col(i) = env.reset(env::episode_seed(seed, i));
  Rng rng(derive_seed(seed, policy.random_seed + 0x72616e64));
  EvalResult r;
  r.returns.assign(static_cast<std::size_t>(n_episodes), 0.0);
  for (int t = 0; t < spec.horizon; ++t) {
    const Matrix a = policy.actions(env, states, rng);
    for (int i = 0; i < n_episodes; ++i) {
      const env::StepResult sr = env.step(states.col(i), a.col(i), t);
      r.returns[static_cast<std::size_t>(i)] += sr.eval_reward;
      states.col(i) = sr.next_state;
    }
  }
  for (double x : r.returns) r.mean += x;
  r.mean /= n_episodes;
  for (double x : r.returns) r.std += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(r.std / n_episodes);
  return r;
}

ReturnReference reference_returns(const env::Env& env, int n_episodes, std::uint64_t seed) {
  ReturnReference ref;
  ref.expert = evaluate_policy(PolicyBundle::expert(), env, n_episodes, seed).mean;
  ref.random = evaluate_policy(PolicyBundle::random(0), env, n_episodes, seed).mean;
  if (!(ref.expert > ref.random)) {
    throw QualityError("expert return " + std::to_string(ref.expert) +
                       " does not beat the random policy " + std::to_string(ref.random));
  }
  return ref;
}

}  // namespace lapal::orch
