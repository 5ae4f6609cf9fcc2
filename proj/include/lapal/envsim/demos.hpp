#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lapal/envsim/env.hpp"

namespace lapal::env {

struct Transition {
  Vector state;
  Vector action;
  Vector next_state;
  bool done = false;
  double eval_reward = 0.0;  // ground truth, never shown to a learner
};

// Expert corpus B_E.
struct DemoBuffer {
  std::string env_id;
  std::uint64_t env_digest = 0;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  std::vector<Transition> transitions;
  std::vector<std::size_t> episode_starts;

  std::size_t size() const { return transitions.size(); }
  int num_episodes() const { return static_cast<int>(episode_starts.size()); }
  std::vector<double> episode_returns() const;
  Eigen::MatrixXd states() const;   // state_dim x N
  Eigen::MatrixXd actions() const;  // action_dim x N
  // Throws ConfigError when empty or when dims are inconsistent.
  void validate() const;
  std::uint64_t digest() const;
};

struct DemoQuality {
  double success_rate = 0.0;
  double expert_mean_return = 0.0;
  double random_mean_return = 0.0;
  // random / expert mean return; both are negative, so > 1 means the expert
  // collects less cost than uniform random torques.
  double competence_factor = 0.0;
  bool accepted = false;
};

inline constexpr double kMinExpertSuccessRate = 0.9;

using Policy = std::function<Vector(const Vector& state, int step)>;

// Seed of the i-th episode derived from a run seed.
std::uint64_t episode_seed(std::uint64_t seed, int episode);

// Sum of eval rewards over one episode.
double episode_return(const Env& env, const Policy& policy, std::uint64_t reset_seed);

// Mean return of a uniform-random policy over n episodes.
double random_policy_return(const Env& env, int n_episodes, std::uint64_t seed);

// Rolls out the scripted expert. Throws QualityError when more than 10% of
// episodes end outside the goal success radius.
DemoBuffer collect_demos(const Env& env, int n_episodes, std::uint64_t seed);
DemoQuality assess_demos(const Env& env, const DemoBuffer& demos, std::uint64_t seed);

// Binary layout: magic "LPDB", u32 version, env id, u64 env digest, u32
// state_dim, u32 action_dim, u64 n_transitions, u32 horizon, u32 n_episodes,
// u64 episode starts, then per transition state, action, next_state, done,
// eval_reward as little-endian f64.
std::string encode_demos(const DemoBuffer& demos);
DemoBuffer decode_demos(const std::string& bytes);
void save_demos(const std::string& path, const DemoBuffer& demos);
DemoBuffer load_demos(const std::string& path);
std::string demo_summary(const DemoBuffer& demos, const DemoQuality& quality);

}  // namespace lapal::env
