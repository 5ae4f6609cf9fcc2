#pragma once

#include <cstdint>
#include <type_traits>
#include <vector>

#include "lapal/common/rng.hpp"
#include "lapal/nncore/mlp.hpp"

namespace lapal::sac {

using nn::Matrix;
using nn::Vector;

// One agent step. There is deliberately no reward: rewards come from the
// current discriminator at sampling time.
struct AgentTransition {
  Vector state;
  Vector action;  // raw action sent to the environment
  Vector emitted;  // the policy's squashed output (latent or normalized raw)
  Vector next_state;
  bool done = false;
};

template <typename T>
concept HasReward = requires(T t) { t.reward; };
static_assert(!HasReward<AgentTransition>, "agent transitions must not carry a reward");

struct ReplayBatch {
  Matrix states;       // state_dim x n
  Matrix actions;      // action_dim x n
  Matrix emitted;      // emitted_dim x n
  Matrix next_states;  // state_dim x n
  std::vector<std::size_t> indices;
};

// Fixed-capacity FIFO ring with uniform sampling with replacement.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim, int emitted_dim);

  void push(const AgentTransition& t);
  void push(const Vector& state, const Vector& action, const Vector& emitted,
            const Vector& next_state, bool done);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const { return pushed_; }

  // i-th oldest element currently held.
  AgentTransition at(std::size_t i) const;

  // Throws StateError when empty.
  ReplayBatch sample(std::size_t n, Rng& rng) const;
  ReplayBatch gather(const std::vector<std::size_t>& slots) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::uint64_t pushed_ = 0;
  Matrix states_;
  Matrix actions_;
  Matrix emitted_;
  Matrix next_states_;
  std::vector<char> done_;
};

}  // namespace lapal::sac
