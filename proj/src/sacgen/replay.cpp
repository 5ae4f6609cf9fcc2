#include "lapal/sacgen/replay.hpp"

#include "lapal/common/errors.hpp"

namespace lapal::sac {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim, int emitted_dim)
    : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  if (state_dim <= 0 || action_dim <= 0 || emitted_dim <= 0) {
    throw ConfigError("replay dims must be positive");
  }
  const auto cap = static_cast<Eigen::Index>(capacity);
  states_.resize(state_dim, cap);
  actions_.resize(action_dim, cap);
  emitted_.resize(emitted_dim, cap);
  next_states_.resize(state_dim, cap);
  done_.resize(capacity);
}

void ReplayBuffer::push(const Vector& state, const Vector& action, const Vector& emitted,
                        const Vector& next_state, bool done) {
  if (state.size() != states_.rows() || next_state.size() != states_.rows() ||
      action.size() != actions_.rows() || emitted.size() != emitted_.rows()) {
    throw ConfigError("replay push: transition dims do not match the buffer");
  }
  const auto c = static_cast<Eigen::Index>(cursor_);
  states_.col(c) = state;
  actions_.col(c) = action;
  emitted_.col(c) = emitted;
  next_states_.col(c) = next_state;
  done_[cursor_] = done ? 1 : 0;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++pushed_;
}

void ReplayBuffer::push(const AgentTransition& t) {
  push(t.state, t.action, t.emitted, t.next_state, t.done);
}

AgentTransition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw StateError("replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  const auto c = static_cast<Eigen::Index>((oldest + i) % capacity_);
  return {states_.col(c), actions_.col(c), emitted_.col(c), next_states_.col(c),
          done_[static_cast<std::size_t>(c)] != 0};
}

ReplayBatch ReplayBuffer::gather(const std::vector<std::size_t>& slots) const {
  ReplayBatch b;
  const auto n = static_cast<Eigen::Index>(slots.size());
  b.states.resize(states_.rows(), n);
  b.actions.resize(actions_.rows(), n);
  b.emitted.resize(emitted_.rows(), n);
  b.next_states.resize(states_.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto c = static_cast<Eigen::Index>(slots[static_cast<std::size_t>(j)]);
    b.states.col(j) = states_.col(c);
    b.actions.col(j) = actions_.col(c);
    b.emitted.col(j) = emitted_.col(c);
    b.next_states.col(j) = next_states_.col(c);
  }
  b.indices = slots;
  return b;
}

ReplayBatch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw StateError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> slots(n);
  for (auto& s : slots) s = pick(rng);
  return gather(slots);
}

}  // namespace lapal::sac
