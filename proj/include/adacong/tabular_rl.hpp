#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "adacong/gridworld.hpp"
#include "adacong/rng.hpp"

namespace adacong::rl {

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return buffer_.size(); }
  std::vector<Transition> sample(std::size_t batch, rng::Stream& stream) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // ring position once full
  std::vector<Transition> buffer_;
};

struct SoftQConfig {
  double learning_rate = 0.1;
  double discount = 0.99;       // MDP discount
  double entropy_temp = 0.5;    // Boltzmann temperature for the derived policy
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 128;
  double policy_floor = 1e-6;
};

// Tabular soft Q-learning. The update target uses the soft value
// V(s') = tau * log sum_a exp(Q(s',a)/tau) and the derived policy is
// pi(a|s) proportional to exp(Q(s,a)/tau), floored like every other policy row.
class SoftQAgent {
 public:
  SoftQAgent(int num_states, SoftQConfig config);

  void update(std::span<const Transition> batch);

  double q(int state, int action) const {
    return q_.at(static_cast<std::size_t>(state), static_cast<std::size_t>(action));
  }
  double soft_value(int state) const;
  std::array<double, grid::kNumActions> policy_row(int state) const;
  int sample_action(int state, rng::Stream& stream) const;

  const SoftQConfig& config() const { return config_; }
  int num_states() const { return static_cast<int>(q_.rows); }

  // Snapshot of the derived policy over all states.
  grid::CategoricalPolicy policy() const;

 private:
  tinylearn::Matrix q_;
  SoftQConfig config_;
};

}  // namespace adacong::rl
