#include "adacong/tabular_rl.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <stdexcept>

namespace adacong::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  buffer_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (buffer_.size() < capacity_) {
    buffer_.push_back(t);
  } else {
    buffer_[next_] = t;
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, rng::Stream& stream) const {
  if (buffer_.empty()) throw std::logic_error("replay buffer is empty");
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(buffer_[stream.uniform_index(buffer_.size())]);
  }
  return out;
}

SoftQAgent::SoftQAgent(int num_states, SoftQConfig config)
    : q_(static_cast<std::size_t>(num_states), grid::kNumActions), config_(config) {
  if (!(config_.entropy_temp > 0.0)) {
    throw std::invalid_argument("entropy temperature must be positive");
  }
  if (!(config_.discount > 0.0 && config_.discount < 1.0)) {
    throw std::invalid_argument("discount must lie in (0, 1)");
  }
}

double SoftQAgent::soft_value(int state) const {
  const double tau = config_.entropy_temp;
  double max_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid::kNumActions; ++a) max_q = std::max(max_q, q(state, a));
  double sum = 0.0;
  for (int a = 0; a < grid::kNumActions; ++a) {
    sum += std::exp((q(state, a) - max_q) / tau);
  }
  return max_q + tau * std::log(sum);
}

void SoftQAgent::update(std::span<const Transition> batch) {
  for (const auto& t : batch) {
    const double target =
        t.reward + (t.done ? 0.0 : config_.discount * soft_value(t.next_state));
    auto& cell = q_.at(static_cast<std::size_t>(t.state), static_cast<std::size_t>(t.action));
    cell += config_.learning_rate * (target - cell);
  }
}

std::array<double, grid::kNumActions> SoftQAgent::policy_row(int state) const {
  const double tau = config_.entropy_temp;
  std::array<double, grid::kNumActions> probs{};
  double max_q = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid::kNumActions; ++a) max_q = std::max(max_q, q(state, a));
  double sum = 0.0;
  for (int a = 0; a < grid::kNumActions; ++a) {
    probs[static_cast<std::size_t>(a)] = std::exp((q(state, a) - max_q) / tau);
    sum += probs[static_cast<std::size_t>(a)];
  }
  const double keep = 1.0 - grid::kNumActions * config_.policy_floor;
  for (auto& p : probs) p = keep * (p / sum) + config_.policy_floor;
  return probs;
}

int SoftQAgent::sample_action(int state, rng::Stream& stream) const {
  const auto probs = policy_row(state);
  return stream.categorical(probs);
}

grid::CategoricalPolicy SoftQAgent::policy() const {
  grid::CategoricalPolicy out(num_states(), 0.0);
  for (int s = 0; s < num_states(); ++s) {
    // policy_row already applies the floor; install rows verbatim.
    auto probs = policy_row(s);
    out.set_row(s, probs);
  }
  return out;
}

}  // namespace adacong::rl
