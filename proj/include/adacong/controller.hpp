#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "adacong/adaptive_stream.hpp"
#include "adacong/conformal.hpp"
#include "adacong/gridworld.hpp"
#include "adacong/runrecord.hpp"
#include "adacong/tabular_rl.hpp"

namespace adacong::rl {

enum class GuidanceMode { AdaConG, HardAdaConG, IBRL, SoftIBRL, PureRL };

const char* mode_name(GuidanceMode mode);
GuidanceMode mode_from_name(const std::string& name);

// Exploration schedule: eps = min(0.5 t / S_total + 0.5 e / E_total, 1),
// nondecreasing in both the global step t and the episode e.
struct EpsilonSchedule {
  std::uint64_t total_steps = 1;
  std::uint64_t total_episodes = 1;
  std::optional<double> override_value;  // test hook: pin epsilon

  double value(std::uint64_t t, std::uint64_t e) const;
};

// Static conformal calibration of a policy: roll it out in the environment
// (episodes reset on termination or the step cap) until `n` scored
// state-action pairs are collected, then take the quantile of -log pi(a|s).
struct IlCalibration {
  conformal::CalibrationSet scores;
  conformal::ConformalQuantile quantile;
};

IlCalibration calibrate_policy(const grid::CategoricalPolicy& policy, const grid::GridEnv& env,
                               std::size_t n, double alpha, rng::Stream& stream);

// Identity-mapped set-size uncertainty of a policy row under a quantile:
// |{a : -log p(a) <= q}| with the empty set reported as the full action count.
std::size_t policy_uncertainty(std::span<const double> probs, double quantile);

// Optional KL-guided training objective: task surrogate plus the weighted
// KL(pi_R || pi_I) term. The experiments steer through action selection, so
// this is exposed for completeness rather than wired into the loop.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_guided_loss(std::span<const double> pi_rl, std::span<const double> pi_il,
                      std::span<const double> log_pi_rl_taken,
                      std::span<const double> advantages, double weight);

struct ControllerConfig {
  GuidanceMode mode = GuidanceMode::AdaConG;
  EpsilonSchedule epsilon;
  std::optional<double> force_weight;  // reduction hook for the IL/RL coin
};

// Arbitrates between the IL and RL candidate actions each step.
class GuidanceController {
 public:
  GuidanceController(ControllerConfig config, conformal::ConformalQuantile il_quantile,
                     std::optional<stream::SlidingCalibrator> rl_calibrator);

  struct Choice {
    grid::Action action = grid::Action::Stay;
    bool from_il = false;
    double epsilon = 0.0;
    double weight = 0.0;          // IL probability used (conformal modes)
    std::size_t u_il = 0;
    std::size_t u_rl = 0;
  };

  struct Streams {
    rng::Stream& il_sample;
    rng::Stream& rl_sample;
    rng::Stream& eps_gate;
    rng::Stream& choice;
  };

  // `rl_candidate` must already be sampled from the RL policy this step (the
  // caller also feeds its score into the sliding calibrator).
  Choice select_action(int state, const grid::CategoricalPolicy& pi_il,
                       const SoftQAgent& agent, grid::Action rl_candidate,
                       std::uint64_t t, std::uint64_t e, Streams streams);

  bool uses_conformal() const;
  stream::SlidingCalibrator* rl_calibrator() {
    return rl_calibrator_ ? &*rl_calibrator_ : nullptr;
  }
  const ControllerConfig& config() const { return config_; }
  double il_quantile() const { return il_quantile_.value; }

 private:
  ControllerConfig config_;
  conformal::ConformalQuantile il_quantile_;
  std::optional<stream::SlidingCalibrator> rl_calibrator_;
};

// Full training run for one mode on one environment.
struct GridworldConfig {
  grid::Variant env = grid::Variant::Lava1;
  // IL policies exist only for Lava 1 and Door; Lava 2 reuses the Lava 1
  // expert (the environment shift is the point of that scenario).
  grid::Variant il_source_env = grid::Variant::Lava1;
  std::size_t episodes = 1000;
  std::size_t demo_episodes = 200;
  double bc_smoothing = 0.0;
  SoftQConfig agent;
  double alpha = 0.1;
  std::size_t calibration_size = 1000;  // N
  std::size_t calibration_batch = 128;  // m
  double ema_smoothing = 0.1;
  std::uint64_t epsilon_total_steps = 0;  // 0: episodes * 50
  GuidanceMode mode = GuidanceMode::AdaConG;
  std::optional<double> epsilon_override;
  std::optional<double> force_weight;
};

struct GridworldResult {
  harness::RunRecord record;
  std::vector<double> episode_rewards;
  double final_window_mean = 0.0;  // mean reward over the last 100 episodes
};

GridworldResult run_gridworld(const GridworldConfig& config, std::uint64_t seed,
                              const std::string& run_id);

}  // namespace adacong::rl
