#include "adacong/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adacong/weighting.hpp"

namespace adacong::rl {

const char* mode_name(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::AdaConG: return "AdaConG";
    case GuidanceMode::HardAdaConG: return "HardAdaConG";
    case GuidanceMode::IBRL: return "IBRL";
    case GuidanceMode::SoftIBRL: return "SoftIBRL";
    case GuidanceMode::PureRL: return "PureRL";
  }
  return "?";
}

GuidanceMode mode_from_name(const std::string& name) {
  if (name == "AdaConG") return GuidanceMode::AdaConG;
  if (name == "HardAdaConG") return GuidanceMode::HardAdaConG;
  if (name == "IBRL") return GuidanceMode::IBRL;
  if (name == "SoftIBRL") return GuidanceMode::SoftIBRL;
  if (name == "PureRL") return GuidanceMode::PureRL;
  throw std::invalid_argument("unknown guidance mode '" + name + "'");
}

double EpsilonSchedule::value(std::uint64_t t, std::uint64_t e) const {
  if (override_value) return *override_value;
  const double by_steps = 0.5 * static_cast<double>(t) / static_cast<double>(total_steps);
  const double by_episodes =
      0.5 * static_cast<double>(e) / static_cast<double>(total_episodes);
  return std::min(by_steps + by_episodes, 1.0);
}

IlCalibration calibrate_policy(const grid::CategoricalPolicy& policy, const grid::GridEnv& env,
                               std::size_t n, double alpha, rng::Stream& stream) {
  if (n == 0) throw std::invalid_argument("calibrate_policy: n must be positive");
  IlCalibration out;
  while (out.scores.size() < n) {
    grid::Cell c = env.start;
    for (int k = 1; k <= env.max_steps && out.scores.size() < n; ++k) {
      const int s = env.state_id(c);
      const int a = policy.sample(s, stream);
      out.scores.add(conformal::score_neg_log_prob(
          policy.prob(s, static_cast<grid::Action>(a))));
      const auto result = grid::step(env, c, static_cast<grid::Action>(a), k);
      if (result.done) break;
      c = result.next;
    }
  }
  out.quantile = conformal::compute_quantile(out.scores, alpha);
  return out;
}

std::size_t policy_uncertainty(std::span<const double> probs, double quantile) {
  std::size_t members = 0;
  for (double p : probs) {
    if (conformal::score_neg_log_prob(p) <= quantile) ++members;
  }
  return members == 0 ? probs.size() : members;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], 1e-12)));
  }
  return kl;
}

double kl_guided_loss(std::span<const double> pi_rl, std::span<const double> pi_il,
                      std::span<const double> log_pi_rl_taken,
                      std::span<const double> advantages, double weight) {
  if (log_pi_rl_taken.size() != advantages.size()) {
    throw std::invalid_argument("kl_guided_loss: advantage/log-prob size mismatch");
  }
  double task = 0.0;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    task += -log_pi_rl_taken[i] * advantages[i];
  }
  if (!advantages.empty()) task /= static_cast<double>(advantages.size());
  return task + weight * kl_divergence(pi_rl, pi_il);
}

GuidanceController::GuidanceController(ControllerConfig config,
                                       conformal::ConformalQuantile il_quantile,
                                       std::optional<stream::SlidingCalibrator> rl_calibrator)
    : config_(config), il_quantile_(il_quantile), rl_calibrator_(std::move(rl_calibrator)) {
  if (uses_conformal() && !rl_calibrator_) {
    throw std::invalid_argument("conformal guidance modes need an RL calibrator");
  }
}

bool GuidanceController::uses_conformal() const {
  return config_.mode == GuidanceMode::AdaConG || config_.mode == GuidanceMode::HardAdaConG;
}

GuidanceController::Choice GuidanceController::select_action(
    int state, const grid::CategoricalPolicy& pi_il, const SoftQAgent& agent,
    grid::Action rl_candidate, std::uint64_t t, std::uint64_t e, Streams streams) {
  Choice choice;
  choice.action = rl_candidate;
  choice.epsilon = config_.epsilon.value(t, e);

  if (uses_conformal()) {
    choice.u_il = policy_uncertainty(pi_il.row(state), il_quantile_.value);
    choice.u_rl =
        policy_uncertainty(agent.policy_row(state), rl_calibrator_->current_quantile());
  }

  switch (config_.mode) {
    case GuidanceMode::PureRL:
      return choice;

    case GuidanceMode::IBRL: {
      const auto a_il = static_cast<grid::Action>(pi_il.sample(state, streams.il_sample));
      const double q_il = agent.q(state, static_cast<int>(a_il));
      const double q_rl = agent.q(state, static_cast<int>(rl_candidate));
      if (q_il > q_rl) {  // ties go to the RL candidate
        choice.action = a_il;
        choice.from_il = true;
      }
      return choice;
    }

    case GuidanceMode::SoftIBRL: {
      const auto a_il = static_cast<grid::Action>(pi_il.sample(state, streams.il_sample));
      const double tau = agent.config().entropy_temp;
      const double q_il = agent.q(state, static_cast<int>(a_il)) / tau;
      const double q_rl = agent.q(state, static_cast<int>(rl_candidate)) / tau;
      const double max_q = std::max(q_il, q_rl);
      const double p_il = std::exp(q_il - max_q) /
                          (std::exp(q_il - max_q) + std::exp(q_rl - max_q));
      if (streams.choice.bernoulli(p_il)) {
        choice.action = a_il;
        choice.from_il = true;
      }
      return choice;
    }

    case GuidanceMode::AdaConG:
    case GuidanceMode::HardAdaConG: {
      if (streams.eps_gate.uniform() < choice.epsilon) return choice;  // explore via RL
      const double u_il = static_cast<double>(choice.u_il);
      const double u_rl = static_cast<double>(choice.u_rl);
      double w;
      if (config_.mode == GuidanceMode::AdaConG) {
        w = weighting::weight(weighting::WeightRule::relative_softmax(), u_il, u_rl);
      } else {
        w = weighting::weight(weighting::WeightRule::hard_argmax(), u_il, u_rl);
      }
      if (config_.force_weight) w = *config_.force_weight;
      choice.weight = w;
      const bool take_il = w >= 1.0 ? true : (w <= 0.0 ? false : streams.choice.bernoulli(w));
      if (take_il) {
        choice.action = static_cast<grid::Action>(pi_il.sample(state, streams.il_sample));
        choice.from_il = true;
      }
      return choice;
    }
  }
  throw std::logic_error("unreachable guidance mode");
}

GridworldResult run_gridworld(const GridworldConfig& config, std::uint64_t seed,
                              const std::string& run_id) {
  const auto env = grid::make_env(config.env);
  const auto il_env = grid::make_env(config.il_source_env);
  const int num_states = env.num_states();

  rng::Stream demo_stream(seed, "gw-demos");
  rng::Stream il_cal_stream(seed, "gw-il-cal");
  rng::Stream il_sample(seed, "gw-il-sample");
  rng::Stream rl_sample(seed, "gw-rl-sample");
  rng::Stream eps_gate(seed, "gw-eps-gate");
  rng::Stream choice_stream(seed, "gw-choice");
  rng::Stream replay_stream(seed, "gw-replay");

  const auto demos = grid::generate_expert_demos(il_env, config.demo_episodes, demo_stream);
  const auto pi_il = grid::behavior_clone(demos, num_states, config.bc_smoothing);

  SoftQAgent agent(num_states, config.agent);
  ReplayBuffer replay(config.agent.replay_capacity);

  const bool conformal_mode =
      config.mode == GuidanceMode::AdaConG || config.mode == GuidanceMode::HardAdaConG;

  ControllerConfig controller_config;
  controller_config.mode = config.mode;
  controller_config.epsilon.total_steps =
      config.epsilon_total_steps > 0 ? config.epsilon_total_steps : config.episodes * 50;
  controller_config.epsilon.total_episodes = config.episodes;
  controller_config.epsilon.override_value = config.epsilon_override;
  controller_config.force_weight = config.force_weight;

  conformal::ConformalQuantile il_quantile;
  std::optional<stream::SlidingCalibrator> rl_calibrator;
  if (conformal_mode) {
    // Calibrate the IL policy in the target environment, then warm-start the
    // RL window from the same scores and quantile.
    const auto il_cal = calibrate_policy(pi_il, env, config.calibration_size, config.alpha,
                                         il_cal_stream);
    il_quantile = il_cal.quantile;
    stream::SlidingConfig sliding;
    sliding.window_capacity = config.calibration_size;
    sliding.batch_size = config.calibration_batch;
    sliding.alpha = config.alpha;
    sliding.smoothing = config.ema_smoothing;
    rl_calibrator =
        stream::SlidingCalibrator::warm_start(il_cal.scores, il_cal.quantile.value, sliding);
  }
  GuidanceController controller(controller_config, il_quantile, std::move(rl_calibrator));

  harness::RunRecord record;
  record.run_id = run_id;
  record.seed = seed;

  GridworldResult result;
  result.episode_rewards.reserve(config.episodes);

  std::vector<double> pending_scores;
  pending_scores.reserve(config.calibration_batch);
  std::uint64_t t = 0;

  for (std::uint64_t e = 1; e <= config.episodes; ++e) {
    grid::Cell c = env.start;
    double ep_reward = 0.0;
    double u_il_sum = 0.0;
    double u_rl_sum = 0.0;
    double w_sum = 0.0;
    std::size_t steps = 0;
    bool reached_goal = false;

    for (int k = 1; k <= env.max_steps; ++k) {
      ++t;
      const int s = env.state_id(c);

      // RL candidate is drawn every step; its score feeds the sliding window
      // in batches of m.
      const auto a_rl = static_cast<grid::Action>(agent.sample_action(s, rl_sample));
      if (conformal_mode) {
        const auto probs = agent.policy_row(s);
        pending_scores.push_back(conformal::score_neg_log_prob(
            probs[static_cast<std::size_t>(a_rl)]));
        if (pending_scores.size() == config.calibration_batch) {
          controller.rl_calibrator()->update(pending_scores);
          pending_scores.clear();
        }
      }

      GuidanceController::Streams streams{il_sample, rl_sample, eps_gate, choice_stream};
      const auto choice = controller.select_action(s, pi_il, agent, a_rl, t, e, streams);
      if (conformal_mode) {
        u_il_sum += static_cast<double>(choice.u_il);
        u_rl_sum += static_cast<double>(choice.u_rl);
        w_sum += choice.weight;
      }

      const auto sr = grid::step(env, c, choice.action, k);
      ep_reward += sr.reward;
      replay.push({s, static_cast<int>(choice.action), sr.reward,
                   env.state_id(sr.next), sr.done});
      if (replay.size() >= config.agent.batch_size) {
        const auto batch = replay.sample(config.agent.batch_size, replay_stream);
        agent.update(batch);
      }
      ++steps;
      if (sr.done) {
        reached_goal = sr.next == env.goal;
        break;
      }
      c = sr.next;
    }

    result.episode_rewards.push_back(ep_reward);
    const auto ep = static_cast<std::int64_t>(e);
    record.log(ep, "train", "episode_reward", ep_reward);
    record.log(ep, "train", "episode_steps", static_cast<double>(steps));
    record.log(ep, "train", "reached_goal", reached_goal ? 1.0 : 0.0);
    if (conformal_mode && steps > 0) {
      record.log(ep, "train", "mean_u_il", u_il_sum / static_cast<double>(steps));
      record.log(ep, "train", "mean_u_rl", u_rl_sum / static_cast<double>(steps));
      record.log(ep, "train", "mean_weight", w_sum / static_cast<double>(steps));
    }
  }

  const std::size_t window = std::min<std::size_t>(100, result.episode_rewards.size());
  result.final_window_mean =
      std::accumulate(result.episode_rewards.end() - static_cast<std::ptrdiff_t>(window),
                      result.episode_rewards.end(), 0.0) /
      static_cast<double>(window);
  record.summary["final100_reward"] = result.final_window_mean;
  record.summary["total_steps"] = static_cast<double>(t);
  result.record = std::move(record);
  return result;
}

}  // namespace adacong::rl
