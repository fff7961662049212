#include "adacong/weighting.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace adacong::weighting {

double uncertainty(const UncertaintyMapping& mapping, std::size_t set_size) {
  const std::size_t k = mapping.universe_size;
  if (set_size > k) {
    throw std::invalid_argument("uncertainty: set size exceeds the universe");
  }
  switch (mapping.kind) {
    case UncertaintyKind::NormalizedSetSize:
      if (k < 2) {
        throw std::invalid_argument("normalized set-size mapping needs K >= 2");
      }
      if (set_size == 0) return 1.0;  // no candidate conforms: maximal uncertainty
      return static_cast<double>(set_size - 1) / static_cast<double>(k - 1);
    case UncertaintyKind::Identity:
      if (set_size == 0) return static_cast<double>(k);
      return static_cast<double>(set_size);
  }
  throw std::logic_error("unreachable uncertainty kind");
}

WeightRule WeightRule::exp_decay(double gamma) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("exp-decay weight requires gamma > 0");
  }
  return {Kind::ExpDecay, gamma};
}

double weight(const WeightRule& rule, double u, std::optional<double> u_other) {
  if (!(u >= 0.0)) {
    throw std::invalid_argument("weight: uncertainty must be >= 0");
  }
  switch (rule.kind) {
    case WeightRule::Kind::ExpDecay:
      return std::exp(-rule.gamma * u);
    case WeightRule::Kind::HardZero:
      return u == 0.0 ? 1.0 : 0.0;
    case WeightRule::Kind::RelativeSoftmax: {
      if (!u_other) {
        throw std::invalid_argument("relative softmax weight needs both uncertainties");
      }
      // exp(-u)/(exp(-u)+exp(-u_other)) written as a logistic in the gap.
      return 1.0 / (1.0 + std::exp(u - *u_other));
    }
    case WeightRule::Kind::HardArgmax:
      if (!u_other) {
        throw std::invalid_argument("hard argmax weight needs both uncertainties");
      }
      return u < *u_other ? 1.0 : 0.0;
  }
  throw std::logic_error("unreachable weight rule");
}

double heuristic_uncertainty(HeuristicKind kind, std::span<const double> probs) {
  if (probs.size() < 2) {
    throw std::invalid_argument("heuristic uncertainty needs at least two classes");
  }
  double sum = 0.0;
  double max_p = 0.0;
  double entropy = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("heuristic uncertainty: malformed distribution entry");
    }
    sum += p;
    max_p = std::max(max_p, p);
    if (p > 0.0) entropy -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("heuristic uncertainty: probabilities sum to " +
                                std::to_string(sum));
  }
  switch (kind) {
    case HeuristicKind::Entropy:
      return entropy / std::log(static_cast<double>(probs.size()));
    case HeuristicKind::MSP:
      return 1.0 - max_p;
  }
  throw std::logic_error("unreachable heuristic kind");
}

}  // namespace adacong::weighting
