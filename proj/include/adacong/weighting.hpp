#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace adacong::weighting {

// Maps a prediction-set size to an uncertainty value.
//   NormalizedSetSize : (|C| - 1) / (K - 1) in [0, 1]; empty set -> 1
//   Identity          : |C| unchanged; empty set -> K
enum class UncertaintyKind { NormalizedSetSize, Identity };

struct UncertaintyMapping {
  UncertaintyKind kind = UncertaintyKind::NormalizedSetSize;
  std::size_t universe_size = 0;  // K
};

double uncertainty(const UncertaintyMapping& mapping, std::size_t set_size);

// Monotone mapping from uncertainty to a guidance weight in [0, 1].
//   ExpDecay        : w = exp(-gamma * u)
//   HardZero        : w = 1 iff u == 0
//   RelativeSoftmax : w = exp(-u) / (exp(-u) + exp(-u_other))
//   HardArgmax      : w = 1 iff u < u_other (ties go to 0)
struct WeightRule {
  enum class Kind { ExpDecay, HardZero, RelativeSoftmax, HardArgmax };

  Kind kind = Kind::ExpDecay;
  double gamma = 1.0;  // ExpDecay only

  static WeightRule exp_decay(double gamma);
  static WeightRule hard_zero() { return {Kind::HardZero, 0.0}; }
  static WeightRule relative_softmax() { return {Kind::RelativeSoftmax, 0.0}; }
  static WeightRule hard_argmax() { return {Kind::HardArgmax, 0.0}; }
};

// `u_other` is required for the two-policy rules (RelativeSoftmax, HardArgmax)
// and ignored otherwise.
double weight(const WeightRule& rule, double u, std::optional<double> u_other = std::nullopt);

// Softmax-free uncertainty baselines computed directly from a probability
// vector. Entropy is normalized by log K so its range matches the
// conformal set-size uncertainty.
enum class HeuristicKind { Entropy, MSP };

double heuristic_uncertainty(HeuristicKind kind, std::span<const double> probs);

}  // namespace adacong::weighting
