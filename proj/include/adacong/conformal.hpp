#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace adacong::conformal {

// How a scalar nonconformity score is derived from a model output:
//   Residual   : |y_true - y_hat|, regression
//   Confidence : 1 - p_true, classification probabilities
//   NegLogProb : -log p(a|s), stochastic policies
enum class NonconformityRule { Residual, Confidence, NegLogProb };

// Probability floor applied before the logarithm in NegLogProb scores.
inline constexpr double kNegLogProbFloor = 1e-12;

// Held-out nonconformity scores. Optionally bounded: when a capacity is set,
// adding beyond it evicts the oldest score first.
class CalibrationSet {
 public:
  CalibrationSet() = default;
  explicit CalibrationSet(std::span<const double> scores,
                          std::optional<std::size_t> capacity = std::nullopt);

  void add(double score);

  std::size_t size() const { return scores_.size(); }
  bool empty() const { return scores_.empty(); }
  std::optional<std::size_t> capacity() const { return capacity_; }

  // Insertion order (oldest first).
  const std::deque<double>& scores() const { return scores_; }

  // Ascending copy; ties keep insertion order (stable sort).
  std::vector<double> sorted_scores() const;

 private:
  std::deque<double> scores_;
  std::optional<std::size_t> capacity_;
};

// Finite-sample-corrected quantile of a calibration set. `value` is +infinity
// when ceil((n+1)(1-alpha)) exceeds n.
struct ConformalQuantile {
  double value = 0.0;
  double alpha = 0.0;
  std::size_t n = 0;

  bool is_infinite() const;
};

// Labels/actions whose score is at or below the quantile. `members` is kept
// sorted ascending.
struct PredictionSet {
  std::vector<int> members;
  std::size_t universe_size = 0;

  std::size_t size() const { return members.size(); }
  bool contains(int label) const;
};

// 1-based order-statistic index k = ceil((n+1)(1-alpha)) of the split-CP rule.
std::size_t quantile_index(std::size_t n, double alpha);

// k-th smallest calibration score, or +infinity when k > n.
// Throws std::invalid_argument on an empty set or alpha outside (0,1).
ConformalQuantile compute_quantile(const CalibrationSet& scores, double alpha);

PredictionSet prediction_set(std::span<const double> per_label_scores,
                             const ConformalQuantile& quantile);

double score_residual(double y_hat, double y_true);
double score_confidence(std::span<const double> probs, int true_label);
double score_neg_log_prob(double prob);

// Dispatcher over the rule kinds. For Residual, `model_output` holds the
// single prediction and `target` is the ground truth; for the probability
// rules, `model_output` is the distribution and `target` the label index.
double score(NonconformityRule rule, std::span<const double> model_output, double target);

// Fraction of test scores covered by the quantile (score <= value).
double empirical_coverage(const ConformalQuantile& quantile,
                          std::span<const double> test_scores);

}  // namespace adacong::conformal
