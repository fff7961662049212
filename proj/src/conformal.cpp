#include "adacong/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace adacong::conformal {

namespace {

void require_finite(double score) {
  if (!std::isfinite(score)) {
    throw std::invalid_argument("calibration score must be finite, got " +
                                std::to_string(score));
  }
}

void require_distribution(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("probability vector has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("probability vector sums to " + std::to_string(sum) +
                                ", expected 1 within 1e-6");
  }
}

}  // namespace

CalibrationSet::CalibrationSet(std::span<const double> scores,
                               std::optional<std::size_t> capacity)
    : capacity_(capacity) {
  if (capacity_ && *capacity_ == 0) {
    throw std::invalid_argument("calibration set capacity must be positive");
  }
  for (double s : scores) add(s);
}

void CalibrationSet::add(double score) {
  require_finite(score);
  scores_.push_back(score);
  if (capacity_ && scores_.size() > *capacity_) scores_.pop_front();
}

std::vector<double> CalibrationSet::sorted_scores() const {
  std::vector<double> out(scores_.begin(), scores_.end());
  std::stable_sort(out.begin(), out.end());
  return out;
}

bool ConformalQuantile::is_infinite() const {
  return value == std::numeric_limits<double>::infinity();
}

bool PredictionSet::contains(int label) const {
  return std::binary_search(members.begin(), members.end(), label);
}

std::size_t quantile_index(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  double k = std::ceil(static_cast<double>(n + 1) * (1.0 - alpha));
  return static_cast<std::size_t>(k);
}

ConformalQuantile compute_quantile(const CalibrationSet& scores, double alpha) {
  if (scores.empty()) {
    throw std::invalid_argument("compute_quantile: calibration set is empty");
  }
  const std::size_t n = scores.size();
  const std::size_t k = quantile_index(n, alpha);

  ConformalQuantile q;
  q.alpha = alpha;
  q.n = n;
  if (k > n) {
    q.value = std::numeric_limits<double>::infinity();
    return q;
  }
  std::vector<double> buf(scores.scores().begin(), scores.scores().end());
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k - 1), buf.end());
  q.value = buf[k - 1];
  return q;
}

PredictionSet prediction_set(std::span<const double> per_label_scores,
                             const ConformalQuantile& quantile) {
  if (per_label_scores.empty()) {
    throw std::invalid_argument("prediction_set: per-label score vector is empty");
  }
  PredictionSet set;
  set.universe_size = per_label_scores.size();
  for (std::size_t i = 0; i < per_label_scores.size(); ++i) {
    if (per_label_scores[i] <= quantile.value) set.members.push_back(static_cast<int>(i));
  }
  return set;
}

double score_residual(double y_hat, double y_true) {
  if (!std::isfinite(y_hat) || !std::isfinite(y_true)) {
    throw std::invalid_argument("residual score requires finite prediction and target");
  }
  return std::abs(y_true - y_hat);
}

double score_confidence(std::span<const double> probs, int true_label) {
  require_distribution(probs);
  if (true_label < 0 || static_cast<std::size_t>(true_label) >= probs.size()) {
    throw std::out_of_range("confidence score: label index out of range");
  }
  return 1.0 - probs[static_cast<std::size_t>(true_label)];
}

double score_neg_log_prob(double prob) {
  if (!std::isfinite(prob) || prob < 0.0 || prob > 1.0 + 1e-9) {
    throw std::invalid_argument("neg-log-prob score requires a probability in [0, 1]");
  }
  return -std::log(std::max(prob, kNegLogProbFloor));
}

double score(NonconformityRule rule, std::span<const double> model_output, double target) {
  switch (rule) {
    case NonconformityRule::Residual:
      if (model_output.size() != 1) {
        throw std::invalid_argument("residual rule expects a single model output");
      }
      return score_residual(model_output[0], target);
    case NonconformityRule::Confidence:
      return score_confidence(model_output, static_cast<int>(target));
    case NonconformityRule::NegLogProb: {
      require_distribution(model_output);
      const int idx = static_cast<int>(target);
      if (idx < 0 || static_cast<std::size_t>(idx) >= model_output.size()) {
        throw std::out_of_range("neg-log-prob score: action index out of range");
      }
      return score_neg_log_prob(model_output[static_cast<std::size_t>(idx)]);
    }
  }
  throw std::logic_error("unreachable nonconformity rule");
}

double empirical_coverage(const ConformalQuantile& quantile,
                          std::span<const double> test_scores) {
  if (test_scores.empty()) {
    throw std::invalid_argument("empirical_coverage: test scores are empty");
  }
  std::size_t covered = 0;
  for (double s : test_scores) {
    if (s <= quantile.value) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(test_scores.size());
}

}  // namespace adacong::conformal
