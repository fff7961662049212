#include "adacong/adaptive_stream.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adacong::stream {

namespace {

void validate(const SlidingConfig& c) {
  if (c.window_capacity == 0) throw std::invalid_argument("window capacity must be positive");
  if (c.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (c.window_capacity < c.batch_size) {
    throw std::invalid_argument("batch size " + std::to_string(c.batch_size) +
                                " exceeds window capacity " + std::to_string(c.window_capacity));
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(c.smoothing > 0.0 && c.smoothing <= 1.0)) {
    throw std::invalid_argument("smoothing must lie in (0, 1]");
  }
}

}  // namespace

SlidingCalibrator::SlidingCalibrator(SlidingConfig config, double initial_quantile)
    : config_(config), current_quantile_(initial_quantile) {}

SlidingCalibrator SlidingCalibrator::warm_start(const conformal::CalibrationSet& reference,
                                                double reference_quantile,
                                                const SlidingConfig& config) {
  validate(config);
  if (!std::isfinite(reference_quantile)) {
    throw std::invalid_argument("warm-start quantile must be finite");
  }
  SlidingCalibrator cal(config, reference_quantile);
  const auto& scores = reference.scores();
  std::size_t skip = scores.size() > config.window_capacity
                         ? scores.size() - config.window_capacity
                         : 0;
  cal.window_.assign(scores.begin() + static_cast<std::ptrdiff_t>(skip), scores.end());
  return cal;
}

double SlidingCalibrator::raw_window_quantile() const {
  if (window_.empty()) {
    throw std::logic_error("raw_window_quantile: window is empty");
  }
  const std::vector<double> snapshot(window_.begin(), window_.end());
  const conformal::CalibrationSet set{snapshot};
  const auto q = conformal::compute_quantile(set, config_.alpha);
  if (q.is_infinite()) return *std::max_element(window_.begin(), window_.end());
  return q.value;
}

void SlidingCalibrator::update(std::span<const double> new_scores) {
  if (new_scores.size() != config_.batch_size) {
    throw std::invalid_argument("update: expected a batch of " +
                                std::to_string(config_.batch_size) + " scores, got " +
                                std::to_string(new_scores.size()));
  }
  for (double s : new_scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("update: non-finite score");
  }
  for (double s : new_scores) {
    window_.push_back(s);
    if (window_.size() > config_.window_capacity) window_.pop_front();
  }
  const double raw = raw_window_quantile();
  current_quantile_ = (1.0 - config_.smoothing) * current_quantile_ + config_.smoothing * raw;
}

}  // namespace adacong::stream
