#pragma once

#include <cstddef>
#include <deque>
#include <span>

#include "adacong/conformal.hpp"

namespace adacong::stream {

struct SlidingConfig {
  std::size_t window_capacity = 1000;  // N
  std::size_t batch_size = 128;        // m, scores appended per update
  double alpha = 0.1;
  double smoothing = 0.1;              // gamma_ema in (0, 1]
};

// Streaming calibration for a nonstationary score source: a FIFO window of
// the newest N scores plus an EMA-smoothed quantile, warm-started from a
// static reference calibration.
class SlidingCalibrator {
 public:
  // Seeds the window with the newest scores of `reference` (oldest dropped if
  // it holds more than N) and starts the quantile at `reference_quantile`.
  static SlidingCalibrator warm_start(const conformal::CalibrationSet& reference,
                                      double reference_quantile,
                                      const SlidingConfig& config);

  // Appends one batch (exactly batch_size scores), evicts the oldest beyond
  // capacity, recomputes the raw window quantile and folds it into the EMA.
  void update(std::span<const double> new_scores);

  double current_quantile() const { return current_quantile_; }
  std::size_t window_size() const { return window_.size(); }
  const std::deque<double>& window() const { return window_; }
  const SlidingConfig& config() const { return config_; }

  // Finite-sample quantile of the current window contents, before smoothing.
  // Falls back to the window maximum when the finite-sample rule overflows
  // (window still too small for alpha), keeping the EMA finite.
  double raw_window_quantile() const;

 private:
  SlidingCalibrator(SlidingConfig config, double initial_quantile);

  SlidingConfig config_;
  std::deque<double> window_;
  double current_quantile_ = 0.0;
};

}  // namespace adacong::stream
