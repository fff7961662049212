#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "adacong/adaptive_stream.hpp"
#include "adacong/rng.hpp"

using namespace adacong;
using conformal::CalibrationSet;
using stream::SlidingCalibrator;
using stream::SlidingConfig;

namespace {

SlidingConfig config(std::size_t n, std::size_t m, double alpha, double smoothing) {
  return SlidingConfig{n, m, alpha, smoothing};
}

}  // namespace

TEST_CASE("warm start seeds the quantile and window") {
  CalibrationSet ref;
  for (int i = 0; i < 100; ++i) ref.add(0.01 * i);
  auto cal = SlidingCalibrator::warm_start(ref, 1.2, config(1000, 10, 0.1, 0.1));
  CHECK(cal.current_quantile() == 1.2);
  CHECK(cal.window_size() == 100);
}

TEST_CASE("warm start keeps only the newest N reference scores") {
  CalibrationSet ref;
  for (int i = 0; i < 1500; ++i) ref.add(static_cast<double>(i));
  auto cal = SlidingCalibrator::warm_start(ref, 0.5, config(1000, 10, 0.1, 0.1));
  CHECK(cal.window_size() == 1000);
  CHECK(cal.window().front() == 500.0);
  CHECK(cal.window().back() == 1499.0);
}

TEST_CASE("batch larger than the window is rejected") {
  CalibrationSet ref(std::vector<double>{0.1});
  CHECK_THROWS_AS(SlidingCalibrator::warm_start(ref, 0.1, config(100, 128, 0.1, 0.1)),
                  std::invalid_argument);
}

TEST_CASE("update applies the EMA") {
  // One batch whose window quantile is exactly 2.0 against an old value of 1.0.
  CalibrationSet ref;
  auto cal = SlidingCalibrator::warm_start(ref, 1.0, config(10, 5, 0.5, 0.1));
  // Window {2,2,2,2,2}: k = ceil(6 * 0.5) = 3 -> 2.0.
  cal.update(std::vector<double>{2.0, 2.0, 2.0, 2.0, 2.0});
  CHECK(cal.current_quantile() == doctest::Approx(1.0 + 0.1 * (2.0 - 1.0)));
}

TEST_CASE("smoothing of 1 tracks the raw window quantile exactly") {
  CalibrationSet ref;
  auto cal = SlidingCalibrator::warm_start(ref, 5.0, config(10, 5, 0.5, 1.0));
  cal.update(std::vector<double>{1.0, 2.0, 3.0, 4.0, 5.0});
  CHECK(cal.current_quantile() == cal.raw_window_quantile());
}

TEST_CASE("update validates batch size and score finiteness") {
  CalibrationSet ref;
  auto cal = SlidingCalibrator::warm_start(ref, 0.0, config(10, 5, 0.5, 0.1));
  CHECK_THROWS_AS(cal.update(std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(
      cal.update(std::vector<double>{1.0, 2.0, 3.0, 4.0,
                                     std::numeric_limits<double>::infinity()}),
      std::invalid_argument);
}

TEST_CASE("EMA output is a convex combination of old and raw quantile") {
  rng::Stream rand(3, "ema-convex");
  CalibrationSet ref;
  for (int i = 0; i < 50; ++i) ref.add(rand.uniform());
  auto cal = SlidingCalibrator::warm_start(ref, 0.5, config(50, 10, 0.2, 0.3));
  for (int step = 0; step < 100; ++step) {
    const double old_q = cal.current_quantile();
    std::vector<double> batch(10);
    for (auto& s : batch) s = rand.uniform(0.0, 2.0);
    cal.update(batch);
    const double raw = cal.raw_window_quantile();
    CHECK(cal.current_quantile() >= std::min(old_q, raw) - 1e-12);
    CHECK(cal.current_quantile() <= std::max(old_q, raw) + 1e-12);
  }
}

TEST_CASE("window contents equal a reference deque after any update sequence") {
  rng::Stream rand(9, "window-oracle");
  CalibrationSet ref;
  std::deque<double> oracle;
  for (int i = 0; i < 30; ++i) {
    const double s = rand.normal();
    ref.add(s);
    oracle.push_back(s);
  }
  const std::size_t n = 64;
  const std::size_t m = 8;
  auto cal = SlidingCalibrator::warm_start(ref, 0.0, config(n, m, 0.1, 0.2));
  for (int step = 0; step < 200; ++step) {
    std::vector<double> batch(m);
    for (auto& s : batch) {
      s = rand.normal();
      oracle.push_back(s);
    }
    while (oracle.size() > n) oracle.pop_front();
    cal.update(batch);
    REQUIRE(cal.window_size() == oracle.size());
    CHECK(std::equal(cal.window().begin(), cal.window().end(), oracle.begin()));
  }
}

TEST_CASE("stationary uniform stream converges near the 0.9 quantile") {
  // Monte-Carlo oracle: median over 20 seeds of the final EMA quantile after
  // 200 updates of uniform(0,1) scores at alpha = 0.1, N = 1000, m = 128.
  std::vector<double> finals;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    rng::Stream rand(seed, "stationary-stream");
    CalibrationSet ref;
    for (int i = 0; i < 1000; ++i) ref.add(rand.uniform());
    auto cal = SlidingCalibrator::warm_start(
        ref, conformal::compute_quantile(ref, 0.1).value, config(1000, 128, 0.1, 0.1));
    for (int step = 0; step < 200; ++step) {
      std::vector<double> batch(128);
      for (auto& s : batch) s = rand.uniform();
      cal.update(batch);
    }
    finals.push_back(cal.current_quantile());
  }
  std::sort(finals.begin(), finals.end());
  const double median = 0.5 * (finals[9] + finals[10]);
  CHECK(median == doctest::Approx(0.9).epsilon(0.034));
}

TEST_CASE("EMA quantile stays near the brute-force window quantile when stationary") {
  // Seed-to-seed sd of the raw quantile bounds the allowed EMA deviation.
  std::vector<double> raw_finals;
  std::vector<double> deviations;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    rng::Stream rand(seed, "ema-vs-raw");
    CalibrationSet ref;
    for (int i = 0; i < 500; ++i) ref.add(rand.normal());
    auto cal = SlidingCalibrator::warm_start(
        ref, conformal::compute_quantile(ref, 0.1).value, config(500, 50, 0.1, 0.1));
    for (int step = 0; step < 120; ++step) {
      std::vector<double> batch(50);
      for (auto& s : batch) s = rand.normal();
      cal.update(batch);
    }
    const double raw = cal.raw_window_quantile();
    raw_finals.push_back(raw);
    deviations.push_back(std::abs(cal.current_quantile() - raw));
  }
  double mean = 0.0;
  for (double r : raw_finals) mean += r;
  mean /= static_cast<double>(raw_finals.size());
  double var = 0.0;
  for (double r : raw_finals) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / static_cast<double>(raw_finals.size() - 1));
  for (double d : deviations) CHECK(d <= 5.0 * sd);
}

TEST_CASE("tiny windows fall back to the window maximum instead of infinity") {
  CalibrationSet ref;
  auto cal = SlidingCalibrator::warm_start(ref, 0.3, config(1000, 8, 0.1, 0.5));
  // 8 scores, k = ceil(9 * 0.9) = 9 > 8: raw quantile overflows, fallback max.
  cal.update(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
  CHECK(std::isfinite(cal.current_quantile()));
  CHECK(cal.raw_window_quantile() == 0.8);
}
