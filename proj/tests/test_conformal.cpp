#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "adacong/conformal.hpp"
#include "adacong/rng.hpp"

using namespace adacong;
using conformal::CalibrationSet;
using conformal::compute_quantile;
using conformal::ConformalQuantile;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent oracle: sort every score ascending and index the k-th order
// statistic directly.
double oracle_quantile(std::vector<double> scores, double alpha) {
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(
      std::ceil(static_cast<double>(n + 1) * (1.0 - alpha)));
  if (k > n) return kInf;
  std::sort(scores.begin(), scores.end());
  return scores[k - 1];
}

CalibrationSet make_set(const std::vector<double>& scores) {
  return CalibrationSet{scores};
}

}  // namespace

TEST_CASE("quantile on 0.1..1.0 at alpha 0.5 picks the 6th order statistic") {
  std::vector<double> scores;
  for (int i = 1; i <= 10; ++i) scores.push_back(i / 10.0);
  CHECK(oracle_quantile(scores, 0.5) == doctest::Approx(0.6));
  const auto q = compute_quantile(make_set(scores), 0.5);
  CHECK(q.value == oracle_quantile(scores, 0.5));
  CHECK(q.n == 10);
}

TEST_CASE("single score is its own quantile") {
  const auto q = compute_quantile(make_set({0.5}), 0.5);
  CHECK(q.value == 0.5);
}

TEST_CASE("overflow of the finite-sample index gives +infinity") {
  std::vector<double> scores(10, 0.3);
  const auto q = compute_quantile(make_set(scores), 0.05);
  CHECK(q.is_infinite());
  CHECK(oracle_quantile(scores, 0.05) == kInf);
}

TEST_CASE("empty calibration set is an error") {
  CHECK_THROWS_AS(compute_quantile(CalibrationSet{}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(compute_quantile(make_set({0.5}), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(compute_quantile(make_set({0.5}), 1.0), std::invalid_argument);
}

TEST_CASE("calibration scores must be finite") {
  CalibrationSet set;
  CHECK_THROWS_AS(set.add(kInf), std::invalid_argument);
  CHECK_THROWS_AS(set.add(std::nan("")), std::invalid_argument);
}

TEST_CASE("capacity evicts oldest first") {
  CalibrationSet set(std::vector<double>{1.0, 2.0, 3.0}, 3);
  set.add(4.0);
  CHECK(set.size() == 3);
  CHECK(set.scores().front() == 2.0);
  CHECK(set.scores().back() == 4.0);
}

TEST_CASE("quantile equals the sort-and-index oracle on 1000 random instances") {
  rng::Stream stream(2024, "quantile-oracle");
  const double alphas[] = {0.01, 0.05, 0.1, 0.25, 0.5};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + stream.uniform_index(200);
    std::vector<double> scores(n);
    for (auto& s : scores) s = stream.normal() * 10.0;
    const double alpha = alphas[stream.uniform_index(5)];
    const auto q = compute_quantile(make_set(scores), alpha);
    const double expected = oracle_quantile(scores, alpha);
    CHECK(q.value == expected);  // bit-equal, both paths select an input element
  }
}

TEST_CASE("quantile is nonincreasing in alpha and grows with dominated insertions") {
  rng::Stream stream(7, "quantile-monotone");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + stream.uniform_index(100);
    std::vector<double> scores(n);
    for (auto& s : scores) s = stream.uniform(-5.0, 5.0);
    const double a1 = 0.05 + 0.4 * stream.uniform();
    const double a2 = a1 + 0.3 * stream.uniform() + 1e-3;
    const auto q1 = compute_quantile(make_set(scores), a1);
    const auto q2 = compute_quantile(make_set(scores), a2);
    CHECK(q1.value >= q2.value);  // smaller alpha, larger quantile

    // Adding a score at or above the quantile never decreases it.
    if (!q2.is_infinite()) {
      auto grown = scores;
      grown.push_back(q2.value + stream.uniform());
      const auto q3 = compute_quantile(make_set(grown), a2);
      CHECK(q3.value >= q2.value);
    }
  }
}

TEST_CASE("prediction sets threshold per-label scores") {
  ConformalQuantile q{0.5, 0.1, 10};
  const std::vector<double> scores{0.2, 0.9, 0.4};
  const auto set = conformal::prediction_set(scores, q);
  CHECK(set.members == std::vector<int>{0, 2});
  CHECK(set.universe_size == 3);
  CHECK(set.contains(0));
  CHECK(!set.contains(1));

  ConformalQuantile inf_q{kInf, 0.01, 3};
  const auto full = conformal::prediction_set(scores, inf_q);
  CHECK(full.size() == 3);

  ConformalQuantile low{0.5, 0.1, 10};
  const auto empty = conformal::prediction_set(std::vector<double>{0.8, 0.9}, low);
  CHECK(empty.size() == 0);
}

TEST_CASE("prediction-set membership is monotone in score and quantile") {
  rng::Stream stream(99, "set-monotone");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + stream.uniform_index(20);
    std::vector<double> scores(k);
    for (auto& s : scores) s = stream.uniform();
    ConformalQuantile q{stream.uniform(), 0.1, 50};
    const auto base = conformal::prediction_set(scores, q);

    // Raising the quantile never shrinks the set.
    ConformalQuantile higher{q.value + stream.uniform(), 0.1, 50};
    const auto larger = conformal::prediction_set(scores, higher);
    CHECK(larger.size() >= base.size());
    for (int m : base.members) CHECK(larger.contains(m));

    // Lowering one member's score keeps it in the set.
    if (!base.members.empty()) {
      auto lowered = scores;
      const int m = base.members[stream.uniform_index(base.members.size())];
      lowered[static_cast<std::size_t>(m)] -= stream.uniform();
      CHECK(conformal::prediction_set(lowered, q).contains(m));
    }
  }
}

TEST_CASE("nonconformity scores follow their rule definitions") {
  CHECK(conformal::score_residual(2.0, 3.5) == doctest::Approx(1.5));
  const std::vector<double> probs{0.7, 0.2, 0.1};
  CHECK(conformal::score_confidence(probs, 0) == doctest::Approx(0.3));
  CHECK(conformal::score_neg_log_prob(1.0) == doctest::Approx(0.0));
  CHECK(conformal::score_neg_log_prob(0.0) == doctest::Approx(-std::log(1e-12)));

  CHECK(conformal::score(conformal::NonconformityRule::Residual,
                         std::vector<double>{2.0}, 3.5) == doctest::Approx(1.5));
  CHECK(conformal::score(conformal::NonconformityRule::Confidence, probs, 0.0) ==
        doctest::Approx(0.3));
  CHECK(conformal::score(conformal::NonconformityRule::NegLogProb, probs, 1.0) ==
        doctest::Approx(-std::log(0.2)));

  CHECK_THROWS_AS(conformal::score_confidence(probs, 3), std::out_of_range);
  CHECK_THROWS_AS(conformal::score_confidence(std::vector<double>{0.5, 0.4}, 0),
                  std::invalid_argument);
}

TEST_CASE("empirical coverage counts scores at or below the quantile") {
  ConformalQuantile q{0.6, 0.1, 4};
  const std::vector<double> test{0.1, 0.5, 0.7, 0.9};
  CHECK(conformal::empirical_coverage(q, test) == doctest::Approx(0.5));
  ConformalQuantile inf_q{kInf, 0.1, 4};
  CHECK(conformal::empirical_coverage(inf_q, test) == doctest::Approx(1.0));
  CHECK_THROWS_AS(conformal::empirical_coverage(q, std::vector<double>{}),
                  std::invalid_argument);
}

TEST_CASE("uniform scores give ~90% coverage at alpha 0.1") {
  // Monte-Carlo oracle: single big split, n_cal=1000, n_test=10000.
  rng::Stream stream(31337, "coverage-mc");
  CalibrationSet cal;
  for (int i = 0; i < 1000; ++i) cal.add(stream.uniform());
  std::vector<double> test(10000);
  for (auto& s : test) s = stream.uniform();
  const auto q = compute_quantile(cal, 0.1);
  CHECK(conformal::empirical_coverage(q, test) == doctest::Approx(0.90).epsilon(0.03));
}

TEST_CASE("coverage guarantee holds on average over random splits") {
  // >= 50 random calibration/test splits, n_cal = 500, continuous scores.
  const double alpha = 0.1;
  const std::size_t n_cal = 500;
  double total = 0.0;
  const int splits = 60;
  for (int rep = 0; rep < splits; ++rep) {
    rng::Stream stream(static_cast<std::uint64_t>(rep), "coverage-splits");
    CalibrationSet cal;
    for (std::size_t i = 0; i < n_cal; ++i) cal.add(stream.normal());
    std::vector<double> test(2000);
    for (auto& s : test) s = stream.normal();
    total += conformal::empirical_coverage(compute_quantile(cal, alpha), test);
  }
  const double mean_coverage = total / splits;
  CHECK(mean_coverage >= 1.0 - alpha - 0.02);
  CHECK(mean_coverage <= 1.0 - alpha + 1.0 / (n_cal + 1) + 0.02);
}
