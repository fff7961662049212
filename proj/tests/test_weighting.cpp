#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "adacong/rng.hpp"
#include "adacong/weighting.hpp"

using namespace adacong;
using weighting::UncertaintyKind;
using weighting::UncertaintyMapping;
using weighting::WeightRule;

TEST_CASE("normalized set size maps 1..K onto [0,1], empty set to 1") {
  UncertaintyMapping m{UncertaintyKind::NormalizedSetSize, 100};
  CHECK(weighting::uncertainty(m, 1) == doctest::Approx(0.0));
  CHECK(weighting::uncertainty(m, 100) == doctest::Approx(1.0));
  CHECK(weighting::uncertainty(m, 0) == doctest::Approx(1.0));
  CHECK(weighting::uncertainty(m, 51) == doctest::Approx(50.0 / 99.0));

  UncertaintyMapping degenerate{UncertaintyKind::NormalizedSetSize, 1};
  CHECK_THROWS_AS(weighting::uncertainty(degenerate, 1), std::invalid_argument);
}

TEST_CASE("identity mapping returns the set size, empty set counts as K") {
  UncertaintyMapping m{UncertaintyKind::Identity, 5};
  CHECK(weighting::uncertainty(m, 3) == doctest::Approx(3.0));
  CHECK(weighting::uncertainty(m, 0) == doctest::Approx(5.0));
}

TEST_CASE("exponential decay weight values") {
  const auto rule = WeightRule::exp_decay(10.0);
  CHECK(weighting::weight(rule, 0.0) == doctest::Approx(1.0));
  // Oracle: exp(-10) evaluated directly.
  CHECK(weighting::weight(rule, 1.0) == doctest::Approx(std::exp(-10.0)));
  CHECK(weighting::weight(rule, 1.0) == doctest::Approx(4.539993e-5).epsilon(1e-4));
  CHECK_THROWS_AS(WeightRule::exp_decay(0.0), std::invalid_argument);
  CHECK_THROWS_AS(weighting::weight(rule, -0.1), std::invalid_argument);
}

TEST_CASE("relative softmax weight values and symmetry") {
  const auto rule = WeightRule::relative_softmax();
  CHECK(weighting::weight(rule, 0.7, 0.7) == doctest::Approx(0.5));
  // Oracle: 1 / (1 + e^{-1}).
  CHECK(weighting::weight(rule, 0.0, 1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(weighting::weight(rule, 0.0, 1.0) == doctest::Approx(0.7311).epsilon(1e-3));
  CHECK_THROWS_AS(weighting::weight(rule, 0.5), std::invalid_argument);

  rng::Stream stream(5, "softmax-symmetry");
  for (int i = 0; i < 200; ++i) {
    const double a = stream.uniform(0.0, 5.0);
    const double b = stream.uniform(0.0, 5.0);
    CHECK(weighting::weight(rule, a, b) ==
          doctest::Approx(1.0 - weighting::weight(rule, b, a)));
  }
}

TEST_CASE("hard rules") {
  CHECK(weighting::weight(WeightRule::hard_zero(), 0.0) == 1.0);
  CHECK(weighting::weight(WeightRule::hard_zero(), 0.01) == 0.0);
  CHECK(weighting::weight(WeightRule::hard_argmax(), 1.0, 5.0) == 1.0);
  CHECK(weighting::weight(WeightRule::hard_argmax(), 5.0, 1.0) == 0.0);
  CHECK(weighting::weight(WeightRule::hard_argmax(), 2.0, 2.0) == 0.0);  // tie -> RL side
  CHECK_THROWS_AS(weighting::weight(WeightRule::hard_argmax(), 0.5), std::invalid_argument);
}

TEST_CASE("exp decay is strictly decreasing for every gamma") {
  rng::Stream stream(11, "expdecay-monotone");
  for (int i = 0; i < 500; ++i) {
    const double gamma = stream.uniform(1e-3, 50.0);
    const auto rule = WeightRule::exp_decay(gamma);
    double u1 = stream.uniform(0.0, 2.0);
    double u2 = stream.uniform(0.0, 2.0);
    if (u1 == u2) continue;
    if (u1 > u2) std::swap(u1, u2);
    CHECK(weighting::weight(rule, u1) > weighting::weight(rule, u2));
  }
}

TEST_CASE("hard argmax agrees with relative softmax through 0.5") {
  rng::Stream stream(13, "argmax-agree");
  for (int i = 0; i < 500; ++i) {
    const double a = stream.uniform(0.0, 5.0);
    const double b = stream.uniform(0.0, 5.0);
    if (a == b) continue;
    const double soft = weighting::weight(WeightRule::relative_softmax(), a, b);
    const double hard = weighting::weight(WeightRule::hard_argmax(), a, b);
    CHECK((a < b) == (soft > 0.5));
    CHECK((soft > 0.5 ? 1.0 : 0.0) == hard);
  }
}

TEST_CASE("hard zero is the large-gamma limit of exp decay on the set-size grid") {
  // exp(-gamma u) < 1e-9 for all grid points u > 0.02 requires
  // gamma >= ln(1e9)/0.02 ~ 1036; checked at 1100.
  const auto rule = WeightRule::exp_decay(1100.0);
  const std::size_t k = 100;
  for (std::size_t size = 1; size <= k; ++size) {
    const double u = static_cast<double>(size - 1) / static_cast<double>(k - 1);
    const double hard = weighting::weight(WeightRule::hard_zero(), u);
    if (u == 0.0) {
      CHECK(weighting::weight(rule, u) == 1.0);
    } else if (u > 0.02) {
      CHECK(std::abs(weighting::weight(rule, u) - hard) < 1e-9);
    }
  }
}

TEST_CASE("all weight rules stay inside [0,1] under fuzzing") {
  rng::Stream stream(17, "weight-fuzz");
  for (int i = 0; i < 2000; ++i) {
    const double u = stream.uniform(0.0, 10.0);
    const double v = stream.uniform(0.0, 10.0);
    const double gamma = stream.uniform(1e-3, 100.0);
    for (const double w : {weighting::weight(WeightRule::exp_decay(gamma), u),
                           weighting::weight(WeightRule::hard_zero(), u),
                           weighting::weight(WeightRule::relative_softmax(), u, v),
                           weighting::weight(WeightRule::hard_argmax(), u, v)}) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
    }
  }
}

TEST_CASE("heuristic uncertainties") {
  CHECK(weighting::heuristic_uncertainty(weighting::HeuristicKind::MSP,
                                         std::vector<double>{1.0, 0.0, 0.0}) ==
        doctest::Approx(0.0));
  CHECK(weighting::heuristic_uncertainty(weighting::HeuristicKind::Entropy,
                                         std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(1.0));

  // Oracle: direct evaluation with natural logs, normalized by log 3.
  const std::vector<double> p{0.7, 0.2, 0.1};
  const double expected =
      -(0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1)) / std::log(3.0);
  CHECK(expected == doctest::Approx(0.729846).epsilon(1e-4));
  CHECK(weighting::heuristic_uncertainty(weighting::HeuristicKind::Entropy, p) ==
        doctest::Approx(expected));

  CHECK_THROWS_AS(weighting::heuristic_uncertainty(weighting::HeuristicKind::Entropy,
                                                   std::vector<double>{0.5, 0.6}),
                  std::invalid_argument);
}
