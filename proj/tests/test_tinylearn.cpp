#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <vector>

#include "adacong/rng.hpp"
#include "adacong/tinylearn.hpp"

using namespace adacong;
using namespace adacong::tinylearn;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
  }
  return m;
}

// Central finite differences over every parameter of the net.
bool gradcheck(const DenseNet& net, const Batch& batch, const LossSpec& spec,
               const Guidance* guidance, const std::vector<double>& weights,
               double h = 1e-5, double tol = 1e-4) {
  const Gradients grads = backward(net, batch, spec, guidance, weights);
  DenseNet probe = net;
  bool ok = true;
  auto check_param = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = combined_loss(probe, batch, spec, guidance, weights);
    param = saved - h;
    const double down = combined_loss(probe, batch, spec, guidance, weights);
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - analytic);
    const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    if (err > tol * scale + 1e-7) {
      ok = false;
      std::printf("gradcheck mismatch: analytic=%.10g fd=%.10g\n", analytic, fd);
    }
  };
  for (std::size_t li = 0; li < probe.layers.size(); ++li) {
    auto& layer = probe.layers[li];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      check_param(layer.weights.data[i], grads.layers[li].weights.data[i]);
    }
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      check_param(layer.biases[i], grads.layers[li].biases[i]);
    }
  }
  return ok;
}

struct RandomProblem {
  DenseNet net;
  Batch batch;
  Guidance guidance;
  std::vector<double> weights;
};

RandomProblem random_problem(std::uint64_t seed, bool hidden_layer, Activation act) {
  rng::Stream stream(seed, "gradcheck");
  const std::size_t in = 3 + stream.uniform_index(4);
  const std::size_t out = 2 + stream.uniform_index(4);
  const std::size_t b = 2 + stream.uniform_index(5);

  RandomProblem p;
  std::vector<std::size_t> dims =
      hidden_layer ? std::vector<std::size_t>{in, 4 + stream.uniform_index(4), out}
                   : std::vector<std::size_t>{in, out};
  p.net = make_net(dims, act, stream);
  p.batch.x = Matrix(b, in);
  for (auto& v : p.batch.x.data) v = stream.normal();
  p.batch.labels.resize(b);
  for (auto& y : p.batch.labels) y = static_cast<int>(stream.uniform_index(out));
  p.guidance.teacher_logits = Matrix(b, out);
  for (auto& v : p.guidance.teacher_logits.data) v = stream.normal() * 2.0;
  p.guidance.hard_labels.resize(b);
  for (auto& y : p.guidance.hard_labels) y = static_cast<int>(stream.uniform_index(out));
  p.weights.resize(b);
  for (auto& w : p.weights) w = stream.uniform();
  return p;
}

}  // namespace

TEST_CASE("zero parameters give zero logits and uniform softmax") {
  DenseNet net;
  net.layers.push_back({Matrix(3, 2), std::vector<double>(3, 0.0)});
  const auto logits = forward(net, std::vector<double>{1.0, -2.0});
  for (double v : logits) CHECK(v == 0.0);
  const auto p = softmax(logits);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("identity single layer passes input through") {
  DenseNet net;
  Layer layer{Matrix(2, 2), std::vector<double>(2, 0.0)};
  layer.weights.at(0, 0) = 1.0;
  layer.weights.at(1, 1) = 1.0;
  net.layers.push_back(layer);
  const auto logits = forward(net, std::vector<double>{1.0, 2.0});
  CHECK(logits[0] == doctest::Approx(1.0));
  CHECK(logits[1] == doctest::Approx(2.0));
}

TEST_CASE("forward matches an independent matrix multiply") {
  rng::Stream stream(42, "forward-oracle");
  auto p = random_problem(42, true, Activation::Tanh);
  const auto got = forward(p.net, p.batch.x.row(0));

  // Straightforward re-implementation.
  std::vector<double> cur(p.batch.x.row(0).begin(), p.batch.x.row(0).end());
  for (std::size_t li = 0; li < p.net.layers.size(); ++li) {
    const auto& layer = p.net.layers[li];
    std::vector<double> next(layer.weights.rows);
    for (std::size_t o = 0; o < layer.weights.rows; ++o) {
      double acc = layer.biases[o];
      for (std::size_t i = 0; i < layer.weights.cols; ++i) {
        acc += layer.weights.at(o, i) * cur[i];
      }
      next[o] = li + 1 == p.net.layers.size() ? acc : std::tanh(acc);
    }
    cur = next;
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - cur[i]) < 1e-10);
  }
}

TEST_CASE("dimension mismatch is an error") {
  rng::Stream stream(1, "dims");
  auto net = make_net({3, 2}, Activation::ReLU, stream);
  CHECK_THROWS_AS(forward(net, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("lambda_guide zero reduces to pure cross-entropy gradients") {
  auto p = random_problem(7, true, Activation::ReLU);
  LossSpec ce_only;
  ce_only.lambda_task = 1.0;
  LossSpec with_zero_guide;
  with_zero_guide.lambda_task = 1.0;
  with_zero_guide.lambda_guide = 0.0;
  with_zero_guide.guide = GuideLoss::KLDivergence;

  const auto g1 = backward(p.net, p.batch, ce_only, nullptr, {});
  const auto g2 = backward(p.net, p.batch, with_zero_guide, &p.guidance, p.weights);
  for (std::size_t li = 0; li < g1.layers.size(); ++li) {
    for (std::size_t i = 0; i < g1.layers[li].weights.data.size(); ++i) {
      CHECK(g1.layers[li].weights.data[i] == g2.layers[li].weights.data[i]);
    }
  }
}

TEST_CASE("all-zero per-sample weights zero out the guide contribution") {
  auto p = random_problem(8, false, Activation::ReLU);
  LossSpec spec;
  spec.lambda_task = 1.0;
  spec.lambda_guide = 1.0;
  spec.guide = GuideLoss::KLDivergence;
  std::vector<double> zeros(p.batch.x.rows, 0.0);

  LossSpec ce_only;
  ce_only.lambda_task = 1.0;
  const auto g_zero = backward(p.net, p.batch, spec, &p.guidance, zeros);
  const auto g_ce = backward(p.net, p.batch, ce_only, nullptr, {});
  for (std::size_t li = 0; li < g_zero.layers.size(); ++li) {
    for (std::size_t i = 0; i < g_zero.layers[li].weights.data.size(); ++i) {
      CHECK(g_zero.layers[li].weights.data[i] == g_ce.layers[li].weights.data[i]);
    }
  }
}

TEST_CASE("gradients match central finite differences for every loss combination") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (bool hidden : {false, true}) {
      for (Activation act : {Activation::ReLU, Activation::Tanh}) {
        auto p = random_problem(1000 + seed * 10 + (hidden ? 1 : 0) +
                                    (act == Activation::Tanh ? 100 : 0),
                                hidden, act);
        LossSpec ce;
        ce.lambda_task = 1.0;
        CHECK(gradcheck(p.net, p.batch, ce, nullptr, {}));

        LossSpec kl;
        kl.lambda_task = 1.0;
        kl.lambda_guide = 0.7;
        kl.guide = GuideLoss::KLDivergence;
        kl.kl_temperature = 4.0;
        CHECK(gradcheck(p.net, p.batch, kl, &p.guidance, p.weights));

        LossSpec mse;
        mse.lambda_task = 1.0;
        mse.lambda_guide = 1.3;
        mse.guide = GuideLoss::MSELogits;
        CHECK(gradcheck(p.net, p.batch, mse, &p.guidance, p.weights));

        LossSpec hard_ce;
        hard_ce.lambda_task = 0.0;
        hard_ce.lambda_guide = 1.0;
        hard_ce.guide = GuideLoss::CrossEntropyHard;
        Batch unlabeled;
        unlabeled.x = p.batch.x;
        CHECK(gradcheck(p.net, unlabeled, hard_ce, &p.guidance, p.weights));
        ++checked;
      }
    }
  }
  CHECK(checked == 20);
}

TEST_CASE("KL guidance is nonnegative and zero at equal logits") {
  auto p = random_problem(21, false, Activation::ReLU);
  LossSpec spec;
  spec.lambda_task = 0.0;
  spec.lambda_guide = 1.0;
  spec.guide = GuideLoss::KLDivergence;
  spec.kl_temperature = 4.0;

  Batch batch;
  batch.x = p.batch.x;
  Guidance same;
  same.teacher_logits = forward_batch(p.net, batch.x);
  CHECK(combined_loss(p.net, batch, spec, &same, {}) == doctest::Approx(0.0).epsilon(1e-12));

  // Shifting every teacher logit by a constant leaves the softened
  // distribution, and therefore the loss, at zero.
  Guidance shifted = same;
  for (auto& v : shifted.teacher_logits.data) v += 3.7;
  CHECK(combined_loss(p.net, batch, spec, &shifted, {}) ==
        doctest::Approx(0.0).epsilon(1e-10));

  CHECK(combined_loss(p.net, batch, spec, &p.guidance, {}) >= 0.0);
}

TEST_CASE("sgd step updates parameters and handles weight decay") {
  rng::Stream stream(3, "sgd");
  auto net = make_net({2, 2}, Activation::None, stream);
  Gradients grads;
  grads.layers.resize(1);
  grads.layers[0].weights = net.layers[0].weights;  // g = theta
  grads.layers[0].biases = net.layers[0].biases;
  sgd_step(net, grads, 1.0, 0.0);
  for (double v : net.layers[0].weights.data) CHECK(v == 0.0);

  auto net2 = make_net({2, 2}, Activation::None, stream);
  const auto before = net2.layers[0].weights.data;
  Gradients zero;
  zero.layers.resize(1);
  zero.layers[0].weights = Matrix(2, 2);
  zero.layers[0].biases.assign(2, 0.0);
  sgd_step(net2, zero, 0.5, 0.0);
  CHECK(net2.layers[0].weights.data == before);
}

TEST_CASE("sgd minimizes a scalar quadratic") {
  // Loss (w - 3)^2 / 2 via MSELogits on a single 1-d sample with x = 1,
  // teacher logit 3 and no bias interference (bias converges alongside).
  DenseNet net;
  net.layers.push_back({Matrix(1, 1), std::vector<double>(1, 0.0)});
  net.layers[0].weights.at(0, 0) = -2.0;
  Batch batch;
  batch.x = from_rows({{1.0}});
  LossSpec spec;
  spec.lambda_task = 0.0;
  spec.lambda_guide = 1.0;
  spec.guide = GuideLoss::MSELogits;
  Guidance g;
  g.teacher_logits = from_rows({{3.0}});
  for (int i = 0; i < 100; ++i) {
    sgd_step(net, backward(net, batch, spec, &g, {}), 0.3, 0.0);
  }
  // w + b converges to the teacher logit.
  CHECK(net.layers[0].weights.at(0, 0) + net.layers[0].biases[0] ==
        doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("training reaches 99% on a separable two-class set") {
  rng::Stream stream(5, "separable");
  const std::size_t n = 200;
  Batch batch;
  batch.x = Matrix(n, 2);
  batch.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    batch.labels[i] = label;
    batch.x.at(i, 0) = (label == 0 ? -2.0 : 2.0) + 0.3 * stream.normal();
    batch.x.at(i, 1) = stream.normal();
  }
  auto net = make_net({2, 2}, Activation::ReLU, stream);
  LossSpec spec;
  spec.lambda_task = 1.0;
  double acc = 0.0;
  for (int epoch = 0; epoch < 500; ++epoch) {
    sgd_step(net, backward(net, batch, spec, nullptr, {}), 0.5, 0.0);
    acc = accuracy(net, batch.x, batch.labels);
    if (acc >= 0.99) break;
  }
  CHECK(acc >= 0.99);
}

TEST_CASE("NaN loss raises with diagnostics") {
  DenseNet net;
  net.layers.push_back({Matrix(2, 1), std::vector<double>(2, 0.0)});
  net.layers[0].weights.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Batch batch;
  batch.x = from_rows({{1.0}});
  batch.labels = {0};
  LossSpec spec;
  spec.lambda_task = 1.0;
  CHECK_THROWS_AS(backward(net, batch, spec, nullptr, {}), std::runtime_error);
}

TEST_CASE("checkpoints round-trip through JSON") {
  rng::Stream stream(12, "ckpt");
  auto net = make_net({4, 6, 3}, Activation::Tanh, stream);
  const auto text = to_json_string(net);
  const auto back = from_json_string(text);
  REQUIRE(back.layers.size() == net.layers.size());
  CHECK(back.activation == net.activation);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    CHECK(back.layers[li].weights.data == net.layers[li].weights.data);
    CHECK(back.layers[li].biases == net.layers[li].biases);
  }

  const auto path = std::filesystem::temp_directory_path() / "adacong_ckpt_test.json";
  save_checkpoint(net, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.layers[1].weights.data == net.layers[1].weights.data);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(from_json_string("{\"format\":\"other\"}"), std::runtime_error);
}
