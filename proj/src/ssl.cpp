#include "adacong/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adacong/conformal.hpp"
#include "adacong/tinylearn.hpp"
#include "adacong/weighting.hpp"

namespace adacong::ssl {

namespace {

using tinylearn::Batch;
using tinylearn::DenseNet;
using tinylearn::Gradients;
using tinylearn::LossSpec;
using tinylearn::Matrix;

Matrix augment_batch(const Matrix& x, const std::vector<std::size_t>& indices,
                     data::AugmentStrength strength, const data::AugmentParams& params,
                     rng::Stream& stream) {
  Matrix out(indices.size(), x.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto view = data::augment(x.row(indices[i]), strength, params, stream);
    std::copy(view.begin(), view.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

const char* scheme_name(SslScheme scheme) {
  return scheme == SslScheme::Unweighted ? "unweighted" : "adacong";
}

SslScheme scheme_from_name(const std::string& name) {
  if (name == "unweighted") return SslScheme::Unweighted;
  if (name == "adacong") return SslScheme::AdaConG;
  throw std::invalid_argument("unknown SSL baseline '" + name + "'");
}

SslResult run_ssl(const SslConfig& config, std::uint64_t seed, const std::string& run_id) {
  const std::size_t k = config.num_classes;
  if (config.labeled_per_class == 0) {
    throw std::invalid_argument("run_ssl: labeled set is empty");
  }
  const auto task =
      data::make_task(k, config.dim, config.separation, config.within_sigma, seed);

  // generate_task interleaves classes, so the first K * labeled_per_class
  // samples are exactly balanced.
  const auto labeled = data::generate_task(task, k * config.labeled_per_class, /*salt=*/1);
  const auto unlabeled = data::generate_task(task, config.n_unlabeled, /*salt=*/2);
  const auto test = data::generate_task(task, config.n_test, /*salt=*/3);

  rng::Stream init_stream(seed, "ssl-init");
  std::vector<std::size_t> dims = config.hidden == 0
                                      ? std::vector<std::size_t>{config.dim, k}
                                      : std::vector<std::size_t>{config.dim, config.hidden, k};
  DenseNet net = tinylearn::make_net(dims, tinylearn::Activation::ReLU, init_stream);

  rng::Stream batch_stream(seed, "ssl-batch");
  rng::Stream weak_stream(seed, "ssl-aug-weak");
  rng::Stream strong_stream(seed, "ssl-aug-strong");
  rng::Stream cal_stream(seed, "ssl-aug-cal");

  const bool conformal = config.scheme == SslScheme::AdaConG;
  const weighting::UncertaintyMapping mapping{weighting::UncertaintyKind::NormalizedSetSize, k};
  const auto rule = weighting::WeightRule::exp_decay(config.gamma);
  conformal::ConformalQuantile quantile;
  bool have_quantile = false;

  harness::RunRecord record;
  record.run_id = run_id;
  record.seed = seed;

  std::vector<std::size_t> labeled_idx(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) labeled_idx[i] = i;

  double survivors_seen = 0.0;
  double survivors_correct = 0.0;
  double weight_sum = 0.0;

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    if (conformal && (it - 1) % config.recalibrate_every == 0) {
      // Calibration scores: labeled data under the same weak augmentation,
      // scored by the current model.
      const Matrix cal_x = augment_batch(labeled.x, labeled_idx, data::AugmentStrength::Weak,
                                         config.aug, cal_stream);
      const Matrix cal_logits = tinylearn::forward_batch(net, cal_x);
      conformal::CalibrationSet cal_scores;
      for (std::size_t i = 0; i < labeled.size(); ++i) {
        const auto probs = tinylearn::softmax(cal_logits.row(i));
        cal_scores.add(conformal::score_confidence(probs, labeled.y[i]));
      }
      quantile = conformal::compute_quantile(cal_scores, config.alpha);
      have_quantile = true;
    }

    // Unlabeled batch with weak and strong views.
    std::vector<std::size_t> batch_idx(config.batch_unlabeled);
    for (auto& idx : batch_idx) idx = batch_stream.uniform_index(unlabeled.size());
    const Matrix weak_x = augment_batch(unlabeled.x, batch_idx, data::AugmentStrength::Weak,
                                        config.aug, weak_stream);
    const Matrix strong_x = augment_batch(unlabeled.x, batch_idx,
                                          data::AugmentStrength::Strong, config.aug,
                                          strong_stream);
    const Matrix weak_logits = tinylearn::forward_batch(net, weak_x);

    std::vector<int> pseudo(config.batch_unlabeled, 0);
    std::vector<double> weights(config.batch_unlabeled, 0.0);
    std::size_t n_survivors = 0;
    for (std::size_t i = 0; i < config.batch_unlabeled; ++i) {
      const auto probs = tinylearn::softmax(weak_logits.row(i));
      const int label = tinylearn::argmax(probs);
      const double confidence = probs[static_cast<std::size_t>(label)];
      pseudo[i] = label;
      const bool survives = !config.use_threshold || confidence >= config.confidence_threshold;
      if (!survives) continue;
      ++n_survivors;
      double w = 1.0;
      if (conformal && have_quantile) {
        std::vector<double> label_scores(k);
        for (std::size_t y = 0; y < k; ++y) label_scores[y] = 1.0 - probs[y];
        const auto set = conformal::prediction_set(label_scores, quantile);
        w = weighting::weight(rule, weighting::uncertainty(mapping, set.size()));
      }
      if (config.force_unit_weights) w = 1.0;
      weights[i] = w;
      weight_sum += w;
      survivors_seen += 1.0;
      if (label == unlabeled.y[batch_idx[i]]) survivors_correct += 1.0;
    }

    // Supervised term on the raw labeled set.
    Batch labeled_batch;
    labeled_batch.x = labeled.x;
    labeled_batch.labels = labeled.y;
    LossSpec sup_loss;
    sup_loss.lambda_task = 1.0;
    Gradients grads = tinylearn::backward(net, labeled_batch, sup_loss, nullptr, {});

    // Unsupervised term on the strong views.
    Batch unl_batch;
    unl_batch.x = strong_x;
    LossSpec unsup_loss;
    unsup_loss.lambda_task = 0.0;
    unsup_loss.lambda_guide = config.lambda_u;
    tinylearn::Guidance guidance;
    if (config.guide == SslGuide::CrossEntropy) {
      unsup_loss.guide = tinylearn::GuideLoss::CrossEntropyHard;
      guidance.hard_labels = pseudo;
    } else {
      unsup_loss.guide = tinylearn::GuideLoss::MSELogits;
      guidance.teacher_logits = weak_logits;
    }
    const Gradients unsup_grads =
        tinylearn::backward(net, unl_batch, unsup_loss, &guidance, weights);
    tinylearn::accumulate(grads, unsup_grads);
    tinylearn::sgd_step(net, grads, config.learning_rate, config.weight_decay);

    if (it % config.eval_every == 0 || it == config.iterations) {
      const auto step = static_cast<std::int64_t>(it);
      record.log(step, "test", "accuracy", tinylearn::accuracy(net, test.x, test.y));
      record.log(step, "", "survivor_fraction",
                 static_cast<double>(n_survivors) /
                     static_cast<double>(config.batch_unlabeled));
      if (survivors_seen > 0.0) {
        record.log(step, "", "pseudo_label_precision", survivors_correct / survivors_seen);
        record.log(step, "", "mean_weight", weight_sum / survivors_seen);
      }
    }
  }

  SslResult result;
  result.final_test_accuracy = tinylearn::accuracy(net, test.x, test.y);
  result.pseudo_label_precision =
      survivors_seen > 0.0 ? survivors_correct / survivors_seen : 0.0;
  result.mean_weight = survivors_seen > 0.0 ? weight_sum / survivors_seen : 0.0;
  record.summary["test_accuracy"] = result.final_test_accuracy;
  record.summary["pseudo_label_precision"] = result.pseudo_label_precision;
  record.summary["mean_weight"] = result.mean_weight;
  result.record = std::move(record);
  return result;
}

}  // namespace adacong::ssl
