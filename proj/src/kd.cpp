#include "adacong/kd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

#include "adacong/conformal.hpp"
#include "adacong/weighting.hpp"

namespace adacong::kd {

namespace {

using tinylearn::Batch;
using tinylearn::DenseNet;
using tinylearn::Gradients;
using tinylearn::LossSpec;
using tinylearn::Matrix;

std::vector<std::size_t> layer_dims(std::size_t in, std::size_t hidden, std::size_t out) {
  if (hidden == 0) return {in, out};
  return {in, hidden, out};
}

void train_epochs(DenseNet& net, const data::Dataset& train, const ModelSpec& spec,
                  const LossSpec& loss, const tinylearn::Guidance* guidance,
                  const std::vector<double>& weights, rng::Stream& shuffle_stream,
                  const std::function<void(std::size_t)>& on_epoch) {
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    shuffle_stream.shuffle(order);
    for (std::size_t begin = 0; begin < n; begin += spec.batch_size) {
      const std::size_t end = std::min(begin + spec.batch_size, n);
      const std::size_t b = end - begin;
      Batch batch;
      batch.x = Matrix(b, train.x.cols);
      batch.labels.resize(b);
      tinylearn::Guidance sub;
      std::vector<double> w;
      const bool use_guide = guidance != nullptr && loss.lambda_guide > 0.0;
      if (use_guide) {
        sub.teacher_logits = Matrix(b, guidance->teacher_logits.cols);
        w.resize(b);
      }
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = order[begin + i];
        const auto xrow = train.x.row(src);
        std::copy(xrow.begin(), xrow.end(), batch.x.row(i).begin());
        batch.labels[i] = train.y[src];
        if (use_guide) {
          const auto trow = guidance->teacher_logits.row(src);
          std::copy(trow.begin(), trow.end(), sub.teacher_logits.row(i).begin());
          w[i] = weights[src];
        }
      }
      const Gradients grads = tinylearn::backward(net, batch, loss,
                                                  use_guide ? &sub : nullptr, w);
      tinylearn::sgd_step(net, grads, spec.learning_rate, spec.weight_decay);
    }
    on_epoch(epoch);
  }
}

}  // namespace

const char* scheme_name(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::Scratch: return "scratch";
    case WeightScheme::PlainKD: return "kd";
    case WeightScheme::AdaConG: return "adacong";
    case WeightScheme::HardCP: return "hard";
    case WeightScheme::Entropy: return "entropy";
    case WeightScheme::MSP: return "msp";
  }
  return "?";
}

WeightScheme scheme_from_name(const std::string& name) {
  if (name == "scratch") return WeightScheme::Scratch;
  if (name == "kd") return WeightScheme::PlainKD;
  if (name == "adacong") return WeightScheme::AdaConG;
  if (name == "hard") return WeightScheme::HardCP;
  if (name == "entropy") return WeightScheme::Entropy;
  if (name == "msp") return WeightScheme::MSP;
  throw std::invalid_argument("unknown KD baseline '" + name + "'");
}

tinylearn::DenseNet train_classifier(const data::Dataset& train, const ModelSpec& spec,
                                     std::size_t num_classes, std::uint64_t seed,
                                     const std::string& stream_tag) {
  rng::Stream init(seed, stream_tag + "-init");
  rng::Stream shuffle(seed, stream_tag + "-shuffle");
  DenseNet net = tinylearn::make_net(layer_dims(train.x.cols, spec.hidden, num_classes),
                                     tinylearn::Activation::ReLU, init);
  LossSpec loss;
  loss.lambda_task = 1.0;
  train_epochs(net, train, spec, loss, nullptr, {}, shuffle, [](std::size_t) {});
  return net;
}

KdResult run_kd(const KdConfig& config, std::uint64_t seed, const std::string& run_id) {
  const std::size_t k = config.num_classes;
  const auto task =
      data::make_task(k, config.dim, config.separation, config.within_sigma, seed);

  // Target-domain pool and test set, both carrying the same corruption
  // process; the teacher's source draw stays clean.
  const auto pool = data::generate_task(task, config.n_pool, /*salt=*/2);
  const auto test = data::generate_task(task, config.n_test, /*salt=*/3);
  data::ShiftSpec pool_shift{config.shift_sigma, config.shift_fraction,
                             seed ^ 0xA5A5A5A5ull};
  data::ShiftSpec test_shift{config.shift_sigma, config.shift_fraction,
                             seed ^ 0x5A5A5A5Aull};
  const auto shifted_pool = data::apply_shift(pool, pool_shift);
  const auto shifted_test = data::apply_shift(test, test_shift);

  rng::Stream split_stream(seed, "kd-split");
  const auto split = data::split_indices(config.n_pool, config.split, split_stream);
  {
    std::set<std::size_t> train_set(split.train.begin(), split.train.end());
    for (std::size_t idx : split.cal) {
      if (train_set.count(idx)) {
        throw std::invalid_argument("calibration and train indices overlap at " +
                                    std::to_string(idx));
      }
    }
  }

  const auto train_data = data::take(shifted_pool.data, split.train);
  const auto cal_data = data::take(shifted_pool.data, split.cal);

  // Teacher. Either a fresh clean source draw, or (control condition) the
  // student's own train split.
  DenseNet teacher;
  if (config.teacher_on_train) {
    teacher = train_classifier(train_data, config.teacher, k, seed, "teacher");
  } else {
    const auto source = data::generate_task(task, config.n_teacher, /*salt=*/1);
    teacher = train_classifier(source, config.teacher, k, seed, "teacher");
  }

  KdResult result;
  result.train_indices = split.train;
  result.cal_indices = split.cal;
  result.teacher_test_accuracy =
      tinylearn::accuracy(teacher, shifted_test.data.x, shifted_test.data.y);

  // Frozen teacher outputs everywhere they are needed.
  const Matrix teacher_train_logits = tinylearn::forward_batch(teacher, train_data.x);
  const Matrix teacher_cal_logits = tinylearn::forward_batch(teacher, cal_data.x);

  const std::size_t n_train = train_data.size();
  const bool conformal_scheme =
      config.scheme == WeightScheme::AdaConG || config.scheme == WeightScheme::HardCP;

  std::vector<double> weights(n_train, 1.0);
  double mean_set_size = 0.0;
  if (conformal_scheme) {
    conformal::CalibrationSet cal_scores;
    for (std::size_t i = 0; i < cal_data.size(); ++i) {
      const auto probs = tinylearn::softmax(teacher_cal_logits.row(i));
      cal_scores.add(conformal::score_confidence(probs, cal_data.y[i]));
    }
    const auto quantile = conformal::compute_quantile(cal_scores, config.alpha);
    const weighting::UncertaintyMapping mapping{weighting::UncertaintyKind::NormalizedSetSize,
                                                k};
    const auto rule = config.scheme == WeightScheme::AdaConG
                          ? weighting::WeightRule::exp_decay(config.gamma)
                          : weighting::WeightRule::hard_zero();
    for (std::size_t i = 0; i < n_train; ++i) {
      const auto probs = tinylearn::softmax(teacher_train_logits.row(i));
      std::vector<double> label_scores(k);
      for (std::size_t y = 0; y < k; ++y) label_scores[y] = 1.0 - probs[y];
      const auto set = conformal::prediction_set(label_scores, quantile);
      mean_set_size += static_cast<double>(set.size());
      const double u = weighting::uncertainty(mapping, set.size());
      weights[i] = weighting::weight(rule, u);
    }
    mean_set_size /= static_cast<double>(n_train);
  } else if (config.scheme == WeightScheme::Entropy || config.scheme == WeightScheme::MSP) {
    const auto kind = config.scheme == WeightScheme::Entropy ? weighting::HeuristicKind::Entropy
                                                             : weighting::HeuristicKind::MSP;
    const auto rule = weighting::WeightRule::exp_decay(config.gamma);
    for (std::size_t i = 0; i < n_train; ++i) {
      const auto probs = tinylearn::softmax(teacher_train_logits.row(i));
      weights[i] = weighting::weight(rule, weighting::heuristic_uncertainty(kind, probs));
    }
  }
  if (config.force_unit_weights) std::fill(weights.begin(), weights.end(), 1.0);

  result.weights = weights;
  result.mean_set_size = mean_set_size;
  result.mean_weight =
      std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(n_train);

  // Student.
  harness::RunRecord record;
  record.run_id = run_id;
  record.seed = seed;

  LossSpec loss;
  loss.lambda_task = config.lambda_task;
  loss.lambda_guide = config.scheme == WeightScheme::Scratch ? 0.0 : config.lambda_guide;
  loss.guide = loss.lambda_guide > 0.0 ? tinylearn::GuideLoss::KLDivergence
                                       : tinylearn::GuideLoss::None;
  loss.kl_temperature = config.kl_temperature;

  tinylearn::Guidance guidance;
  guidance.teacher_logits = teacher_train_logits;

  rng::Stream student_init(seed, "student-init");
  DenseNet student = tinylearn::make_net(
      layer_dims(config.dim, config.student.hidden, k), tinylearn::Activation::ReLU,
      student_init);
  rng::Stream student_shuffle(seed, "student-shuffle");

  train_epochs(student, train_data, config.student, loss,
               loss.lambda_guide > 0.0 ? &guidance : nullptr, weights, student_shuffle,
               [&](std::size_t epoch) {
                 const auto step = static_cast<std::int64_t>(epoch + 1);
                 record.log(step, "train", "accuracy",
                            tinylearn::accuracy(student, train_data.x, train_data.y));
                 record.log(step, "test", "accuracy",
                            tinylearn::accuracy(student, shifted_test.data.x,
                                                shifted_test.data.y));
               });

  result.student_test_accuracy =
      tinylearn::accuracy(student, shifted_test.data.x, shifted_test.data.y);
  record.summary["test_accuracy"] = result.student_test_accuracy;
  record.summary["train_accuracy"] =
      tinylearn::accuracy(student, train_data.x, train_data.y);
  record.summary["teacher_test_accuracy"] = result.teacher_test_accuracy;
  record.summary["mean_weight"] = result.mean_weight;
  if (conformal_scheme) record.summary["mean_set_size"] = mean_set_size;
  result.record = std::move(record);
  return result;
}

}  // namespace adacong::kd
