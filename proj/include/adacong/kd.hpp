#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adacong/data.hpp"
#include "adacong/runrecord.hpp"
#include "adacong/tinylearn.hpp"

namespace adacong::kd {

// How the per-sample guidance weight is produced. Scratch disables the
// guidance loss entirely; PlainKD keeps it at 1; the conformal schemes map
// prediction-set size to a weight; Entropy/MSP use heuristic uncertainties
// through the same exponential decay.
enum class WeightScheme { Scratch, PlainKD, AdaConG, HardCP, Entropy, MSP };

const char* scheme_name(WeightScheme scheme);
WeightScheme scheme_from_name(const std::string& name);

struct ModelSpec {
  std::size_t hidden = 0;  // 0 = softmax linear classifier
  std::size_t epochs = 40;
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
};

struct KdConfig {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  double separation = 3.0;
  double within_sigma = 1.0;

  std::size_t n_pool = 2500;    // target pool, split into train + calibration
  std::size_t n_test = 1000;
  std::size_t n_teacher = 5000; // clean source draw for the teacher

  double shift_sigma = 2.5;     // Gaussian corruption of the target domain
  double shift_fraction = 0.4;

  data::SplitPlan split;
  ModelSpec teacher;
  ModelSpec student;
  // Control condition: train the teacher on the student's own (clean) train
  // split instead of a fresh source draw.
  bool teacher_on_train = false;

  double alpha = 0.1;
  double gamma = 10.0;
  double kl_temperature = 4.0;
  double lambda_task = 1.0;
  double lambda_guide = 1.0;

  WeightScheme scheme = WeightScheme::AdaConG;
  bool force_unit_weights = false;  // reduction hook: overrides weights with 1
};

struct KdResult {
  harness::RunRecord record;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> cal_indices;
  std::vector<double> weights;  // per train sample, after any override
  double teacher_test_accuracy = 0.0;
  double student_test_accuracy = 0.0;
  double mean_weight = 0.0;
  double mean_set_size = 0.0;   // conformal schemes only, else 0
};

// Trains the frozen teacher, conformalizes it on the held-out calibration
// split, then trains the student against the weighted combined loss.
// Throws std::invalid_argument if the calibration and train indices overlap.
KdResult run_kd(const KdConfig& config, std::uint64_t seed, const std::string& run_id);

// Teacher-only helper: trains a model spec on a dataset (used by tests).
tinylearn::DenseNet train_classifier(const data::Dataset& train, const ModelSpec& spec,
                                     std::size_t num_classes, std::uint64_t seed,
                                     const std::string& stream_tag);

}  // namespace adacong::kd
