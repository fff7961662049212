#pragma once

#include <cstdint>
#include <string>

#include "adacong/data.hpp"
#include "adacong/runrecord.hpp"

namespace adacong::ssl {

// Unweighted keeps every surviving pseudo-label at weight 1 (FixMatch-style);
// AdaConG reweights survivors by conformal prediction-set size.
enum class SslScheme { Unweighted, AdaConG };

// Consistency loss on the strong view: cross-entropy against the pseudo-label
// or MSE against the weak-view logits.
enum class SslGuide { CrossEntropy, MseLogits };

const char* scheme_name(SslScheme scheme);
SslScheme scheme_from_name(const std::string& name);

struct SslConfig {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  double separation = 2.4;
  double within_sigma = 1.0;

  std::size_t labeled_per_class = 4;
  std::size_t n_unlabeled = 2000;
  std::size_t n_test = 1000;

  std::size_t hidden = 0;
  std::size_t iterations = 1000;
  std::size_t batch_unlabeled = 64;
  double learning_rate = 0.1;
  double weight_decay = 1e-4;

  double alpha = 0.05;
  double gamma = 8.0;
  double confidence_threshold = 0.95;
  bool use_threshold = true;  // off: every pseudo-label survives, CP still weights
  double lambda_u = 1.0;
  SslGuide guide = SslGuide::CrossEntropy;
  std::size_t recalibrate_every = 50;

  data::AugmentParams aug;
  std::size_t eval_every = 100;

  SslScheme scheme = SslScheme::AdaConG;
  bool force_unit_weights = false;  // reduction hook
};

struct SslResult {
  harness::RunRecord record;
  double final_test_accuracy = 0.0;
  double pseudo_label_precision = 0.0;  // over all survivors seen
  double mean_weight = 0.0;             // over all survivors seen
};

// Semi-supervised loop: L = L_s + lambda_u * L_u with pseudo-labels from the
// weakly augmented view, trained on the strongly augmented view, and the
// unsupervised term reweighted per sample. The calibration set is the labeled
// data under weak augmentation, re-scored every `recalibrate_every` steps.
// Throws std::invalid_argument when the labeled set would be empty.
SslResult run_ssl(const SslConfig& config, std::uint64_t seed, const std::string& run_id);

}  // namespace adacong::ssl
