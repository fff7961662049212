#pragma once

#include <cstdint>
#include <vector>

#include "adacong/rng.hpp"
#include "adacong/tinylearn.hpp"

namespace adacong::data {

struct Dataset {
  tinylearn::Matrix x;
  std::vector<int> y;

  std::size_t size() const { return x.rows; }
};

// Gaussian mixture classification task with one isotropic cluster per class.
// The Bayes-optimal rule (equal priors, shared sigma) is nearest class mean.
struct SyntheticTask {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  tinylearn::Matrix class_means;  // K x dim
  double within_sigma = 1.0;
  std::uint64_t seed = 0;
};

// Random class means: unit directions scaled by `separation`.
SyntheticTask make_task(std::size_t num_classes, std::size_t dim, double separation,
                        double within_sigma, std::uint64_t seed);

// n samples with classes balanced within +-1, deterministic from
// (task.seed, salt). Distinct salts give independent draws of the same task.
Dataset generate_task(const SyntheticTask& task, std::size_t n, std::uint64_t salt = 0);

int nearest_mean_label(const SyntheticTask& task, std::span<const double> x);
double nearest_mean_accuracy(const SyntheticTask& task, const Dataset& data);

// Gaussian corruption of a uniformly chosen sample subset.
struct ShiftSpec {
  double noise_sigma = 0.0;
  double noise_fraction = 0.0;  // in [0, 1]
  std::uint64_t seed = 0;
};

struct ShiftedDataset {
  Dataset data;
  std::vector<std::uint8_t> perturbed;  // 1 where noise was added
};

// Returns a perturbed copy; exactly round(noise_fraction * n) samples get
// N(0, sigma^2) noise per feature. The input is left untouched.
ShiftedDataset apply_shift(const Dataset& dataset, const ShiftSpec& shift);

// Disjoint train/calibration split over a sample pool.
struct SplitPlan {
  double train_fraction = 0.9;
  double cal_fraction = 0.1;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> cal;
};

SplitIndices split_indices(std::size_t n, const SplitPlan& plan, rng::Stream& stream);

Dataset take(const Dataset& dataset, const std::vector<std::size_t>& indices);

// Feature-space stand-ins for image augmentation: weak adds small Gaussian
// noise, strong adds larger noise and zeroes a random fraction of features.
enum class AugmentStrength { Weak, Strong };

struct AugmentParams {
  double sigma_weak = 0.05;
  double sigma_strong = 0.3;
  double drop_fraction = 0.2;
};

std::vector<double> augment(std::span<const double> x, AugmentStrength strength,
                            const AugmentParams& params, rng::Stream& stream);

}  // namespace adacong::data
