#include "adacong/data.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace adacong::data {

SyntheticTask make_task(std::size_t num_classes, std::size_t dim, double separation,
                        double within_sigma, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("task needs at least two classes");
  if (dim == 0) throw std::invalid_argument("task needs a positive feature dimension");
  SyntheticTask task;
  task.num_classes = num_classes;
  task.dim = dim;
  task.within_sigma = within_sigma;
  task.seed = seed;
  task.class_means = tinylearn::Matrix(num_classes, dim);

  rng::Stream stream(seed, "task-means");
  for (std::size_t c = 0; c < num_classes; ++c) {
    double norm2 = 0.0;
    auto row = task.class_means.row(c);
    for (auto& v : row) {
      v = stream.normal();
      norm2 += v * v;
    }
    const double scale = separation / std::sqrt(std::max(norm2, 1e-12));
    for (auto& v : row) v *= scale;
  }
  return task;
}

Dataset generate_task(const SyntheticTask& task, std::size_t n, std::uint64_t salt) {
  if (n < task.num_classes) {
    throw std::invalid_argument("generate_task: need at least one sample per class");
  }
  Dataset out;
  out.x = tinylearn::Matrix(n, task.dim);
  out.y.resize(n);
  rng::Stream stream(task.seed ^ (salt * 0x9E3779B97F4A7C15ull), "task-samples");
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % task.num_classes);
    out.y[i] = label;
    const auto mean = task.class_means.row(static_cast<std::size_t>(label));
    auto row = out.x.row(i);
    for (std::size_t d = 0; d < task.dim; ++d) {
      row[d] = mean[d] + task.within_sigma * stream.normal();
    }
  }
  return out;
}

int nearest_mean_label(const SyntheticTask& task, std::span<const double> x) {
  if (x.size() != task.dim) throw std::invalid_argument("nearest_mean_label: bad dimension");
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < task.num_classes; ++c) {
    const auto mean = task.class_means.row(c);
    double d2 = 0.0;
    for (std::size_t d = 0; d < task.dim; ++d) {
      const double diff = x[d] - mean[d];
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double nearest_mean_accuracy(const SyntheticTask& task, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("nearest_mean_accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (nearest_mean_label(task, data.x.row(i)) == data.y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

ShiftedDataset apply_shift(const Dataset& dataset, const ShiftSpec& shift) {
  if (dataset.size() == 0) throw std::invalid_argument("apply_shift: empty dataset");
  if (shift.noise_fraction < 0.0 || shift.noise_fraction > 1.0) {
    throw std::invalid_argument("apply_shift: noise fraction outside [0, 1]");
  }
  ShiftedDataset out;
  out.data = dataset;
  out.perturbed.assign(dataset.size(), 0);

  const auto n = dataset.size();
  const auto count = static_cast<std::size_t>(
      std::llround(shift.noise_fraction * static_cast<double>(n)));
  rng::Stream stream(shift.seed, "shift");
  const auto chosen = stream.sample_without_replacement(n, count);
  for (std::size_t idx : chosen) {
    out.perturbed[idx] = 1;
    auto row = out.data.x.row(idx);
    for (auto& v : row) v += shift.noise_sigma * stream.normal();
  }
  return out;
}

SplitIndices split_indices(std::size_t n, const SplitPlan& plan, rng::Stream& stream) {
  if (n < 2) throw std::invalid_argument("split needs at least two samples");
  if (std::abs(plan.train_fraction + plan.cal_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("train and calibration fractions must sum to 1");
  }
  if (!(plan.cal_fraction > 0.0 && plan.cal_fraction < 1.0)) {
    throw std::invalid_argument("calibration fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  stream.shuffle(idx);

  auto n_cal = static_cast<std::size_t>(std::llround(plan.cal_fraction * static_cast<double>(n)));
  n_cal = std::max<std::size_t>(1, std::min(n_cal, n - 1));

  SplitIndices split;
  split.cal.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_cal));
  split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_cal), idx.end());
  return split;
}

Dataset take(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.x = tinylearn::Matrix(indices.size(), dataset.x.cols);
  out.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = dataset.x.row(indices[i]);
    auto dst = out.x.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    out.y.push_back(dataset.y.empty() ? -1 : dataset.y[indices[i]]);
  }
  return out;
}

std::vector<double> augment(std::span<const double> x, AugmentStrength strength,
                            const AugmentParams& params, rng::Stream& stream) {
  std::vector<double> view(x.begin(), x.end());
  const double sigma =
      strength == AugmentStrength::Weak ? params.sigma_weak : params.sigma_strong;
  for (auto& v : view) {
    if (sigma > 0.0) v += sigma * stream.normal();
  }
  if (strength == AugmentStrength::Strong && params.drop_fraction > 0.0) {
    const auto count = static_cast<std::size_t>(
        std::llround(params.drop_fraction * static_cast<double>(view.size())));
    const auto dropped = stream.sample_without_replacement(view.size(), count);
    for (std::size_t d : dropped) view[d] = 0.0;
  }
  return view;
}

}  // namespace adacong::data
