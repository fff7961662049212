#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adacong/rng.hpp"

namespace adacong::tinylearn {

// Dense row-major matrix, sized once and indexed directly.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

enum class Activation { ReLU, Tanh, None };

struct Layer {
  Matrix weights;               // out x in
  std::vector<double> biases;   // out
};

// Feed-forward net: softmax linear classifier when there is a single layer,
// one-hidden-layer MLP otherwise. The activation sits between layers only;
// the last layer emits raw logits.
struct DenseNet {
  std::vector<Layer> layers;
  Activation activation = Activation::ReLU;

  std::size_t input_dim() const { return layers.front().weights.cols; }
  std::size_t output_dim() const { return layers.back().weights.rows; }
};

// Glorot-uniform initialization, reproducible from the stream.
DenseNet make_net(const std::vector<std::size_t>& dims, Activation activation,
                  rng::Stream& stream);

std::vector<double> forward(const DenseNet& net, std::span<const double> x);
Matrix forward_batch(const DenseNet& net, const Matrix& x);

std::vector<double> softmax(std::span<const double> logits);
int argmax(std::span<const double> values);

// Guidance half of a combined loss. KLDivergence softens both logit vectors
// at temperature T and rescales by T^2; MSELogits acts on raw logits;
// CrossEntropyHard scores the student against provided hard targets.
enum class GuideLoss { None, KLDivergence, MSELogits, CrossEntropyHard };

struct LossSpec {
  double lambda_task = 1.0;
  double lambda_guide = 0.0;
  GuideLoss guide = GuideLoss::None;
  double kl_temperature = 4.0;
};

struct Batch {
  Matrix x;                 // B x input_dim
  std::vector<int> labels;  // task targets; may be empty when lambda_task == 0
};

// Targets for the guidance term: teacher logits for KL/MSE, hard labels for
// CrossEntropyHard.
struct Guidance {
  Matrix teacher_logits;
  std::vector<int> hard_labels;
};

struct Gradients {
  std::vector<Layer> layers;  // same shapes as the net
  double loss = 0.0;
};

// Mean combined loss over the batch:
//   lambda_task * mean CE  +  lambda_guide * mean w_i * guide_i
// `guide_weights` has one entry in [0,1] per sample (empty means all ones).
double combined_loss(const DenseNet& net, const Batch& batch, const LossSpec& spec,
                     const Guidance* guidance, std::span<const double> guide_weights);

// Exact gradients of combined_loss with respect to every parameter.
// Throws std::runtime_error with batch diagnostics if the loss is NaN.
Gradients backward(const DenseNet& net, const Batch& batch, const LossSpec& spec,
                   const Guidance* guidance, std::span<const double> guide_weights);

// theta <- theta - lr * (grad + weight_decay * theta)
void sgd_step(DenseNet& net, const Gradients& grads, double learning_rate,
              double weight_decay);

void accumulate(Gradients& into, const Gradients& other, double scale = 1.0);

double accuracy(const DenseNet& net, const Matrix& x, std::span<const int> labels);

// Checkpoint: JSON document with a dimension header and flat parameter lists.
std::string to_json_string(const DenseNet& net);
DenseNet from_json_string(const std::string& text);
void save_checkpoint(const DenseNet& net, const std::filesystem::path& path);
DenseNet load_checkpoint(const std::filesystem::path& path);

}  // namespace adacong::tinylearn
