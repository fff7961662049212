#include "adacong/tinylearn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace adacong::tinylearn {

namespace {

double apply_activation(Activation act, double v) {
  switch (act) {
    case Activation::ReLU: return v > 0.0 ? v : 0.0;
    case Activation::Tanh: return std::tanh(v);
    case Activation::None: return v;
  }
  return v;
}

// Derivative expressed through the post-activation value; valid for all three
// kinds (ReLU: 1 if output > 0, Tanh: 1 - y^2, None: 1).
double activation_grad(Activation act, double post) {
  switch (act) {
    case Activation::ReLU: return post > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - post * post;
    case Activation::None: return 1.0;
  }
  return 1.0;
}

void validate_spec(const LossSpec& spec) {
  if (spec.lambda_task < 0.0 || spec.lambda_guide < 0.0) {
    throw std::invalid_argument("loss coefficients must be >= 0");
  }
  if (spec.lambda_task == 0.0 && spec.lambda_guide == 0.0) {
    throw std::invalid_argument("task and guide coefficients cannot both be zero");
  }
  if (spec.lambda_guide > 0.0 && spec.guide == GuideLoss::None) {
    throw std::invalid_argument("lambda_guide > 0 requires a guide loss kind");
  }
  if (spec.guide == GuideLoss::KLDivergence && !(spec.kl_temperature > 0.0)) {
    throw std::invalid_argument("KL temperature must be positive");
  }
}

struct ForwardCache {
  // activations[0] is the input batch; activations[i] the post-activation
  // output of layer i-1 (for the last layer, the raw logits).
  std::vector<Matrix> activations;
};

ForwardCache run_forward(const DenseNet& net, const Matrix& x) {
  if (x.cols != net.input_dim()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  ForwardCache cache;
  cache.activations.reserve(net.layers.size() + 1);
  cache.activations.push_back(x);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const Layer& layer = net.layers[li];
    const Matrix& in = cache.activations.back();
    const bool last = li + 1 == net.layers.size();
    Matrix out(in.rows, layer.weights.rows);
    for (std::size_t b = 0; b < in.rows; ++b) {
      for (std::size_t o = 0; o < layer.weights.rows; ++o) {
        double acc = layer.biases[o];
        const double* w = layer.weights.data.data() + o * layer.weights.cols;
        const double* xi = in.data.data() + b * in.cols;
        for (std::size_t i = 0; i < layer.weights.cols; ++i) acc += w[i] * xi[i];
        out.at(b, o) = last ? acc : apply_activation(net.activation, acc);
      }
    }
    cache.activations.push_back(std::move(out));
  }
  return cache;
}

std::vector<double> softmax_scaled(std::span<const double> logits, double inv_temp) {
  std::vector<double> out(logits.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_logit = std::max(max_logit, v * inv_temp);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] * inv_temp - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Per-sample loss and dL/dlogits for the guidance term.
double guide_loss_and_grad(const LossSpec& spec, std::span<const double> logits,
                           const Guidance& guidance, std::size_t sample,
                           std::span<double> grad_out) {
  const std::size_t k = logits.size();
  switch (spec.guide) {
    case GuideLoss::KLDivergence: {
      const double t = spec.kl_temperature;
      const auto teacher = guidance.teacher_logits.row(sample);
      const auto p = softmax_scaled(teacher, 1.0 / t);
      const auto q = softmax_scaled(logits, 1.0 / t);
      double loss = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        if (p[j] > 0.0) loss += p[j] * (std::log(p[j]) - std::log(q[j]));
        grad_out[j] = t * (q[j] - p[j]);
      }
      return t * t * loss;
    }
    case GuideLoss::MSELogits: {
      const auto teacher = guidance.teacher_logits.row(sample);
      double loss = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double d = logits[j] - teacher[j];
        loss += d * d;
        grad_out[j] = 2.0 * d / static_cast<double>(k);
      }
      return loss / static_cast<double>(k);
    }
    case GuideLoss::CrossEntropyHard: {
      const int label = guidance.hard_labels[sample];
      if (label < 0 || static_cast<std::size_t>(label) >= k) {
        throw std::out_of_range("guide hard label out of range");
      }
      const auto q = softmax_scaled(logits, 1.0);
      for (std::size_t j = 0; j < k; ++j) grad_out[j] = q[j];
      grad_out[static_cast<std::size_t>(label)] -= 1.0;
      return -std::log(std::max(q[static_cast<std::size_t>(label)], 1e-300));
    }
    case GuideLoss::None:
      break;
  }
  throw std::logic_error("guide loss kind not set");
}

// Loss value plus dL/dlogits for the whole batch; shared by combined_loss and
// backward so the two can never drift apart.
double output_gradients(const DenseNet& net, const Batch& batch, const LossSpec& spec,
                        const Guidance* guidance, std::span<const double> guide_weights,
                        const Matrix& logits, Matrix* dlogits) {
  validate_spec(spec);
  const std::size_t b_count = batch.x.rows;
  const std::size_t k = net.output_dim();
  if (b_count == 0) throw std::invalid_argument("empty batch");
  const bool use_task = spec.lambda_task > 0.0;
  const bool use_guide = spec.lambda_guide > 0.0 && spec.guide != GuideLoss::None;
  if (use_task && batch.labels.size() != b_count) {
    throw std::invalid_argument("task loss enabled but labels are missing");
  }
  if (use_guide && guidance == nullptr) {
    throw std::invalid_argument("guide loss enabled but guidance targets are missing");
  }
  if (!guide_weights.empty() && guide_weights.size() != b_count) {
    throw std::invalid_argument("per-sample weight count does not match the batch");
  }
  for (double w : guide_weights) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw std::invalid_argument("per-sample weights must lie in [0, 1]");
    }
  }

  const double inv_b = 1.0 / static_cast<double>(b_count);
  double total = 0.0;
  std::vector<double> gbuf(k);
  for (std::size_t s = 0; s < b_count; ++s) {
    const auto z = logits.row(s);
    if (use_task) {
      const int label = batch.labels[s];
      if (label < 0 || static_cast<std::size_t>(label) >= k) {
        throw std::out_of_range("task label out of range");
      }
      const auto q = softmax_scaled(z, 1.0);
      total += spec.lambda_task * inv_b *
               (-std::log(std::max(q[static_cast<std::size_t>(label)], 1e-300)));
      if (dlogits) {
        const double c = spec.lambda_task * inv_b;
        for (std::size_t j = 0; j < k; ++j) dlogits->at(s, j) += c * q[j];
        dlogits->at(s, static_cast<std::size_t>(label)) -= c;
      }
    }
    if (use_guide) {
      const double w = guide_weights.empty() ? 1.0 : guide_weights[s];
      const double gl = guide_loss_and_grad(spec, z, *guidance, s, gbuf);
      total += spec.lambda_guide * inv_b * w * gl;
      if (dlogits && w != 0.0) {
        const double c = spec.lambda_guide * inv_b * w;
        for (std::size_t j = 0; j < k; ++j) dlogits->at(s, j) += c * gbuf[j];
      }
    }
  }
  if (std::isnan(total)) {
    std::ostringstream oss;
    oss << "loss is NaN (batch size " << b_count << ", lambda_task " << spec.lambda_task
        << ", lambda_guide " << spec.lambda_guide << ")";
    throw std::runtime_error(oss.str());
  }
  return total;
}

}  // namespace

DenseNet make_net(const std::vector<std::size_t>& dims, Activation activation,
                  rng::Stream& stream) {
  if (dims.size() < 2) throw std::invalid_argument("make_net: need input and output dims");
  DenseNet net;
  net.activation = activation;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t fan_in = dims[i];
    const std::size_t fan_out = dims[i + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer;
    layer.weights = Matrix(fan_out, fan_in);
    layer.biases.assign(fan_out, 0.0);
    for (double& w : layer.weights.data) w = stream.uniform(-a, a);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::vector<double> forward(const DenseNet& net, std::span<const double> x) {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.data.begin());
  const Matrix out = forward_batch(net, m);
  return {out.data.begin(), out.data.end()};
}

Matrix forward_batch(const DenseNet& net, const Matrix& x) {
  auto cache = run_forward(net, x);
  return std::move(cache.activations.back());
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

double combined_loss(const DenseNet& net, const Batch& batch, const LossSpec& spec,
                     const Guidance* guidance, std::span<const double> guide_weights) {
  const auto cache = run_forward(net, batch.x);
  return output_gradients(net, batch, spec, guidance, guide_weights,
                          cache.activations.back(), nullptr);
}

Gradients backward(const DenseNet& net, const Batch& batch, const LossSpec& spec,
                   const Guidance* guidance, std::span<const double> guide_weights) {
  const auto cache = run_forward(net, batch.x);
  const Matrix& logits = cache.activations.back();
  Matrix delta(logits.rows, logits.cols);
  Gradients grads;
  grads.loss = output_gradients(net, batch, spec, guidance, guide_weights, logits, &delta);

  grads.layers.resize(net.layers.size());
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& layer = net.layers[li];
    const Matrix& input = cache.activations[li];
    Layer& g = grads.layers[li];
    g.weights = Matrix(layer.weights.rows, layer.weights.cols);
    g.biases.assign(layer.biases.size(), 0.0);

    for (std::size_t b = 0; b < delta.rows; ++b) {
      for (std::size_t o = 0; o < layer.weights.rows; ++o) {
        const double d = delta.at(b, o);
        if (d == 0.0) continue;
        g.biases[o] += d;
        double* gw = g.weights.data.data() + o * g.weights.cols;
        const double* xi = input.data.data() + b * input.cols;
        for (std::size_t i = 0; i < layer.weights.cols; ++i) gw[i] += d * xi[i];
      }
    }

    if (li > 0) {
      // Propagate through the weights, then through the activation of the
      // previous layer (whose post-activation values are input).
      Matrix prev_delta(delta.rows, layer.weights.cols);
      for (std::size_t b = 0; b < delta.rows; ++b) {
        for (std::size_t i = 0; i < layer.weights.cols; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < layer.weights.rows; ++o) {
            acc += delta.at(b, o) * layer.weights.at(o, i);
          }
          prev_delta.at(b, i) = acc * activation_grad(net.activation, input.at(b, i));
        }
      }
      delta = std::move(prev_delta);
    }
  }
  return grads;
}

void sgd_step(DenseNet& net, const Gradients& grads, double learning_rate,
              double weight_decay) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (grads.layers.size() != net.layers.size()) {
    throw std::invalid_argument("gradient/net layer count mismatch");
  }
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Layer& layer = net.layers[li];
    const Layer& g = grads.layers[li];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      layer.weights.data[i] -=
          learning_rate * (g.weights.data[i] + weight_decay * layer.weights.data[i]);
    }
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      layer.biases[i] -= learning_rate * (g.biases[i] + weight_decay * layer.biases[i]);
    }
  }
}

void accumulate(Gradients& into, const Gradients& other, double scale) {
  if (into.layers.empty()) {
    into = other;
    if (scale != 1.0) {
      for (auto& layer : into.layers) {
        for (double& v : layer.weights.data) v *= scale;
        for (double& v : layer.biases) v *= scale;
      }
      into.loss *= scale;
    }
    return;
  }
  if (into.layers.size() != other.layers.size()) {
    throw std::invalid_argument("accumulate: gradient shapes differ");
  }
  for (std::size_t li = 0; li < into.layers.size(); ++li) {
    auto& a = into.layers[li];
    const auto& b = other.layers[li];
    for (std::size_t i = 0; i < a.weights.data.size(); ++i) {
      a.weights.data[i] += scale * b.weights.data[i];
    }
    for (std::size_t i = 0; i < a.biases.size(); ++i) a.biases[i] += scale * b.biases[i];
  }
  into.loss += scale * other.loss;
}

double accuracy(const DenseNet& net, const Matrix& x, std::span<const int> labels) {
  if (x.rows != labels.size()) throw std::invalid_argument("accuracy: size mismatch");
  const Matrix logits = forward_batch(net, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (argmax(logits.row(i)) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(x.rows);
}

std::string to_json_string(const DenseNet& net) {
  nlohmann::json doc;
  doc["format"] = "adacong-densenet";
  doc["version"] = 1;
  switch (net.activation) {
    case Activation::ReLU: doc["activation"] = "relu"; break;
    case Activation::Tanh: doc["activation"] = "tanh"; break;
    case Activation::None: doc["activation"] = "none"; break;
  }
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers) {
    nlohmann::json jl;
    jl["rows"] = layer.weights.rows;
    jl["cols"] = layer.weights.cols;
    jl["weights"] = layer.weights.data;
    jl["biases"] = layer.biases;
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

DenseNet from_json_string(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.value("format", "") != "adacong-densenet") {
    throw std::runtime_error("checkpoint: unrecognized format tag");
  }
  DenseNet net;
  const std::string act = doc.at("activation").get<std::string>();
  if (act == "relu") net.activation = Activation::ReLU;
  else if (act == "tanh") net.activation = Activation::Tanh;
  else if (act == "none") net.activation = Activation::None;
  else throw std::runtime_error("checkpoint: unknown activation " + act);

  for (const auto& jl : doc.at("layers")) {
    Layer layer;
    layer.weights.rows = jl.at("rows").get<std::size_t>();
    layer.weights.cols = jl.at("cols").get<std::size_t>();
    layer.weights.data = jl.at("weights").get<std::vector<double>>();
    layer.biases = jl.at("biases").get<std::vector<double>>();
    if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols ||
        layer.biases.size() != layer.weights.rows) {
      throw std::runtime_error("checkpoint: dimension header does not match payload");
    }
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) throw std::runtime_error("checkpoint: no layers");
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
    if (net.layers[i].weights.rows != net.layers[i + 1].weights.cols) {
      throw std::runtime_error("checkpoint: layer dimensions do not chain");
    }
  }
  return net;
}

void save_checkpoint(const DenseNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out << to_json_string(net);
}

DenseNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

}  // namespace adacong::tinylearn
