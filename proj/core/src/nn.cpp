#include "streamrec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "streamrec/error.hpp"

namespace streamrec::nn {

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

void Tensor::fill_uniform(Rng& rng, double low, double high) {
  std::uniform_real_distribution<double> dist(low, high);
  for (auto& x : data) x = dist(rng);
}

Activation parse_activation(const std::string& name) {
  if (name == "identity" || name == "linear") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  throw ConfigError("unknown activation '" + name + "'");
}

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(std::span<const double> logits) {
  Vec out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (auto& x : out) {
    x = std::exp(x - top);
    total += x;
  }
  for (auto& x : out) x /= total;
  return out;
}

void apply_activation(Activation act, std::span<double> values) {
  switch (act) {
    case Activation::kIdentity: return;
    case Activation::kRelu:
      for (auto& x : values) x = x > 0.0 ? x : 0.0;
      return;
    case Activation::kTanh:
      for (auto& x : values) x = std::tanh(x);
      return;
    case Activation::kSigmoid:
      for (auto& x : values) x = sigmoid(x);
      return;
    case Activation::kSoftmax: {
      const auto s = softmax(values);
      std::copy(s.begin(), s.end(), values.begin());
      return;
    }
  }
}

Vec activation_backward(Activation act, std::span<const double> output, std::span<const double> upstream) {
  Vec dz(upstream.begin(), upstream.end());
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < dz.size(); ++i) {
        if (output[i] <= 0.0) dz[i] = 0.0;
      }
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - output[i] * output[i];
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= output[i] * (1.0 - output[i]);
      break;
    case Activation::kSoftmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < dz.size(); ++i) dot += output[i] * upstream[i];
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = output[i] * (upstream[i] - dot);
      break;
    }
  }
  return dz;
}

DenseLayer::DenseLayer(const std::string& name, std::size_t in_dim, std::size_t out_dim, Activation act)
    : weights_(name + ".weight", out_dim, in_dim), bias_(name + ".bias", out_dim, 1), act_(act) {
  if (in_dim == 0 || out_dim == 0) throw DimensionError("dense layer '" + name + "' has a zero dimension");
}

Vec DenseLayer::forward(std::span<const double> input) const {
  if (input.size() != in_dim()) {
    throw DimensionError(weights_.name + ": input has " + std::to_string(input.size()) + " entries, expected " +
                         std::to_string(in_dim()));
  }
  Vec out(bias_.data);
  const std::size_t n_in = in_dim();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* w = weights_.data.data() + r * n_in;
    double acc = 0.0;
    for (std::size_t c = 0; c < n_in; ++c) acc += w[c] * input[c];
    out[r] += acc;
  }
  apply_activation(act_, out);
  return out;
}

Vec DenseLayer::forward(std::span<const double> input, DenseTrace& trace) const {
  trace.output = forward(input);
  trace.input.assign(input.begin(), input.end());
  trace.recorded = true;
  return trace.output;
}

Vec DenseLayer::backward(const DenseTrace& trace, std::span<const double> upstream, DenseLayer& grads) const {
  if (!trace.recorded) throw std::logic_error(weights_.name + ": backward without a recorded forward pass");
  if (upstream.size() != out_dim()) throw DimensionError(weights_.name + ": upstream gradient size mismatch");
  if (!grads.weights_.same_shape(weights_)) throw DimensionError(weights_.name + ": gradient shape mismatch");

  const Vec dz = activation_backward(act_, trace.output, upstream);
  const std::size_t n_in = in_dim();
  Vec dx(n_in, 0.0);
  for (std::size_t r = 0; r < dz.size(); ++r) {
    const double g = dz[r];
    if (g == 0.0) continue;
    grads.bias_.data[r] += g;
    double* gw = grads.weights_.data.data() + r * n_in;
    const double* w = weights_.data.data() + r * n_in;
    for (std::size_t c = 0; c < n_in; ++c) {
      gw[c] += g * trace.input[c];
      dx[c] += g * w[c];
    }
  }
  return dx;
}

void DenseLayer::init(Rng& rng, double scale) {
  weights_.fill_uniform(rng, -scale, scale);
  bias_.fill(0.0);
}

std::span<const double> EmbeddingTable::lookup(std::size_t index) const {
  if (index >= rows()) {
    throw std::out_of_range(values_.name + ": index " + std::to_string(index) + " >= " + std::to_string(rows()));
  }
  return values_.row(index);
}

void EmbeddingTable::accumulate(std::size_t index, std::span<const double> grad) {
  if (index >= rows()) throw std::out_of_range(values_.name + ": gradient row out of range");
  auto row = values_.row(index);
  for (std::size_t c = 0; c < row.size(); ++c) row[c] += grad[c];
}

Vec Mlp::forward(std::span<const double> input) const {
  Vec x(input.begin(), input.end());
  for (const auto& layer : layers) x = layer.forward(x);
  return x;
}

Vec Mlp::forward(std::span<const double> input, std::vector<DenseTrace>& traces) const {
  traces.resize(layers.size());
  Vec x(input.begin(), input.end());
  for (std::size_t i = 0; i < layers.size(); ++i) x = layers[i].forward(x, traces[i]);
  return x;
}

Vec Mlp::backward(const std::vector<DenseTrace>& traces, std::span<const double> upstream, Mlp& grads) const {
  if (traces.size() != layers.size()) throw std::logic_error("mlp backward without a recorded forward pass");
  Vec g(upstream.begin(), upstream.end());
  for (std::size_t i = layers.size(); i-- > 0;) g = layers[i].backward(traces[i], g, grads.layers[i]);
  return g;
}

void Adam::step(const ParameterList& params, const ConstParameterList& grads) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i])) throw DimensionError("adam: shape mismatch for " + params[i]->name);
  }
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->name, p->rows, p->cols);
      v_.emplace_back(p->name, p->rows, p->cols);
    }
  } else if (m_.size() != params.size()) {
    throw DimensionError("adam: parameter list changed between steps");
  }

  ++step_;
  const auto& c = config_;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
  const double shrink = 1.0 - c.learning_rate * c.l2;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t]->data;
    const auto& g = grads[t]->data;
    auto& m = m_[t].data;
    auto& v = v_[t].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
      p[i] *= shrink;
    }
  }
}

GradientCheckResult check_gradients(const ParameterList& params, const ConstParameterList& analytic,
                                    const std::function<double()>& loss, double h, double floor) {
  if (params.size() != analytic.size()) throw DimensionError("gradient check: tensor count mismatch");
  GradientCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    if (!p.same_shape(*analytic[t])) throw DimensionError("gradient check: shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + h;
      const double up = loss();
      p.data[i] = saved - h;
      const double down = loss();
      p.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t]->data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = rel;
        result.worst_tensor = p.name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace streamrec::nn
