#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "streamrec/random.hpp"

namespace streamrec::nn {

using Vec = std::vector<double>;

/// Named row-major matrix of doubles. Vectors are (n x 1).
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), rows(rows), cols(cols), data(rows * cols, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const noexcept { return data.size(); }
  bool same_shape(const Tensor& o) const noexcept { return rows == o.rows && cols == o.cols; }

  void fill(double v);
  void fill_uniform(Rng& rng, double low, double high);
};

using ParameterList = std::vector<Tensor*>;
using ConstParameterList = std::vector<const Tensor*>;

enum class Activation { kIdentity, kRelu, kTanh, kSigmoid, kSoftmax };

Activation parse_activation(const std::string& name);
const char* to_string(Activation a) noexcept;

double sigmoid(double x) noexcept;

/// Max-subtracted softmax.
Vec softmax(std::span<const double> logits);

void apply_activation(Activation act, std::span<double> values);

/// Maps dL/dy to dL/dz for y = act(z), using only the activation output.
Vec activation_backward(Activation act, std::span<const double> output, std::span<const double> upstream);

/// Activations a dense forward pass records for its backward pass.
struct DenseTrace {
  Vec input;
  Vec output;
  bool recorded = false;
};

/// y = act(W x + b), W is (out x in).
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, std::size_t in_dim, std::size_t out_dim, Activation act);

  std::size_t in_dim() const noexcept { return weights_.cols; }
  std::size_t out_dim() const noexcept { return weights_.rows; }
  Activation activation() const noexcept { return act_; }

  Vec forward(std::span<const double> input) const;
  Vec forward(std::span<const double> input, DenseTrace& trace) const;

  /// Accumulates parameter gradients into `grads` (same shape) and returns
  /// dL/dinput. Throws std::logic_error if `trace` holds no forward pass.
  Vec backward(const DenseTrace& trace, std::span<const double> upstream, DenseLayer& grads) const;

  void init(Rng& rng, double scale);

  Tensor& weights() noexcept { return weights_; }
  const Tensor& weights() const noexcept { return weights_; }
  Tensor& bias() noexcept { return bias_; }
  const Tensor& bias() const noexcept { return bias_; }

 private:
  Tensor weights_;
  Tensor bias_;
  Activation act_ = Activation::kIdentity;
};

/// Lookup table of `rows` embeddings of width `dim`.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(const std::string& name, std::size_t rows, std::size_t dim) : values_(name, rows, dim) {}

  std::size_t rows() const noexcept { return values_.rows; }
  std::size_t dim() const noexcept { return values_.cols; }

  /// Throws std::out_of_range for index >= rows().
  std::span<const double> lookup(std::size_t index) const;
  /// Adds `grad` into row `index` of this (gradient-shaped) table.
  void accumulate(std::size_t index, std::span<const double> grad);

  Tensor& values() noexcept { return values_; }
  const Tensor& values() const noexcept { return values_; }

 private:
  Tensor values_;
};

/// A stack of dense layers applied in order.
struct Mlp {
  std::vector<DenseLayer> layers;

  Vec forward(std::span<const double> input) const;
  Vec forward(std::span<const double> input, std::vector<DenseTrace>& traces) const;
  Vec backward(const std::vector<DenseTrace>& traces, std::span<const double> upstream, Mlp& grads) const;
  std::size_t out_dim() const { return layers.back().out_dim(); }
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 1e-6;
};

/// Adam with bias correction followed by decoupled L2 shrinkage
/// p <- p * (1 - lr * l2). Moments are created lazily to mirror the
/// parameter shapes on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Throws DimensionError if grads do not mirror params.
  void step(const ParameterList& params, const ConstParameterList& grads);

  std::size_t steps() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t step_ = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `loss` with step h.
/// Relative error is |a - n| / max(|a|, |n|, floor); `floor` keeps entries
/// whose true gradient is ~0 from dividing noise by noise.
GradientCheckResult check_gradients(const ParameterList& params, const ConstParameterList& analytic,
                                    const std::function<double()>& loss, double h = 1e-5,
                                    double floor = 1e-6);

}  // namespace streamrec::nn
