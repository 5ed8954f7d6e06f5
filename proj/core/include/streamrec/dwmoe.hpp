#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "streamrec/interaction.hpp"
#include "streamrec/nn.hpp"
#include "streamrec/random.hpp"

namespace streamrec {

/// Architecture of the double-wing mixture of experts. Both wings share the
/// expert count and layer shapes but not parameters.
struct ModelConfig {
  std::size_t n_experts = 8;
  std::size_t embedding_dim = 32;
  std::vector<std::size_t> expert_widths{32, 16};
  nn::Activation expert_activation = nn::Activation::kRelu;         // hidden expert layers
  nn::Activation expert_output_activation = nn::Activation::kIdentity;  // last expert layer
  nn::Activation gate_activation = nn::Activation::kRelu;
  std::size_t interference_dim = 0;  // 0 means embedding_dim
  nn::Activation output_activation = nn::Activation::kSigmoid;
  double init_scale = 0.05;
  std::size_t user_rows = 0;
  std::size_t item_rows = 0;

  std::size_t resolved_interference_dim() const noexcept {
    return interference_dim ? interference_dim : embedding_dim;
  }
  /// Throws ConfigError on zero sizes or an empty expert stack.
  void validate() const;
};

/// Per-expert embedding followed by an MLP.
class ExpertNet {
 public:
  struct Trace {
    std::size_t id = 0;
    std::vector<nn::DenseTrace> layers;
  };

  ExpertNet() = default;
  ExpertNet(const std::string& name, std::size_t rows, const ModelConfig& config);

  nn::Vec forward(std::size_t id) const;
  nn::Vec forward(std::size_t id, Trace& trace) const;
  void backward(const Trace& trace, std::span<const double> upstream, ExpertNet& grads) const;

  nn::EmbeddingTable embedding;
  nn::Mlp mlp;
};

/// Softmax gate over the experts of one wing. Its input is the own-wing
/// embedding concatenated with a dense "interference" transform of the
/// other wing's gate embedding.
class GatingNet {
 public:
  struct Trace {
    std::size_t own_id = 0;
    nn::DenseTrace interference;
    nn::DenseTrace softmax;
  };

  GatingNet() = default;
  GatingNet(const std::string& name, std::size_t rows, std::size_t other_dim, const ModelConfig& config);

  nn::Vec forward(std::size_t own_id, std::span<const double> other_embedding) const;
  nn::Vec forward(std::size_t own_id, std::span<const double> other_embedding, Trace& trace) const;
  /// Accumulates parameter and own-embedding gradients; returns the gradient
  /// with respect to `other_embedding`.
  nn::Vec backward(const Trace& trace, std::span<const double> d_gates, GatingNet& grads) const;

  nn::EmbeddingTable embedding;
  nn::DenseLayer interference;
  nn::DenseLayer softmax_layer;
};

struct Wing {
  std::vector<ExpertNet> experts;
  GatingNet gate;
};

/// Gating-weighted sum of expert outputs. Throws DimensionError on mismatch.
nn::Vec fuse(std::span<const nn::Vec> expert_outputs, std::span<const double> gates);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

/// output_activation(w * cosine(user_vec, item_vec) + b) for the 1x1 output
/// layer.
double interact(const nn::DenseLayer& output, std::span<const double> user_vec, std::span<const double> item_vec);

/// Everything a single prediction records for backpropagation.
struct PredictionTrace {
  struct WingTrace {
    std::vector<ExpertNet::Trace> experts;
    std::vector<nn::Vec> expert_outputs;
    GatingNet::Trace gate;
    nn::Vec gates;
    nn::Vec fused;
  };
  WingTrace user;
  WingTrace item;
  double cosine = 0.0;
  nn::DenseTrace output;
  double prediction = 0.0;
};

/// Loss gradients with respect to the model outputs a loss can see.
struct OutputGradient {
  double d_prediction = 0.0;
  nn::Vec d_user_gates;  // empty means zero
  nn::Vec d_item_gates;
};

class DwmoeModel {
 public:
  /// Parameters initialised uniform(-init_scale, init_scale), biases zero.
  DwmoeModel(const ModelConfig& config, Rng& rng);

  /// Same architecture with every parameter zero; used as a gradient buffer.
  DwmoeModel zeros_like() const;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t n_experts() const noexcept { return config_.n_experts; }
  std::size_t user_rows() const noexcept { return config_.user_rows; }
  std::size_t item_rows() const noexcept { return config_.item_rows; }

  /// Probability of an interaction between `user` and `item`.
  /// Throws std::out_of_range for ids outside the tables.
  double predict(UserId user, ItemId item) const;
  double predict(UserId user, ItemId item, PredictionTrace& trace) const;

  /// Elementwise predict; the user side is computed once.
  std::vector<double> score_candidates(UserId user, std::span<const ItemId> items) const;

  /// Accumulates d(loss)/d(parameters) into `grads` (a zeros_like buffer).
  void backward(const PredictionTrace& trace, const OutputGradient& upstream, DwmoeModel& grads) const;

  nn::ParameterList parameters();
  nn::ConstParameterList parameters() const;
  void set_zero();

  void save(std::ostream& out) const;
  /// Rebuilds architecture from the archive header, then loads every tensor.
  static DwmoeModel load(std::istream& in);

  Wing& user_wing() noexcept { return user_; }
  const Wing& user_wing() const noexcept { return user_; }
  Wing& item_wing() noexcept { return item_; }
  const Wing& item_wing() const noexcept { return item_; }
  nn::DenseLayer& output_layer() noexcept { return output_; }
  const nn::DenseLayer& output_layer() const noexcept { return output_; }

 private:
  explicit DwmoeModel(const ModelConfig& config);

  ModelConfig config_;
  Wing user_;
  Wing item_;
  nn::DenseLayer output_;
};

}  // namespace streamrec
