#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "streamrec/dwmoe.hpp"
#include "streamrec/nn.hpp"
#include "streamrec/random.hpp"
#include "streamrec/sampling.hpp"

namespace streamrec {

/// How the gate-balance term is reduced over a mini-batch.
enum class GateLossMode {
  kPerExample,  // mean over examples of std(g_user) + std(g_item)
  kBatch,       // std of the batch-mean gate vectors
};

struct TrainConfig {
  double learning_rate = 0.001;
  double gamma = 0.01;
  std::size_t n_negative = 4;
  double l2 = 1e-6;
  std::size_t epochs_per_batch = 1;
  GateLossMode gate_loss = GateLossMode::kPerExample;

  void validate() const;
};

struct LossReport {
  double loss_acc = 0.0;
  double loss_gate = 0.0;
  double loss_total = 0.0;
  std::size_t examples_seen = 0;
};

struct LabeledExample {
  UserId user = 0;
  ItemId item = 0;
  double label = 1.0;
};

/// Returns true if (user, item) is a known positive.
using MembershipOracle = std::function<bool(UserId, ItemId)>;

/// n_negative items drawn uniformly from [0, item_count), rejecting known
/// positives. After 100 * n_negative rejected draws the remaining slots
/// accept anything.
std::vector<ItemId> negative_sample(UserId user, std::size_t n_negative, const MembershipOracle& is_positive,
                                    std::size_t item_count, Rng& rng);

/// Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12].
double loss_acc(double label, double prediction);

/// Population standard deviation (divisor n).
double gate_std(std::span<const double> gates);
/// d gate_std / d gates; zero at the uniform vector where it is not differentiable.
nn::Vec gate_std_gradient(std::span<const double> gates);

/// std(g_user) + std(g_item). Throws std::invalid_argument on empty vectors.
double loss_gate(std::span<const double> user_gates, std::span<const double> item_gates);

/// Positives of `batch` each followed by their sampled negatives.
std::vector<LabeledExample> expand_with_negatives(std::span<const Interaction> batch, std::size_t n_negative,
                                                  const MembershipOracle& is_positive, std::size_t item_count,
                                                  Rng& rng);

/// Composite loss over `examples` without touching gradients.
LossReport evaluate_loss(const DwmoeModel& model, std::span<const LabeledExample> examples, double gamma,
                         GateLossMode mode = GateLossMode::kPerExample);

/// Composite loss, with its gradient accumulated into `grads`.
LossReport accumulate_gradients(const DwmoeModel& model, std::span<const LabeledExample> examples, double gamma,
                                GateLossMode mode, DwmoeModel& grads);

/// Owns the optimizer state and gradient buffer for one model.
class Trainer {
 public:
  Trainer(DwmoeModel& model, const TrainConfig& config, Rng negative_rng);

  /// Negatives per positive, one composite-loss gradient, one Adam step.
  /// Interactions whose ids fall outside the model tables are skipped.
  LossReport train_step(std::span<const Interaction> batch, const MembershipOracle& is_positive);

  /// One training period: build the batch with the sampling strategy, run
  /// epochs_per_batch train steps, then append the chunk to the reservoir.
  LossReport incremental_train(std::span<const Interaction> chunk, Reservoir& reservoir,
                               const SamplerConfig& sampler, Rng& sampler_rng);

  const nn::Adam& optimizer() const noexcept { return adam_; }
  const TrainConfig& config() const noexcept { return config_; }
  std::size_t skipped_interactions() const noexcept { return skipped_; }
  /// Size of the last batch prepared by incremental_train.
  const TrainingBatch& last_batch() const noexcept { return last_batch_; }

 private:
  DwmoeModel& model_;
  TrainConfig config_;
  DwmoeModel grads_;
  nn::Adam adam_;
  Rng rng_;
  std::size_t skipped_ = 0;
  TrainingBatch last_batch_;
};

}  // namespace streamrec
