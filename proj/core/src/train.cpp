#include "streamrec/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "streamrec/error.hpp"

namespace streamrec {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("train.gamma must be >= 0");
  if (!(l2 >= 0.0)) throw ConfigError("train.l2 must be >= 0");
  if (epochs_per_batch < 1) throw ConfigError("train.epochs_per_batch must be >= 1");
}

std::vector<ItemId> negative_sample(UserId user, std::size_t n_negative, const MembershipOracle& is_positive,
                                    std::size_t item_count, Rng& rng) {
  if (item_count == 0) throw std::invalid_argument("negative sampling needs at least one item");
  std::vector<ItemId> out;
  out.reserve(n_negative);
  std::uniform_int_distribution<ItemId> dist(0, static_cast<ItemId>(item_count - 1));
  std::size_t rejections = 0;
  const std::size_t cap = 100 * n_negative;
  while (out.size() < n_negative) {
    const ItemId v = dist(rng);
    if (rejections < cap && is_positive && is_positive(user, v)) {
      ++rejections;
      continue;
    }
    out.push_back(v);
  }
  return out;
}

double loss_acc(double label, double prediction) {
  const double p = std::clamp(prediction, 1e-12, 1.0 - 1e-12);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

double gate_std(std::span<const double> gates) {
  if (gates.empty()) throw std::invalid_argument("gate vector is empty");
  const double n = static_cast<double>(gates.size());
  double mean = 0.0;
  for (double g : gates) mean += g;
  mean /= n;
  double var = 0.0;
  for (double g : gates) var += (g - mean) * (g - mean);
  return std::sqrt(var / n);
}

nn::Vec gate_std_gradient(std::span<const double> gates) {
  const double s = gate_std(gates);
  nn::Vec grad(gates.size(), 0.0);
  if (s == 0.0) return grad;
  const double n = static_cast<double>(gates.size());
  double mean = 0.0;
  for (double g : gates) mean += g;
  mean /= n;
  for (std::size_t i = 0; i < gates.size(); ++i) grad[i] = (gates[i] - mean) / (n * s);
  return grad;
}

double loss_gate(std::span<const double> user_gates, std::span<const double> item_gates) {
  return gate_std(user_gates) + gate_std(item_gates);
}

std::vector<LabeledExample> expand_with_negatives(std::span<const Interaction> batch, std::size_t n_negative,
                                                  const MembershipOracle& is_positive, std::size_t item_count,
                                                  Rng& rng) {
  std::vector<LabeledExample> out;
  out.reserve(batch.size() * (1 + n_negative));
  for (const auto& x : batch) {
    out.push_back({x.user, x.item, 1.0});
    for (ItemId v : negative_sample(x.user, n_negative, is_positive, item_count, rng)) {
      out.push_back({x.user, v, 0.0});
    }
  }
  return out;
}

namespace {

/// d loss_acc / d prediction with the same clamp as loss_acc.
double loss_acc_gradient(double label, double prediction) {
  if (prediction < 1e-12 || prediction > 1.0 - 1e-12) return 0.0;
  return -label / prediction + (1.0 - label) / (1.0 - prediction);
}

struct BatchGates {
  nn::Vec user;
  nn::Vec item;
};

LossReport run(const DwmoeModel& model, std::span<const LabeledExample> examples, double gamma, GateLossMode mode,
               DwmoeModel* grads) {
  LossReport report;
  report.examples_seen = examples.size();
  if (examples.empty()) return report;
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  const std::size_t n_e = model.n_experts();

  // Batch mode needs the mean gate vectors before any backward pass.
  BatchGates mean;
  if (mode == GateLossMode::kBatch) {
    mean.user.assign(n_e, 0.0);
    mean.item.assign(n_e, 0.0);
    PredictionTrace trace;
    for (const auto& ex : examples) {
      model.predict(ex.user, ex.item, trace);
      for (std::size_t i = 0; i < n_e; ++i) {
        mean.user[i] += trace.user.gates[i] * inv_n;
        mean.item[i] += trace.item.gates[i] * inv_n;
      }
    }
    report.loss_gate = loss_gate(mean.user, mean.item);
  }
  nn::Vec batch_d_user;
  nn::Vec batch_d_item;
  if (mode == GateLossMode::kBatch && grads) {
    batch_d_user = gate_std_gradient(mean.user);
    batch_d_item = gate_std_gradient(mean.item);
    for (auto& g : batch_d_user) g *= gamma * inv_n;
    for (auto& g : batch_d_item) g *= gamma * inv_n;
  }

  PredictionTrace trace;
  OutputGradient up;
  double acc_sum = 0.0;
  double gate_sum = 0.0;
  for (const auto& ex : examples) {
    const double pred = model.predict(ex.user, ex.item, trace);
    acc_sum += loss_acc(ex.label, pred);
    if (mode == GateLossMode::kPerExample) gate_sum += loss_gate(trace.user.gates, trace.item.gates);
    if (!grads) continue;

    up.d_prediction = loss_acc_gradient(ex.label, pred) * inv_n;
    if (mode == GateLossMode::kPerExample) {
      up.d_user_gates = gate_std_gradient(trace.user.gates);
      up.d_item_gates = gate_std_gradient(trace.item.gates);
      for (auto& g : up.d_user_gates) g *= gamma * inv_n;
      for (auto& g : up.d_item_gates) g *= gamma * inv_n;
    } else {
      up.d_user_gates = batch_d_user;
      up.d_item_gates = batch_d_item;
    }
    model.backward(trace, up, *grads);
  }
  report.loss_acc = acc_sum * inv_n;
  if (mode == GateLossMode::kPerExample) report.loss_gate = gate_sum * inv_n;
  report.loss_total = report.loss_acc + gamma * report.loss_gate;
  return report;
}

}  // namespace

LossReport evaluate_loss(const DwmoeModel& model, std::span<const LabeledExample> examples, double gamma,
                         GateLossMode mode) {
  return run(model, examples, gamma, mode, nullptr);
}

LossReport accumulate_gradients(const DwmoeModel& model, std::span<const LabeledExample> examples, double gamma,
                                GateLossMode mode, DwmoeModel& grads) {
  return run(model, examples, gamma, mode, &grads);
}

Trainer::Trainer(DwmoeModel& model, const TrainConfig& config, Rng negative_rng)
    : model_(model),
      config_(config),
      grads_(model.zeros_like()),
      adam_(nn::AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.l2}),
      rng_(std::move(negative_rng)) {
  config_.validate();
}

LossReport Trainer::train_step(std::span<const Interaction> batch, const MembershipOracle& is_positive) {
  std::vector<Interaction> usable;
  usable.reserve(batch.size());
  for (const auto& x : batch) {
    if (x.user < model_.user_rows() && x.item < model_.item_rows()) {
      usable.push_back(x);
    } else {
      ++skipped_;
    }
  }
  if (usable.empty()) return {};

  const auto examples = expand_with_negatives(usable, config_.n_negative, is_positive, model_.item_rows(), rng_);
  grads_.set_zero();
  const LossReport report = accumulate_gradients(model_, examples, config_.gamma, config_.gate_loss, grads_);
  adam_.step(model_.parameters(), std::as_const(grads_).parameters());
  return report;
}

LossReport Trainer::incremental_train(std::span<const Interaction> chunk, Reservoir& reservoir,
                                      const SamplerConfig& sampler, Rng& sampler_rng) {
  last_batch_ = prepare_batch(chunk, reservoir, sampler, sampler_rng);
  LossReport report;
  if (!last_batch_.empty()) {
    // Pairs in the batch itself are not in the reservoir yet.
    std::unordered_set<std::uint64_t> batch_pairs;
    for (const auto& x : last_batch_.interactions) {
      batch_pairs.insert((static_cast<std::uint64_t>(x.user) << 32) | x.item);
    }
    const MembershipOracle is_positive = [&](UserId u, ItemId v) {
      return reservoir.contains(u, v) || batch_pairs.count((static_cast<std::uint64_t>(u) << 32) | v) != 0;
    };
    for (std::size_t epoch = 0; epoch < config_.epochs_per_batch; ++epoch) {
      report = train_step(last_batch_.interactions, is_positive);
    }
  }
  reservoir.insert(chunk);
  return report;
}

}  // namespace streamrec
