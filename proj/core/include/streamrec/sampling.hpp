#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "streamrec/interaction.hpp"
#include "streamrec/random.hpp"

namespace streamrec {

/// Bounded FIFO store of historical interactions. Appending past capacity
/// evicts the oldest entries. Also serves as the (user, item) membership
/// oracle for negative sampling.
class Reservoir {
 public:
  explicit Reservoir(std::size_t capacity);

  void insert(std::span<const Interaction> batch);
  bool contains(UserId user, ItemId item) const;

  std::size_t size() const noexcept { return buffer_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return buffer_.empty(); }
  /// Oldest first.
  const std::deque<Interaction>& buffer() const noexcept { return buffer_; }
  const Interaction& operator[](std::size_t i) const { return buffer_[i]; }

 private:
  static std::uint64_t key(UserId u, ItemId v) noexcept {
    return (static_cast<std::uint64_t>(u) << 32) | v;
  }

  std::size_t capacity_;
  std::deque<Interaction> buffer_;
  std::unordered_map<std::uint64_t, std::uint32_t> membership_;
};

enum class Strategy { kVrs, kNdo, kRr, kSw };

Strategy parse_strategy(const std::string& name);
const char* to_string(Strategy s) noexcept;

struct SamplerConfig {
  Strategy strategy = Strategy::kVrs;
  double delta = 0.5;
  double lambda_res = 1.01;
  double lambda_new = 1.01;
  std::size_t batch_size = 256;
  std::size_t reservoir_capacity = 10000;

  /// Throws ConfigError on delta < 0, lambda < 1, batch_size or capacity 0.
  void validate() const;
};

struct TrainingBatch {
  std::vector<Interaction> interactions;
  std::size_t n_new = 0;
  std::size_t n_his = 0;

  bool empty() const noexcept { return interactions.empty(); }
};

/// Log of the unnormalized decay weights, (k-1) * log(lambda) for k = 1..n
/// with k = 1 the oldest.
std::vector<double> decayed_log_weights(std::size_t n, double lambda);

/// Normalized sampling probabilities P(k) proportional to lambda^(k-1),
/// k = 1 oldest. Uniform for lambda = 1. Computed in log space with a
/// max-exponent offset, so large n * log(lambda) does not overflow.
std::vector<double> decayed_weights(std::size_t n, double lambda);

/// One index drawn from `probabilities` (inverse CDF).
std::size_t draw_categorical(std::span<const double> probabilities, Rng& rng);

/// k distinct indices drawn by successive weighted sampling without
/// replacement (exponential-clock keys). Returned in ascending order.
std::vector<std::size_t> sample_without_replacement(std::span<const double> log_weights, std::size_t k,
                                                    Rng& rng);

/// k distinct indices out of n, uniformly. Ascending order.
std::vector<std::size_t> sample_uniform_without_replacement(std::size_t n, std::size_t k, Rng& rng);

/// Historical sample size for the underload case:
/// min(floor(s_new * delta), batch_size - s_new), clamped to `occupancy`.
std::size_t sample_size_underload(std::size_t s_new, double delta, std::size_t batch_size,
                                  std::size_t occupancy);

/// Variational reservoir-enhanced sampling. Underload: all new data plus
/// decay-weighted historical draws. Balanced: new data verbatim. Overload:
/// batch_size decay-weighted draws from the new data only.
TrainingBatch vrs_prepare(std::span<const Interaction> new_data, const Reservoir& reservoir,
                          const SamplerConfig& config, Rng& rng);

/// Comparison strategies: NDO (new data only), RR (new data plus uniform
/// reservoir draws up to batch_size), SW (most recent batch_size of
/// reservoir + new data).
TrainingBatch baseline_prepare(Strategy strategy, std::span<const Interaction> new_data,
                               const Reservoir& reservoir, const SamplerConfig& config, Rng& rng);

/// Dispatches on config.strategy.
TrainingBatch prepare_batch(std::span<const Interaction> new_data, const Reservoir& reservoir,
                            const SamplerConfig& config, Rng& rng);

}  // namespace streamrec
