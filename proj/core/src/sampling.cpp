#include "streamrec/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "streamrec/error.hpp"

namespace streamrec {

Reservoir::Reservoir(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("reservoir capacity must be >= 1");
}

void Reservoir::insert(std::span<const Interaction> batch) {
  // Only the last `capacity_` elements of an oversized batch can survive.
  if (batch.size() > capacity_) batch = batch.subspan(batch.size() - capacity_);
  for (const auto& x : batch) {
    buffer_.push_back(x);
    ++membership_[key(x.user, x.item)];
  }
  while (buffer_.size() > capacity_) {
    const auto& old = buffer_.front();
    auto it = membership_.find(key(old.user, old.item));
    if (--it->second == 0) membership_.erase(it);
    buffer_.pop_front();
  }
}

bool Reservoir::contains(UserId user, ItemId item) const {
  return membership_.count(key(user, item)) != 0;
}

Strategy parse_strategy(const std::string& name) {
  if (name == "VRS" || name == "vrs") return Strategy::kVrs;
  if (name == "NDO" || name == "ndo") return Strategy::kNdo;
  if (name == "RR" || name == "rr") return Strategy::kRr;
  if (name == "SW" || name == "sw") return Strategy::kSw;
  throw ConfigError("unknown sampling strategy '" + name + "' (expected VRS, NDO, RR or SW)");
}

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kVrs: return "VRS";
    case Strategy::kNdo: return "NDO";
    case Strategy::kRr: return "RR";
    case Strategy::kSw: return "SW";
  }
  return "?";
}

void SamplerConfig::validate() const {
  if (!(delta >= 0.0)) throw ConfigError("sampler.delta must be >= 0");
  if (!(lambda_res >= 1.0)) throw ConfigError("sampler.lambda_res must be >= 1");
  if (!(lambda_new >= 1.0)) throw ConfigError("sampler.lambda_new must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (reservoir_capacity < 1) throw ConfigError("sampler.reservoir must be >= 1");
}

std::vector<double> decayed_log_weights(std::size_t n, double lambda) {
  if (n == 0) throw std::invalid_argument("decayed weights need n >= 1");
  if (!(lambda >= 1.0)) throw ConfigError("decay ratio must be >= 1");
  const double step = std::log(lambda);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<double>(k) * step;
  return out;
}

std::vector<double> decayed_weights(std::size_t n, double lambda) {
  auto w = decayed_log_weights(n, lambda);
  if (lambda == 1.0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  const double top = w.back();
  double total = 0.0;
  // Sum from the largest term down for a tighter normalizer.
  for (std::size_t k = n; k-- > 0;) {
    w[k] = std::exp(w[k] - top);
    total += w[k];
  }
  for (auto& x : w) x /= total;
  return w;
}

std::size_t draw_categorical(std::span<const double> probabilities, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return i;
  }
  return probabilities.size() - 1;
}

std::vector<std::size_t> sample_without_replacement(std::span<const double> log_weights, std::size_t k,
                                                    Rng& rng) {
  const std::size_t n = log_weights.size();
  k = std::min(k, n);
  if (k == 0) return {};
  if (k == n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  // Item i gets clock E_i / w_i with E_i ~ Exp(1); the k earliest clocks are a
  // successive proportional sample without replacement.
  std::exponential_distribution<double> expo(1.0);
  std::vector<std::pair<double, std::size_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = {std::log(expo(rng)) - log_weights[i], i};
  std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k - 1), keys.end());
  std::vector<std::size_t> picked(k);
  for (std::size_t i = 0; i < k; ++i) picked[i] = keys[i].second;
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<std::size_t> sample_uniform_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  k = std::min(k, n);
  // Floyd's algorithm.
  std::vector<std::size_t> picked;
  picked.reserve(k);
  std::vector<bool> taken(n, false);
  for (std::size_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    std::size_t t = dist(rng);
    if (taken[t]) t = j;
    taken[t] = true;
    picked.push_back(t);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::size_t sample_size_underload(std::size_t s_new, double delta, std::size_t batch_size,
                                  std::size_t occupancy) {
  const auto scaled = static_cast<std::size_t>(std::floor(static_cast<double>(s_new) * delta));
  const std::size_t room = batch_size > s_new ? batch_size - s_new : 0;
  return std::min({scaled, room, occupancy});
}

namespace {

void append_from(std::vector<Interaction>& out, const Reservoir& reservoir,
                 const std::vector<std::size_t>& slots) {
  for (auto s : slots) out.push_back(reservoir[s]);
}

TrainingBatch new_only(std::span<const Interaction> new_data) {
  TrainingBatch b;
  b.interactions.assign(new_data.begin(), new_data.end());
  b.n_new = new_data.size();
  return b;
}

}  // namespace

TrainingBatch vrs_prepare(std::span<const Interaction> new_data, const Reservoir& reservoir,
                          const SamplerConfig& config, Rng& rng) {
  const std::size_t s_new = new_data.size();
  const std::size_t bs = config.batch_size;
  if (s_new == bs) return new_only(new_data);

  TrainingBatch b;
  if (s_new > bs) {
    const auto logw = decayed_log_weights(s_new, config.lambda_new);
    for (auto i : sample_without_replacement(logw, bs, rng)) b.interactions.push_back(new_data[i]);
    b.n_new = b.interactions.size();
    return b;
  }

  b = new_only(new_data);
  const std::size_t n_his = sample_size_underload(s_new, config.delta, bs, reservoir.size());
  if (n_his > 0) {
    const auto logw = decayed_log_weights(reservoir.size(), config.lambda_res);
    append_from(b.interactions, reservoir, sample_without_replacement(logw, n_his, rng));
  }
  b.n_his = b.interactions.size() - b.n_new;
  return b;
}

TrainingBatch baseline_prepare(Strategy strategy, std::span<const Interaction> new_data,
                               const Reservoir& reservoir, const SamplerConfig& config, Rng& rng) {
  const std::size_t bs = config.batch_size;
  const std::size_t s_new = new_data.size();
  switch (strategy) {
    case Strategy::kNdo:
    case Strategy::kRr: {
      TrainingBatch b;
      if (s_new > bs) {
        for (auto i : sample_uniform_without_replacement(s_new, bs, rng)) b.interactions.push_back(new_data[i]);
        b.n_new = bs;
        return b;
      }
      b = new_only(new_data);
      if (strategy == Strategy::kRr) {
        const std::size_t n_his = std::min(bs - s_new, reservoir.size());
        append_from(b.interactions, reservoir, sample_uniform_without_replacement(reservoir.size(), n_his, rng));
        b.n_his = n_his;
      }
      return b;
    }
    case Strategy::kSw: {
      TrainingBatch b;
      const std::size_t from_new = std::min(bs, s_new);
      const std::size_t from_res = std::min(bs - from_new, reservoir.size());
      for (std::size_t i = reservoir.size() - from_res; i < reservoir.size(); ++i) {
        b.interactions.push_back(reservoir[i]);
      }
      b.interactions.insert(b.interactions.end(), new_data.end() - static_cast<std::ptrdiff_t>(from_new),
                            new_data.end());
      b.n_his = from_res;
      b.n_new = from_new;
      return b;
    }
    case Strategy::kVrs:
      break;
  }
  throw ConfigError(std::string("baseline_prepare does not handle strategy ") + to_string(strategy));
}

TrainingBatch prepare_batch(std::span<const Interaction> new_data, const Reservoir& reservoir,
                            const SamplerConfig& config, Rng& rng) {
  if (config.strategy == Strategy::kVrs) return vrs_prepare(new_data, reservoir, config, rng);
  return baseline_prepare(config.strategy, new_data, reservoir, config, rng);
}

}  // namespace streamrec
