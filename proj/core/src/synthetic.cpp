#include "streamrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "streamrec/error.hpp"
#include "streamrec/random.hpp"

namespace streamrec {

void SyntheticConfig::validate() const {
  if (blocks < 1) throw ConfigError("synthetic.blocks must be >= 1");
  if (users < blocks || items < blocks) throw ConfigError("synthetic: need at least one user and item per block");
  if (!(p_within > 0.0) || !(p_cross >= 0.0)) throw ConfigError("synthetic: block probabilities must be positive");
  if (!(popularity_exponent >= 0.0)) throw ConfigError("synthetic.popularity_exponent must be >= 0");
  if (!(drift_at >= 0.0 && drift_at <= 1.0)) throw ConfigError("synthetic.drift_at must lie in [0, 1]");
}

std::size_t synthetic_user_block(UserId user, const SyntheticConfig& config) { return user % config.blocks; }
std::size_t synthetic_item_block(ItemId item, const SyntheticConfig& config) { return item % config.blocks; }

std::size_t synthetic_preferred_block(UserId user, std::uint64_t seq_no, const SyntheticConfig& config) {
  const auto drift_start = static_cast<std::uint64_t>(std::floor(config.drift_at * static_cast<double>(config.interactions)));
  const std::size_t shift = (config.drift && seq_no >= drift_start) ? 1 : 0;
  return (synthetic_user_block(user, config) + shift) % config.blocks;
}

InteractionList generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, RngStream::kData);

  // Items of each block in a random popularity order.
  std::vector<std::vector<ItemId>> block_items(config.blocks);
  for (ItemId v = 0; v < config.items; ++v) block_items[synthetic_item_block(v, config)].push_back(v);
  std::vector<std::discrete_distribution<std::size_t>> popularity;
  for (auto& items : block_items) {
    std::shuffle(items.begin(), items.end(), rng);
    std::vector<double> w(items.size());
    for (std::size_t r = 0; r < w.size(); ++r) w[r] = std::pow(static_cast<double>(r + 1), -config.popularity_exponent);
    popularity.emplace_back(w.begin(), w.end());
  }

  std::uniform_int_distribution<UserId> pick_user(0, static_cast<UserId>(config.users - 1));
  InteractionList out;
  out.reserve(config.interactions);
  std::vector<double> block_w(config.blocks);
  for (std::uint64_t k = 0; k < config.interactions; ++k) {
    const UserId u = pick_user(rng);
    const std::size_t preferred = synthetic_preferred_block(u, k, config);
    for (std::size_t b = 0; b < config.blocks; ++b) block_w[b] = b == preferred ? config.p_within : config.p_cross;
    std::discrete_distribution<std::size_t> pick_block(block_w.begin(), block_w.end());
    const std::size_t b = pick_block(rng);
    const ItemId v = block_items[b][popularity[b](rng)];
    out.push_back(Interaction{u, v, k, 1});
  }
  return out;
}

void write_csv(std::ostream& out, const InteractionList& interactions) {
  for (const auto& x : interactions) out << x.user << ',' << x.item << ",1," << x.seq_no << '\n';
}

}  // namespace streamrec
