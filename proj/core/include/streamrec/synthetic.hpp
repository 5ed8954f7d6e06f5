#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>

#include "streamrec/interaction.hpp"

namespace streamrec {

/// Block-structured implicit-feedback stream. Users and items are split
/// round-robin into `blocks` types. Each event picks a user uniformly, then
/// an item block: the user's preferred block with weight p_within, every
/// other block with weight p_cross. Inside a block items follow a Zipf law
/// with `popularity_exponent` (0 gives uniform). With `drift`, every user's
/// preferred block rotates by one from event floor(drift_at * n) onwards.
struct SyntheticConfig {
  std::size_t users = 2000;
  std::size_t items = 500;
  std::size_t blocks = 2;
  std::size_t interactions = 40000;
  double p_within = 0.9;
  double p_cross = 0.05;
  double popularity_exponent = 1.0;
  bool drift = false;
  double drift_at = 0.5;

  void validate() const;
};

std::size_t synthetic_user_block(UserId user, const SyntheticConfig& config);
std::size_t synthetic_item_block(ItemId item, const SyntheticConfig& config);
/// Preferred item block of a user at stream position `seq_no`.
std::size_t synthetic_preferred_block(UserId user, std::uint64_t seq_no, const SyntheticConfig& config);

InteractionList generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Writes `user,item,1,seq_no` rows readable by parse_interactions.
void write_csv(std::ostream& out, const InteractionList& interactions);

}  // namespace streamrec
