#pragma once

#include <cstdint>
#include <vector>

namespace streamrec {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

/// One implicit user-item event. `seq_no` is the global arrival position.
struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  std::uint64_t seq_no = 0;
  std::uint8_t label = 1;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

using InteractionList = std::vector<Interaction>;

}  // namespace streamrec
