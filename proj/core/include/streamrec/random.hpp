#pragma once

#include <cstdint>
#include <random>

namespace streamrec {

using Rng = std::mt19937_64;

/// Independent named streams derived from one experiment seed, so that e.g.
/// evaluation negatives do not shift when the training sampler draws more.
enum class RngStream : std::uint64_t {
  kInit = 1,
  kSampler = 2,
  kTrainNegatives = 3,
  kEvalNegatives = 4,
  kTies = 5,
  kData = 6,
};

inline Rng make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace streamrec
