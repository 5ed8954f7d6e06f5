#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "streamrec/error.hpp"
#include "streamrec/interaction.hpp"

namespace streamrec {

/// Dense 0-based index <-> raw identifier from the source file.
class IdMap {
 public:
  std::uint32_t intern(std::int64_t raw);
  std::int64_t raw(std::uint32_t dense) const { return raw_.at(dense); }
  std::size_t size() const noexcept { return raw_.size(); }
  const std::vector<std::int64_t>& raw_ids() const noexcept { return raw_; }

  /// Two columns per line: dense index, raw identifier.
  void dump(std::ostream& out) const;

 private:
  std::vector<std::int64_t> raw_;
  std::unordered_map<std::int64_t, std::uint32_t> index_;
};

/// A parsed rating row before binarization.
struct RatedEvent {
  UserId user = 0;
  ItemId item = 0;
  std::uint64_t seq_no = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

struct ParseOptions {
  std::string delimiter = ",";
  bool skip_header = false;
};

struct RatingLog {
  std::vector<RatedEvent> events;
  IdMap users;
  IdMap items;
};

/// Reads `user<d>item<d>rating<d>timestamp` rows and returns them sorted by
/// timestamp (ties keep input order), with dense ids assigned in that order.
/// Blank lines are ignored. Throws ParseError naming the offending line.
RatingLog parse_interactions(std::istream& in, const ParseOptions& options = {});

/// Keeps only the events of `n_users` users chosen uniformly with `seed`.
/// Users are re-densified; no-op if n_users >= number of users.
RatingLog sample_users(const RatingLog& log, std::size_t n_users, std::uint64_t seed);

/// Keeps events whose user has strictly more than `min_count` events,
/// preserving order. Users and items are re-densified by first appearance and
/// seq_no renumbered from 0. `users`/`items`, when given, are remapped to match.
template <typename Event>
std::vector<Event> filter_min_interactions(std::span<const Event> events, std::size_t min_count,
                                           IdMap* users = nullptr, IdMap* items = nullptr) {
  std::unordered_map<UserId, std::size_t> counts;
  for (const auto& e : events) ++counts[e.user];

  std::vector<Event> kept;
  kept.reserve(events.size());
  std::unordered_map<UserId, UserId> user_remap;
  std::unordered_map<ItemId, ItemId> item_remap;
  IdMap new_users;
  IdMap new_items;
  for (const auto& e : events) {
    if (counts[e.user] <= min_count) continue;
    Event out = e;
    auto [uit, u_new] = user_remap.try_emplace(e.user, static_cast<UserId>(user_remap.size()));
    auto [iit, i_new] = item_remap.try_emplace(e.item, static_cast<ItemId>(item_remap.size()));
    if (u_new && users) new_users.intern(users->raw(e.user));
    if (i_new && items) new_items.intern(items->raw(e.item));
    out.user = uit->second;
    out.item = iit->second;
    out.seq_no = kept.size();
    kept.push_back(out);
  }
  if (users) *users = std::move(new_users);
  if (items) *items = std::move(new_items);
  return kept;
}

/// Drops ratings; every event becomes a positive implicit interaction.
InteractionList binarize(std::span<const RatedEvent> events);

/// First floor(n * train_fraction) interactions train, the rest test.
/// Throws ConfigError unless 0 < train_fraction < 1.
std::pair<InteractionList, InteractionList> chronological_split(std::span<const Interaction> list,
                                                                double train_fraction);

/// Consecutive arrival chunks of `chunk_size` (last may be shorter).
/// Each chunk stands for the data received during one training period.
inline std::vector<std::span<const Interaction>> stream_chunks(std::span<const Interaction> list,
                                                               std::size_t chunk_size) {
  if (chunk_size == 0) throw ConfigError("stream chunk size (s_r) must be >= 1");
  std::vector<std::span<const Interaction>> chunks;
  for (std::size_t pos = 0; pos < list.size(); pos += chunk_size) {
    chunks.push_back(list.subspan(pos, std::min(chunk_size, list.size() - pos)));
  }
  return chunks;
}

enum class Workload { kUnderload, kBalanced, kOverload };

/// Processing speed s_p and receiving speed s_r, both in interactions per
/// training period.
struct StreamConfig {
  std::size_t s_p = 256;
  std::size_t s_r = 256;
  double train_fraction = 0.9;

  void validate() const;
  Workload workload() const noexcept {
    if (s_r < s_p) return Workload::kUnderload;
    if (s_r > s_p) return Workload::kOverload;
    return Workload::kBalanced;
  }
};

const char* to_string(Workload w) noexcept;

struct DatasetOptions {
  ParseOptions parse;
  std::size_t min_interactions = 10;
  std::size_t sample_users = 0;  // 0 keeps everyone
  std::uint64_t sample_seed = 0;
};

/// Parsed, optionally user-sampled, filtered and binarized dataset.
struct Dataset {
  InteractionList interactions;
  IdMap users;
  IdMap items;
  std::size_t raw_events = 0;

  std::size_t n_users() const noexcept { return users.size(); }
  std::size_t n_items() const noexcept { return items.size(); }
};

Dataset load_dataset(std::istream& in, const DatasetOptions& options);
Dataset load_dataset_file(const std::string& path, const DatasetOptions& options);

}  // namespace streamrec
