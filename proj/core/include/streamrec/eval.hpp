#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "streamrec/dwmoe.hpp"
#include "streamrec/ingest.hpp"
#include "streamrec/random.hpp"
#include "streamrec/sampling.hpp"
#include "streamrec/train.hpp"

namespace streamrec {

/// Where the target lands among candidates with exactly its score.
enum class TiePolicy {
  kTargetFirst,  // optimistic: ties never push the target down
  kUniform,      // uniformly random position among the tied block
};

TiePolicy parse_tie_policy(const std::string& name);
const char* to_string(TiePolicy p) noexcept;

struct RankingResult {
  std::size_t rank = 0;  // 1-based
  bool hit = false;
  double ndcg = 0.0;
};

/// hit = rank <= k; ndcg = 1 / log2(rank + 1) on a hit, else 0.
RankingResult ranking_from_rank(std::size_t rank, std::size_t k);

/// rank = 1 + #negatives scoring strictly higher + tie offset, where the tie
/// offset is 0 (kTargetFirst) or uniform over [0, #tied] (kUniform, drawn
/// from `tie_rng`, which must then be non-null).
RankingResult rank_from_scores(double target_score, std::span<const double> negative_scores, std::size_t k,
                               TiePolicy ties, Rng* tie_rng);

/// Scores target + negatives with the model and ranks the target.
RankingResult rank_target(const DwmoeModel& model, UserId user, ItemId target, std::span<const ItemId> negatives,
                          std::size_t k, TiePolicy ties, Rng* tie_rng);

/// Every (user, item) pair of a dataset, for excluding positives from
/// evaluation candidates.
class InteractionHistory {
 public:
  InteractionHistory() = default;
  explicit InteractionHistory(std::span<const Interaction> all) { add(all); }

  void add(std::span<const Interaction> interactions);
  bool contains(UserId user, ItemId item) const;
  std::size_t items_of(UserId user) const;

 private:
  std::unordered_map<UserId, std::unordered_set<ItemId>> by_user_;
};

/// `count` distinct items in [0, item_count) the user never interacted with.
/// Returns fewer when not enough such items exist.
std::vector<ItemId> sample_eval_negatives(UserId user, std::size_t count, const InteractionHistory& history,
                                          std::size_t item_count, Rng& rng);

struct MetricsReport {
  double hr = 0.0;
  double ndcg = 0.0;
  std::size_t n_evaluated = 0;
  std::size_t n_skipped = 0;

  void add(const RankingResult& r);
  /// Combines two reports, weighting by n_evaluated.
  void merge(const MetricsReport& other);
  void finalize();

 private:
  double hr_sum_ = 0.0;
  double ndcg_sum_ = 0.0;
};

struct EvalConfig {
  std::size_t k = 10;
  std::size_t n_negatives = 99;
  TiePolicy ties = TiePolicy::kUniform;
};

struct ChunkMetrics {
  enum class Phase { kPretrain, kTest };
  Phase phase = Phase::kTest;
  std::size_t chunk_index = 0;
  MetricsReport metrics;
  LossReport loss;
  std::size_t batch_size = 0;
  std::size_t n_his = 0;
};

struct PrequentialConfig {
  StreamConfig stream;
  SamplerConfig sampler;
  TrainConfig train;
  EvalConfig eval;
  std::size_t pretrain_epochs = 1;
  std::uint64_t seed = 42;
};

struct PrequentialResult {
  std::vector<ChunkMetrics> chunks;
  MetricsReport overall;
};

/// Aggregated test metrics over the test chunks in [begin, end).
MetricsReport aggregate_test_chunks(std::span<const ChunkMetrics> chunks, std::size_t begin, std::size_t end);
/// Test-phase chunks only.
std::vector<ChunkMetrics> test_chunks(std::span<const ChunkMetrics> chunks);

/// Test-then-train streaming evaluation. The training part is streamed in
/// chunks of s_r (pretrain_epochs passes) to warm up the model and fill the
/// reservoir; then every test chunk is first evaluated against the frozen
/// model and afterwards used for incremental training. `history` holds
/// every positive pair to exclude from evaluation candidates. `on_chunk`,
/// when set, sees each chunk's record as soon as it is complete.
PrequentialResult prequential_run(DwmoeModel& model, std::span<const Interaction> train,
                                  std::span<const Interaction> test, const InteractionHistory& history,
                                  const PrequentialConfig& config,
                                  const std::function<void(const ChunkMetrics&)>& on_chunk = {});

}  // namespace streamrec
