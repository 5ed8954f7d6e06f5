#include "streamrec/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "streamrec/error.hpp"

namespace streamrec {

TiePolicy parse_tie_policy(const std::string& name) {
  if (name == "target_first") return TiePolicy::kTargetFirst;
  if (name == "uniform") return TiePolicy::kUniform;
  throw ConfigError("unknown tie policy '" + name + "' (expected target_first or uniform)");
}

const char* to_string(TiePolicy p) noexcept {
  return p == TiePolicy::kTargetFirst ? "target_first" : "uniform";
}

RankingResult ranking_from_rank(std::size_t rank, std::size_t k) {
  RankingResult r;
  r.rank = rank;
  r.hit = rank <= k;
  r.ndcg = r.hit ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
  return r;
}

RankingResult rank_from_scores(double target_score, std::span<const double> negative_scores, std::size_t k,
                               TiePolicy ties, Rng* tie_rng) {
  std::size_t greater = 0;
  std::size_t tied = 0;
  for (double s : negative_scores) {
    if (s > target_score) {
      ++greater;
    } else if (s == target_score) {
      ++tied;
    }
  }
  std::size_t offset = 0;
  if (ties == TiePolicy::kUniform && tied > 0) {
    if (!tie_rng) throw std::invalid_argument("uniform tie policy needs a random generator");
    offset = std::uniform_int_distribution<std::size_t>(0, tied)(*tie_rng);
  }
  return ranking_from_rank(1 + greater + offset, k);
}

RankingResult rank_target(const DwmoeModel& model, UserId user, ItemId target, std::span<const ItemId> negatives,
                          std::size_t k, TiePolicy ties, Rng* tie_rng) {
  std::vector<ItemId> candidates;
  candidates.reserve(negatives.size() + 1);
  candidates.push_back(target);
  candidates.insert(candidates.end(), negatives.begin(), negatives.end());
  const auto scores = model.score_candidates(user, candidates);
  return rank_from_scores(scores[0], std::span<const double>(scores).subspan(1), k, ties, tie_rng);
}

void InteractionHistory::add(std::span<const Interaction> interactions) {
  for (const auto& x : interactions) by_user_[x.user].insert(x.item);
}

bool InteractionHistory::contains(UserId user, ItemId item) const {
  auto it = by_user_.find(user);
  return it != by_user_.end() && it->second.count(item) != 0;
}

std::size_t InteractionHistory::items_of(UserId user) const {
  auto it = by_user_.find(user);
  return it == by_user_.end() ? 0 : it->second.size();
}

std::vector<ItemId> sample_eval_negatives(UserId user, std::size_t count, const InteractionHistory& history,
                                          std::size_t item_count, Rng& rng) {
  std::vector<ItemId> out;
  if (item_count == 0) return out;
  // Dense users make rejection sampling slow; enumerate the complement instead.
  const std::size_t known = history.items_of(user);
  if (known * 2 >= item_count || count * 2 >= item_count) {
    std::vector<ItemId> free;
    for (ItemId v = 0; v < item_count; ++v) {
      if (!history.contains(user, v)) free.push_back(v);
    }
    for (auto i : sample_uniform_without_replacement(free.size(), count, rng)) out.push_back(free[i]);
    return out;
  }
  std::unordered_set<ItemId> picked;
  std::uniform_int_distribution<ItemId> dist(0, static_cast<ItemId>(item_count - 1));
  while (out.size() < count) {
    const ItemId v = dist(rng);
    if (history.contains(user, v) || !picked.insert(v).second) continue;
    out.push_back(v);
  }
  return out;
}

void MetricsReport::add(const RankingResult& r) {
  ++n_evaluated;
  hr_sum_ += r.hit ? 1.0 : 0.0;
  ndcg_sum_ += r.ndcg;
  finalize();
}

void MetricsReport::merge(const MetricsReport& other) {
  n_evaluated += other.n_evaluated;
  n_skipped += other.n_skipped;
  hr_sum_ += other.hr_sum_;
  ndcg_sum_ += other.ndcg_sum_;
  finalize();
}

void MetricsReport::finalize() {
  hr = n_evaluated ? hr_sum_ / static_cast<double>(n_evaluated) : 0.0;
  ndcg = n_evaluated ? ndcg_sum_ / static_cast<double>(n_evaluated) : 0.0;
}

std::vector<ChunkMetrics> test_chunks(std::span<const ChunkMetrics> chunks) {
  std::vector<ChunkMetrics> out;
  for (const auto& c : chunks) {
    if (c.phase == ChunkMetrics::Phase::kTest) out.push_back(c);
  }
  return out;
}

MetricsReport aggregate_test_chunks(std::span<const ChunkMetrics> chunks, std::size_t begin, std::size_t end) {
  const auto tests = test_chunks(chunks);
  MetricsReport out;
  for (std::size_t i = begin; i < end && i < tests.size(); ++i) out.merge(tests[i].metrics);
  return out;
}

PrequentialResult prequential_run(DwmoeModel& model, std::span<const Interaction> train,
                                  std::span<const Interaction> test, const InteractionHistory& history,
                                  const PrequentialConfig& config,
                                  const std::function<void(const ChunkMetrics&)>& on_chunk) {
  config.stream.validate();
  config.sampler.validate();
  config.train.validate();
  if (config.eval.k == 0) throw ConfigError("eval.k must be >= 1");

  Rng sampler_rng = make_rng(config.seed, RngStream::kSampler);
  Rng eval_rng = make_rng(config.seed, RngStream::kEvalNegatives);
  Rng tie_rng = make_rng(config.seed, RngStream::kTies);
  Trainer trainer(model, config.train, make_rng(config.seed, RngStream::kTrainNegatives));
  Reservoir reservoir(config.sampler.reservoir_capacity);

  PrequentialResult result;
  std::size_t index = 0;
  auto emit = [&](ChunkMetrics&& c) {
    c.chunk_index = index++;
    c.batch_size = trainer.last_batch().interactions.size();
    c.n_his = trainer.last_batch().n_his;
    if (on_chunk) on_chunk(c);
    result.chunks.push_back(std::move(c));
  };

  for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    for (auto chunk : stream_chunks(train, config.stream.s_r)) {
      ChunkMetrics c;
      c.phase = ChunkMetrics::Phase::kPretrain;
      c.loss = trainer.incremental_train(chunk, reservoir, config.sampler, sampler_rng);
      emit(std::move(c));
    }
  }

  for (auto chunk : stream_chunks(test, config.stream.s_r)) {
    ChunkMetrics c;
    c.phase = ChunkMetrics::Phase::kTest;
    for (const auto& x : chunk) {
      if (x.user >= model.user_rows() || x.item >= model.item_rows()) {
        ++c.metrics.n_skipped;
        continue;
      }
      const auto negatives = sample_eval_negatives(x.user, config.eval.n_negatives, history, model.item_rows(),
                                                   eval_rng);
      c.metrics.add(rank_target(model, x.user, x.item, negatives, config.eval.k, config.eval.ties, &tie_rng));
    }
    c.loss = trainer.incremental_train(chunk, reservoir, config.sampler, sampler_rng);
    result.overall.merge(c.metrics);
    emit(std::move(c));
  }
  return result;
}

}  // namespace streamrec
