#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "streamrec/dwmoe.hpp"
#include "streamrec/sampling.hpp"
#include "streamrec/train.hpp"

using namespace streamrec;

namespace {

DwmoeModel make_model(std::size_t n_experts) {
  ModelConfig c;
  c.n_experts = n_experts;
  c.user_rows = 2000;
  c.item_rows = 500;
  Rng rng(1);
  return DwmoeModel(c, rng);
}

std::vector<Interaction> make_stream(std::size_t n) {
  std::vector<Interaction> out;
  Rng rng(2);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back({static_cast<UserId>(rng() % 2000), static_cast<ItemId>(rng() % 500), i});
  }
  return out;
}

void BM_Predict(benchmark::State& state) {
  const auto model = make_model(static_cast<std::size_t>(state.range(0)));
  UserId u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(u, (u * 7) % 500));
    u = (u + 1) % 2000;
  }
}
BENCHMARK(BM_Predict)->Arg(2)->Arg(8);

void BM_ScoreCandidates(benchmark::State& state) {
  const auto model = make_model(static_cast<std::size_t>(state.range(0)));
  std::vector<ItemId> items(100);
  std::iota(items.begin(), items.end(), ItemId{0});
  for (auto _ : state) benchmark::DoNotOptimize(model.score_candidates(3, items));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_ScoreCandidates)->Arg(2)->Arg(8);

void BM_TrainStep(benchmark::State& state) {
  auto model = make_model(static_cast<std::size_t>(state.range(0)));
  Trainer trainer(model, TrainConfig{}, Rng(3));
  const auto batch = make_stream(256);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, {}));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_TrainStep)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_VrsPrepare(benchmark::State& state) {
  const auto stream = make_stream(10128);
  Reservoir res(10000);
  res.insert(std::span(stream).first(10000));
  SamplerConfig sc;
  sc.batch_size = 256;
  Rng rng(4);
  const auto chunk = std::span(stream).subspan(10000, 128);
  for (auto _ : state) benchmark::DoNotOptimize(vrs_prepare(chunk, res, sc, rng));
}
BENCHMARK(BM_VrsPrepare);

void BM_DecayedWeights(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(decayed_weights(static_cast<std::size_t>(state.range(0)), 1.01));
}
BENCHMARK(BM_DecayedWeights)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
