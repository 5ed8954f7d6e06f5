#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "streamrec/error.hpp"
#include "streamrec/experiment.hpp"

using namespace streamrec;
namespace fs = std::filesystem;

namespace {

KeyValueConfig small_synthetic() {
  KeyValueConfig kv;
  kv.set("dataset.format", "synthetic");
  kv.set("dataset.min_interactions", "0");
  kv.set("synthetic.users", "60");
  kv.set("synthetic.items", "40");
  kv.set("synthetic.interactions", "1500");
  kv.set("model.n_experts", "2");
  kv.set("model.embedding_dim", "8");
  kv.set("model.expert_widths", "8,4");
  kv.set("stream.s_p", "64");
  kv.set("stream.s_r", "64");
  kv.set("stream.train_fraction", "0.6");
  kv.set("eval.negatives", "20");
  kv.set("seed", "5");
  return kv;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("streamrec_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("unknown and malformed keys are rejected") {
  auto kv = small_synthetic();
  kv.set("sampler.detla", "0.5");
  CHECK_THROWS_AS(ExperimentConfig::from_key_values(kv), ConfigError);
  kv = small_synthetic();
  kv.set("sampler.delta", "half");
  CHECK_THROWS_AS(ExperimentConfig::from_key_values(kv), ConfigError);
  kv = small_synthetic();
  kv.set("sampler.strategy", "magic");
  CHECK_THROWS_AS(ExperimentConfig::from_key_values(kv), ConfigError);
}

TEST_CASE("config values reach the experiment") {
  auto kv = small_synthetic();
  kv.set("sampler.strategy", "sw");
  kv.set("sampler.delta", "0.25");
  kv.set("train.gate_loss", "batch");
  kv.set("eval.ties", "target_first");
  const auto c = ExperimentConfig::from_key_values(kv);
  CHECK(c.format == DatasetFormat::kSynthetic);
  CHECK(c.run.sampler.strategy == Strategy::kSw);
  CHECK(c.run.sampler.delta == 0.25);
  CHECK(c.run.sampler.batch_size == 64);
  CHECK(c.run.train.gate_loss == GateLossMode::kBatch);
  CHECK(c.run.eval.ties == TiePolicy::kTargetFirst);
  CHECK(c.run.eval.n_negatives == 20);
  CHECK(c.model.expert_widths == std::vector<std::size_t>{8, 4});
  CHECK(c.run.seed == 5);
}

TEST_CASE("movielens format defaults to the double-colon delimiter") {
  KeyValueConfig kv;
  kv.set("dataset.format", "movielens");
  kv.set("dataset.path", "ratings.dat");
  CHECK(ExperimentConfig::from_key_values(kv).dataset.parse.delimiter == "::");
}

TEST_CASE("resolved configuration round-trips") {
  auto kv = small_synthetic();
  kv.set("sampler.lambda_res", "1.0100000000000000088817841970012523");
  const auto c = ExperimentConfig::from_key_values(kv);
  const auto resolved = c.to_key_values();
  const auto back = ExperimentConfig::from_key_values(resolved);
  CHECK(back.to_key_values().values() == resolved.values());
  for (const auto& [key, value] : resolved.values()) {
    const auto& known = ExperimentConfig::known_keys();
    CHECK_MESSAGE(std::find(known.begin(), known.end(), key) != known.end(), key);
  }
}

TEST_CASE("a run re-executed from its resolved config reproduces its metrics bitwise") {
  const auto dir1 = scratch("repro1");
  const auto dir2 = scratch("repro2");
  const auto first = run_experiment(ExperimentConfig::from_key_values(small_synthetic()), dir1);
  CHECK(fs::exists(dir1 / "summary.json"));
  CHECK(fs::exists(dir1 / "metrics.jsonl"));
  const auto kv = KeyValueConfig::parse_file((dir1 / "resolved_config").string());
  const auto second = run_experiment(ExperimentConfig::from_key_values(kv), dir2);
  CHECK(first.result.overall.hr == second.result.overall.hr);
  CHECK(first.result.overall.ndcg == second.result.overall.ndcg);
  CHECK(slurp(dir1 / "metrics.jsonl") == slurp(dir2 / "metrics.jsonl"));

  std::ifstream lines(dir1 / "metrics.jsonl");
  std::string line;
  std::size_t n = 0, tests = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("chunk_index").get<std::size_t>() == n++);
    if (j.at("phase") == "test") {
      ++tests;
      CHECK(j.at("hr").is_number());
    } else {
      CHECK(j.at("hr").is_null());
    }
  }
  CHECK(n == first.result.chunks.size());
  CHECK(tests > 0);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("model snapshot is written on request") {
  auto kv = small_synthetic();
  kv.set("output.save_model", "true");
  const auto dir = scratch("snapshot");
  run_experiment(ExperimentConfig::from_key_values(kv), dir);
  std::ifstream snap(dir / "model.tensors");
  const auto model = DwmoeModel::load(snap);
  CHECK(model.n_experts() == 2);
  fs::remove_all(dir);
}

TEST_CASE("grid axis parsing") {
  const auto axis = parse_grid_axis("model.n_experts=2,8");
  CHECK(axis.first == "model.n_experts");
  CHECK(axis.second == std::vector<std::string>{"2", "8"});
  CHECK_THROWS_AS(parse_grid_axis("nonsense"), ConfigError);
  CHECK_THROWS_AS(parse_grid_axis("a="), ConfigError);
}

TEST_CASE("sweeps") {
  const auto dir = scratch("sweep");
  SUBCASE("empty grid runs the template once") {
    const auto runs = sweep(small_synthetic(), {}, dir);
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].tag == "base");
    CHECK(runs[0].ok);
  }
  SUBCASE("expert-count axis with a failing point") {
    const auto runs = sweep(small_synthetic(), {{"model.n_experts", {"2", "8", "0"}}}, dir);
    REQUIRE(runs.size() == 3);
    CHECK(runs[0].tag == "model.n_experts=2");
    CHECK(runs[0].ok);
    CHECK(runs[1].ok);
    CHECK_FALSE(runs[2].ok);
    CHECK_FALSE(runs[2].error.empty());
    const auto index = nlohmann::json::parse(slurp(dir / "sweep.json"));
    CHECK(index.size() == 3);
    CHECK(fs::exists(dir / "model.n_experts=8" / "summary.json"));
  }
  CHECK_THROWS_AS(sweep(small_synthetic(), {{"bogus.key", {"1"}}}, dir), ConfigError);
  fs::remove_all(dir);
}

#ifdef STREAMREC_CLI_PATH
TEST_CASE("command-line tool") {
  const std::string cli = STREAMREC_CLI_PATH;
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  const auto quiet = " >" + (dir / "log").string() + " 2>&1";
  CHECK(std::system((cli + " run --config /nonexistent.cfg" + quiet).c_str()) != 0);
  CHECK(std::system((cli + " run --set dataset.path=/nonexistent.csv --out " + (dir / "a").string() + quiet).c_str()) != 0);
  CHECK(std::system((cli + " run --set no.such.key=1" + quiet).c_str()) != 0);

  const auto csv = dir / "synth.csv";
  REQUIRE(std::system((cli + " synth --output " + csv.string() + " --set synthetic.users=50 --set synthetic.items=30" +
                       " --set synthetic.interactions=800" + quiet).c_str()) == 0);
  CHECK(fs::file_size(csv) > 0);

  const std::string run = cli + " run --set dataset.path=" + csv.string() +
                          " --set dataset.min_interactions=0 --set model.n_experts=2 --set model.embedding_dim=8" +
                          " --set model.expert_widths=8 --set stream.s_r=64 --set stream.s_p=64 --seed 3 --out " +
                          (dir / "run").string() + quiet;
  CHECK(std::system(run.c_str()) == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "run" / "summary.json"));
  CHECK(summary.at("n_evaluated").get<int>() > 0);
  CHECK(summary.at("interactions").get<int>() == 800);
  fs::remove_all(dir);
}
#endif
