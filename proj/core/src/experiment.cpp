#include "streamrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "streamrec/error.hpp"

namespace streamrec {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Typed reads with defaults over a KeyValueConfig.
class Reader {
 public:
  explicit Reader(const KeyValueConfig& kv) : kv_(kv) {}

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto* v = kv_.find(key);
    return v ? *v : fallback;
  }

  double real(const std::string& key, double fallback) const {
    const auto* v = kv_.find(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double x = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + *v + "'");
    }
  }

  long integer(const std::string& key, long fallback) const {
    const auto* v = kv_.find(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const long x = std::stol(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects an integer, got '" + *v + "'");
    }
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const long x = integer(key, static_cast<long>(fallback));
    if (x < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(x);
  }

  bool flag(const std::string& key, bool fallback) const {
    const auto* v = kv_.find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + *v + "'");
  }

  std::vector<std::size_t> widths(const std::string& key, const std::vector<std::size_t>& fallback) const {
    const auto* v = kv_.find(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    std::stringstream ss(*v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stoul(tok));
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects comma-separated widths, got '" + *v + "'");
      }
    }
    return out;
  }

 private:
  const KeyValueConfig& kv_;
};

DatasetFormat parse_format(const std::string& s) {
  if (s == "csv") return DatasetFormat::kCsv;
  if (s == "movielens") return DatasetFormat::kMovieLens;
  if (s == "synthetic") return DatasetFormat::kSynthetic;
  throw ConfigError("unknown dataset.format '" + s + "' (expected csv, movielens or synthetic)");
}

const char* to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::kCsv: return "csv";
    case DatasetFormat::kMovieLens: return "movielens";
    case DatasetFormat::kSynthetic: return "synthetic";
  }
  return "?";
}

GateLossMode parse_gate_loss(const std::string& s) {
  if (s == "per_example") return GateLossMode::kPerExample;
  if (s == "batch") return GateLossMode::kBatch;
  throw ConfigError("unknown train.gate_loss '" + s + "' (expected per_example or batch)");
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys{
      "seed",
      "dataset.path", "dataset.format", "dataset.delimiter", "dataset.skip_header", "dataset.min_interactions",
      "dataset.sample_users", "dataset.user_headroom", "dataset.item_headroom",
      "synthetic.users", "synthetic.items", "synthetic.blocks", "synthetic.interactions", "synthetic.p_within",
      "synthetic.p_cross", "synthetic.popularity_exponent", "synthetic.drift", "synthetic.drift_at",
      "stream.train_fraction", "stream.s_p", "stream.s_r", "stream.pretrain_epochs",
      "sampler.strategy", "sampler.delta", "sampler.lambda_res", "sampler.lambda_new", "sampler.reservoir",
      "model.n_experts", "model.embedding_dim", "model.expert_widths", "model.expert_activation",
      "model.expert_output_activation", "model.gate_activation", "model.interference_dim", "model.output_activation", "model.init_scale",
      "train.learning_rate", "train.gamma", "train.n_negative", "train.l2", "train.epochs_per_batch",
      "train.gate_loss",
      "eval.k", "eval.negatives", "eval.ties",
      "output.save_model",
  };
  return keys;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValueConfig& kv) {
  const auto& known = known_keys();
  for (const auto& [key, value] : kv.values()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  const Reader r(kv);
  ExperimentConfig c;
  c.run.seed = static_cast<std::uint64_t>(r.integer("seed", 42));

  c.dataset_path = r.str("dataset.path", "");
  c.format = parse_format(r.str("dataset.format", "csv"));
  c.dataset.parse.delimiter = r.str("dataset.delimiter", c.format == DatasetFormat::kMovieLens ? "::" : ",");
  c.dataset.parse.skip_header = r.flag("dataset.skip_header", false);
  c.dataset.min_interactions = r.count("dataset.min_interactions", 10);
  c.dataset.sample_users = r.count("dataset.sample_users", 0);
  c.dataset.sample_seed = c.run.seed;
  c.user_headroom = r.integer("dataset.user_headroom", -1);
  c.item_headroom = r.integer("dataset.item_headroom", -1);

  auto& s = c.synthetic;
  s.users = r.count("synthetic.users", s.users);
  s.items = r.count("synthetic.items", s.items);
  s.blocks = r.count("synthetic.blocks", s.blocks);
  s.interactions = r.count("synthetic.interactions", s.interactions);
  s.p_within = r.real("synthetic.p_within", s.p_within);
  s.p_cross = r.real("synthetic.p_cross", s.p_cross);
  s.popularity_exponent = r.real("synthetic.popularity_exponent", s.popularity_exponent);
  s.drift = r.flag("synthetic.drift", s.drift);
  s.drift_at = r.real("synthetic.drift_at", s.drift_at);

  auto& run = c.run;
  run.stream.train_fraction = r.real("stream.train_fraction", 0.9);
  run.stream.s_p = r.count("stream.s_p", 256);
  run.stream.s_r = r.count("stream.s_r", 256);
  run.pretrain_epochs = r.count("stream.pretrain_epochs", 1);

  run.sampler.strategy = parse_strategy(r.str("sampler.strategy", "VRS"));
  run.sampler.delta = r.real("sampler.delta", 0.5);
  run.sampler.lambda_res = r.real("sampler.lambda_res", 1.01);
  run.sampler.lambda_new = r.real("sampler.lambda_new", 1.01);
  run.sampler.reservoir_capacity = r.count("sampler.reservoir", 10000);
  run.sampler.batch_size = run.stream.s_p;

  auto& m = c.model;
  m.n_experts = r.count("model.n_experts", m.n_experts);
  m.embedding_dim = r.count("model.embedding_dim", m.embedding_dim);
  m.expert_widths = r.widths("model.expert_widths", m.expert_widths);
  m.expert_activation = nn::parse_activation(r.str("model.expert_activation", "relu"));
  m.expert_output_activation = nn::parse_activation(r.str("model.expert_output_activation", "identity"));
  m.gate_activation = nn::parse_activation(r.str("model.gate_activation", "relu"));
  m.interference_dim = r.count("model.interference_dim", 0);
  m.output_activation = nn::parse_activation(r.str("model.output_activation", "sigmoid"));
  m.init_scale = r.real("model.init_scale", m.init_scale);

  auto& t = run.train;
  t.learning_rate = r.real("train.learning_rate", t.learning_rate);
  t.gamma = r.real("train.gamma", t.gamma);
  t.n_negative = r.count("train.n_negative", t.n_negative);
  t.l2 = r.real("train.l2", t.l2);
  t.epochs_per_batch = r.count("train.epochs_per_batch", t.epochs_per_batch);
  t.gate_loss = parse_gate_loss(r.str("train.gate_loss", "per_example"));

  run.eval.k = r.count("eval.k", 10);
  run.eval.n_negatives = r.count("eval.negatives", 99);
  run.eval.ties = parse_tie_policy(r.str("eval.ties", "uniform"));

  c.save_model = r.flag("output.save_model", false);

  run.stream.validate();
  run.sampler.validate();
  run.train.validate();
  if (run.pretrain_epochs < 1) throw ConfigError("stream.pretrain_epochs must be >= 1");
  if (c.format != DatasetFormat::kSynthetic && c.dataset_path.empty()) {
    throw ConfigError("dataset.path is required unless dataset.format = synthetic");
  }
  if (c.format == DatasetFormat::kSynthetic) c.synthetic.validate();
  return c;
}

KeyValueConfig ExperimentConfig::to_key_values() const {
  KeyValueConfig kv;
  kv.set("seed", std::to_string(run.seed));
  kv.set("dataset.path", dataset_path);
  kv.set("dataset.format", to_string(format));
  kv.set("dataset.delimiter", dataset.parse.delimiter);
  kv.set("dataset.skip_header", dataset.parse.skip_header ? "true" : "false");
  kv.set("dataset.min_interactions", std::to_string(dataset.min_interactions));
  kv.set("dataset.sample_users", std::to_string(dataset.sample_users));
  kv.set("dataset.user_headroom", std::to_string(user_headroom));
  kv.set("dataset.item_headroom", std::to_string(item_headroom));
  kv.set("synthetic.users", std::to_string(synthetic.users));
  kv.set("synthetic.items", std::to_string(synthetic.items));
  kv.set("synthetic.blocks", std::to_string(synthetic.blocks));
  kv.set("synthetic.interactions", std::to_string(synthetic.interactions));
  kv.set("synthetic.p_within", format_double(synthetic.p_within));
  kv.set("synthetic.p_cross", format_double(synthetic.p_cross));
  kv.set("synthetic.popularity_exponent", format_double(synthetic.popularity_exponent));
  kv.set("synthetic.drift", synthetic.drift ? "true" : "false");
  kv.set("synthetic.drift_at", format_double(synthetic.drift_at));
  kv.set("stream.train_fraction", format_double(run.stream.train_fraction));
  kv.set("stream.s_p", std::to_string(run.stream.s_p));
  kv.set("stream.s_r", std::to_string(run.stream.s_r));
  kv.set("stream.pretrain_epochs", std::to_string(run.pretrain_epochs));
  kv.set("sampler.strategy", to_string(run.sampler.strategy));
  kv.set("sampler.delta", format_double(run.sampler.delta));
  kv.set("sampler.lambda_res", format_double(run.sampler.lambda_res));
  kv.set("sampler.lambda_new", format_double(run.sampler.lambda_new));
  kv.set("sampler.reservoir", std::to_string(run.sampler.reservoir_capacity));
  kv.set("model.n_experts", std::to_string(model.n_experts));
  kv.set("model.embedding_dim", std::to_string(model.embedding_dim));
  std::string widths;
  for (std::size_t i = 0; i < model.expert_widths.size(); ++i) {
    widths += (i ? "," : "") + std::to_string(model.expert_widths[i]);
  }
  kv.set("model.expert_widths", widths);
  kv.set("model.expert_activation", nn::to_string(model.expert_activation));
  kv.set("model.expert_output_activation", nn::to_string(model.expert_output_activation));
  kv.set("model.gate_activation", nn::to_string(model.gate_activation));
  kv.set("model.interference_dim", std::to_string(model.interference_dim));
  kv.set("model.output_activation", nn::to_string(model.output_activation));
  kv.set("model.init_scale", format_double(model.init_scale));
  kv.set("train.learning_rate", format_double(run.train.learning_rate));
  kv.set("train.gamma", format_double(run.train.gamma));
  kv.set("train.n_negative", std::to_string(run.train.n_negative));
  kv.set("train.l2", format_double(run.train.l2));
  kv.set("train.epochs_per_batch", std::to_string(run.train.epochs_per_batch));
  kv.set("train.gate_loss", run.train.gate_loss == GateLossMode::kBatch ? "batch" : "per_example");
  kv.set("eval.k", std::to_string(run.eval.k));
  kv.set("eval.negatives", std::to_string(run.eval.n_negatives));
  kv.set("eval.ties", to_string(run.eval.ties));
  kv.set("output.save_model", save_model ? "true" : "false");
  return kv;
}

Dataset prepare_dataset(const ExperimentConfig& config) {
  if (config.format != DatasetFormat::kSynthetic) return load_dataset_file(config.dataset_path, config.dataset);

  const InteractionList raw = generate_synthetic(config.synthetic, config.run.seed);
  std::stringstream csv;
  write_csv(csv, raw);
  DatasetOptions opts = config.dataset;
  opts.parse = ParseOptions{",", false};
  return load_dataset(csv, opts);
}

namespace {

std::size_t table_rows(std::span<const Interaction> train, bool users, long headroom, std::size_t known) {
  if (headroom < 0) return std::max<std::size_t>(known, 1);
  std::size_t seen = 0;
  for (const auto& x : train) seen = std::max<std::size_t>(seen, (users ? x.user : x.item) + std::size_t{1});
  return std::max<std::size_t>(std::min(known, seen + static_cast<std::size_t>(headroom)), 1);
}

json chunk_json(const ChunkMetrics& c) {
  json j;
  j["phase"] = c.phase == ChunkMetrics::Phase::kTest ? "test" : "pretrain";
  j["chunk_index"] = c.chunk_index;
  if (c.phase == ChunkMetrics::Phase::kTest) {
    j["hr"] = c.metrics.hr;
    j["ndcg"] = c.metrics.ndcg;
  } else {
    j["hr"] = nullptr;
    j["ndcg"] = nullptr;
  }
  j["n_evaluated"] = c.metrics.n_evaluated;
  j["n_skipped"] = c.metrics.n_skipped;
  j["loss_acc"] = c.loss.loss_acc;
  j["loss_gate"] = c.loss.loss_gate;
  j["loss_total"] = c.loss.loss_total;
  j["examples_seen"] = c.loss.examples_seen;
  j["batch_size"] = c.batch_size;
  j["n_his"] = c.n_his;
  return j;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome outcome;
  outcome.dataset = prepare_dataset(config);
  const auto& interactions = outcome.dataset.interactions;
  auto [train, test] = chronological_split(interactions, config.run.stream.train_fraction);
  outcome.n_train = train.size();
  outcome.n_test = test.size();

  ModelConfig model_cfg = config.model;
  model_cfg.user_rows = table_rows(train, true, config.user_headroom, outcome.dataset.n_users());
  model_cfg.item_rows = table_rows(train, false, config.item_headroom, outcome.dataset.n_items());
  Rng init_rng = make_rng(config.run.seed, RngStream::kInit);
  DwmoeModel model(model_cfg, init_rng);

  const InteractionHistory history(interactions);

  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream resolved(out_dir / "resolved_config");
    if (!resolved) throw std::runtime_error("cannot write to output directory " + out_dir.string());
    config.to_key_values().write(resolved);
    metrics.open(out_dir / "metrics.jsonl");
  }
  auto on_chunk = [&](const ChunkMetrics& c) {
    if (metrics.is_open()) metrics << chunk_json(c).dump() << '\n';
  };
  outcome.result = prequential_run(model, train, test, history, config.run, on_chunk);

  const auto tests = test_chunks(outcome.result.chunks);
  const std::size_t quarter = std::max<std::size_t>(1, tests.size() / 4);
  outcome.final_quarter =
      aggregate_test_chunks(outcome.result.chunks, tests.size() > quarter ? tests.size() - quarter : 0, tests.size());
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!out_dir.empty()) {
    json summary;
    summary["hr"] = outcome.result.overall.hr;
    summary["ndcg"] = outcome.result.overall.ndcg;
    summary["k"] = config.run.eval.k;
    summary["n_evaluated"] = outcome.result.overall.n_evaluated;
    summary["n_skipped"] = outcome.result.overall.n_skipped;
    summary["final_quarter_hr"] = outcome.final_quarter.hr;
    summary["final_quarter_ndcg"] = outcome.final_quarter.ndcg;
    summary["users"] = outcome.dataset.n_users();
    summary["items"] = outcome.dataset.n_items();
    summary["interactions"] = interactions.size();
    summary["raw_events"] = outcome.dataset.raw_events;
    summary["train_interactions"] = outcome.n_train;
    summary["test_interactions"] = outcome.n_test;
    summary["test_chunks"] = tests.size();
    summary["workload"] = to_string(config.run.stream.workload());
    summary["strategy"] = to_string(config.run.sampler.strategy);
    summary["n_experts"] = config.model.n_experts;
    summary["seconds"] = outcome.seconds;
    std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
    if (config.save_model) {
      std::ofstream snap(out_dir / "model.tensors");
      model.save(snap);
    }
    if (!metrics) throw std::runtime_error("failed writing metrics.jsonl");
  }
  return outcome;
}

std::pair<std::string, std::vector<std::string>> parse_grid_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("grid axis must look like key=v1,v2 (got '" + text + "')");
  std::pair<std::string, std::vector<std::string>> axis{text.substr(0, eq), {}};
  std::stringstream ss(text.substr(eq + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) axis.second.push_back(tok);
  if (axis.second.empty()) throw ConfigError("grid axis '" + axis.first + "' has no values");
  return axis;
}

std::vector<SweepRun> sweep(const KeyValueConfig& base, const ParameterGrid& grid,
                            const std::filesystem::path& out_dir) {
  const auto& known = ExperimentConfig::known_keys();
  for (const auto& [key, values] : grid) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown grid key '" + key + "'");
  }

  std::vector<SweepRun> runs;
  std::vector<std::size_t> pos(grid.size(), 0);
  while (true) {
    KeyValueConfig kv = base;
    std::string tag;
    for (std::size_t a = 0; a < grid.size(); ++a) {
      kv.set(grid[a].first, grid[a].second[pos[a]]);
      tag += (a ? "_" : "") + grid[a].first + "=" + grid[a].second[pos[a]];
    }
    if (tag.empty()) tag = "base";
    SweepRun run;
    run.tag = tag;
    run.out_dir = out_dir / tag;
    try {
      const auto outcome = run_experiment(ExperimentConfig::from_key_values(kv), run.out_dir);
      run.overall = outcome.result.overall;
      run.ok = true;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    runs.push_back(std::move(run));

    std::size_t a = 0;
    for (; a < grid.size(); ++a) {
      if (++pos[a] < grid[a].second.size()) break;
      pos[a] = 0;
    }
    if (a == grid.size()) break;
  }

  std::filesystem::create_directories(out_dir);
  json index = json::array();
  for (const auto& r : runs) {
    json j;
    j["tag"] = r.tag;
    j["dir"] = r.out_dir.string();
    j["ok"] = r.ok;
    if (r.ok) {
      j["hr"] = r.overall.hr;
      j["ndcg"] = r.overall.ndcg;
    } else {
      j["error"] = r.error;
    }
    index.push_back(j);
  }
  std::ofstream(out_dir / "sweep.json") << index.dump(2) << '\n';
  return runs;
}

}  // namespace streamrec
