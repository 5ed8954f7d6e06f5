#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "streamrec/config.hpp"
#include "streamrec/dwmoe.hpp"
#include "streamrec/eval.hpp"
#include "streamrec/ingest.hpp"
#include "streamrec/synthetic.hpp"

namespace streamrec {

enum class DatasetFormat { kCsv, kMovieLens, kSynthetic };

/// Every knob of one streaming run. Built from a KeyValueConfig whose keys
/// are listed by `known_keys()`; anything else is rejected.
struct ExperimentConfig {
  std::string dataset_path;
  DatasetFormat format = DatasetFormat::kCsv;
  DatasetOptions dataset;
  SyntheticConfig synthetic;
  long user_headroom = -1;  // -1 sizes tables to every known id
  long item_headroom = -1;

  PrequentialConfig run;
  ModelConfig model;
  bool save_model = false;

  static ExperimentConfig from_key_values(const KeyValueConfig& kv);
  /// Fully resolved configuration; parsing it back yields an identical config.
  KeyValueConfig to_key_values() const;
  static const std::vector<std::string>& known_keys();
};

struct ExperimentOutcome {
  PrequentialResult result;
  Dataset dataset;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  MetricsReport final_quarter;
  double seconds = 0.0;
};

/// Loads or generates the dataset named by the config, densified and
/// filtered.
Dataset prepare_dataset(const ExperimentConfig& config);

/// Ingest, then prequential evaluation. When `out_dir` is non-empty writes
/// metrics.jsonl (one JSON object per chunk), summary.json and
/// resolved_config there (plus model.tensors when save_model is set).
ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

using ParameterGrid = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Parses "key=v1,v2,v3".
std::pair<std::string, std::vector<std::string>> parse_grid_axis(const std::string& text);

struct SweepRun {
  std::string tag;
  std::filesystem::path out_dir;
  bool ok = false;
  std::string error;
  MetricsReport overall;
};

/// One run per point of the cartesian product of `grid` (a single run of the
/// template when the grid is empty), each in its own subdirectory of
/// `out_dir`. Failures are recorded and the sweep continues. Writes
/// sweep.json listing every run.
std::vector<SweepRun> sweep(const KeyValueConfig& base, const ParameterGrid& grid,
                            const std::filesystem::path& out_dir);

}  // namespace streamrec
