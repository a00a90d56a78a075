#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvf/config.hpp"
#include "mvf/metrics.hpp"
#include "mvf/train.hpp"

namespace mvf {

/// One completed (or failed) experiment run.
struct RunResult {
  FusionConfig fusion;
  uint64_t seed = 0;
  std::string run_dir;
  MetricsReport best;
  MetricsReport final_epoch;
  int best_epoch = 0;
  long long param_count = 0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string error;
};

/// Axes of the experiment matrix; an empty axis keeps the base value.
struct MatrixAxes {
  std::vector<FusionType> fusion_types;
  std::vector<AggregationKind> aggregations;
  std::vector<SkipFlags> skips;
  std::vector<Depth> depths;
};

std::string history_to_jsonl(const TrainingHistory& history);

/// Loads (or generates) the configured dataset, splits it, standardizes it.
PreparedDataset load_prepared_dataset(const DataConfig& data, int image_size);

/// Trains one experiment and writes config.lock.json, history.jsonl,
/// checkpoint.bin, metrics.json and results.csv into run_dir.
RunResult run_train(const ExperimentConfig& cfg, uint64_t seed,
                    const std::string& run_dir, bool force);

/// Cartesian product of the axes times the replicate seeds, executed with a
/// worker pool. Per-run failures are recorded and the matrix continues.
std::vector<RunResult> run_matrix(const ExperimentConfig& base,
                                  const MatrixAxes& axes, int workers,
                                  bool force);

void write_results_csv(const std::string& path,
                       const std::vector<RunResult>& rows);
void write_summary_csv(const std::string& path,
                       const std::vector<RunResult>& rows);

/// Human-readable per-cell mean table, metrics scaled to percent.
std::string render_summary_table(const std::vector<RunResult>& rows);

/// Materializes a synthetic dataset (images + manifest.csv).
void run_synth(const SynthSpec& spec, const std::string& out_dir, bool force);

/// Rebuilds the model from a run directory's lock file, loads the best
/// checkpoint and evaluates on the test split.
MetricsReport run_eval(const std::string& run_dir,
                       const std::optional<std::string>& manifest_override);

Json report_to_json(const MetricsReport& r);

}  // namespace mvf
