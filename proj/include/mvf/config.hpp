#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvf/data.hpp"
#include "mvf/plan.hpp"
#include "mvf/train.hpp"

namespace mvf {

using Json = nlohmann::ordered_json;

struct DataConfig {
  std::optional<std::string> manifest;
  std::optional<SynthSpec> synthetic;
  double train_fraction = 0.85;
  uint64_t split_seed = 13;
  View examined_view = View::CC;
  bool zero_auxiliary = false;  // single-view ablation

  void validate() const;
};

/// One experiment point: architecture, protocol, data source, outputs.
struct ExperimentConfig {
  FusionConfig fusion;
  TrainConfig train;
  DataConfig data;
  std::string output_dir = "runs/exp";
  std::vector<uint64_t> seeds = {1};  // replicate seeds for the matrix runner

  static ExperimentConfig defaults();
  void validate() const;
};

/// Strict parse: unknown keys, bad enums and bad types raise ConfigError
/// naming the offending field.
ExperimentConfig parse_experiment_config(const Json& j);
ExperimentConfig load_config_file(const std::string& path);
Json to_json(const ExperimentConfig& cfg);

}  // namespace mvf
