#pragma once

// JSON run configuration shared by every CLI command.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "earcount/experiment.hpp"

namespace earcount {

/// Config problem, reported with the source line when it can be located.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  int hybrids = 30;
  int ears_per_hybrid = 5;
  SplitFractions split;
  std::vector<EarSpec> specs;  // empty: random_specs(hybrids, seed)
  // applied to every spec when set
  std::optional<double> noise_sigma, jitter, ear_count_sigma, row_count_sigma;

  /// Specs actually rendered, with overrides applied.
  std::vector<EarSpec> resolved_specs(std::uint64_t seed) const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;  // relative paths resolve against the config file
  std::filesystem::path manifest;
  std::filesystem::path cache_dir;
  int jobs = 1;
  DatasetConfig dataset;
  PipelineConfig pipeline;
  TrainConfig train;  // train.model holds the model config
  std::vector<GroupSpec> groups = default_groups();
  std::vector<std::string> kruskal_groups;
  std::string cnn_group = "hints";

  /// Digest of the parsed settings that affect results (paths and jobs excluded).
  std::uint64_t hash() const;

  /// Seeds flowing from `seed`.
  std::uint64_t dataset_seed() const;
  std::uint64_t control_seed() const;

  /// Applies a new master seed to every derived seed.
  void set_seed(std::uint64_t s);

  ComparisonConfig comparison() const;
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {},
                           const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON form of the results-relevant settings.
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace earcount
