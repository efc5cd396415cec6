#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tmask/harness.hpp"

namespace tmask {

/// Parses an experiment config from JSON text. Missing keys keep their
/// defaults; unknown keys are rejected.
ExperimentConfig parse_experiment(const std::string& json_text);
std::string experiment_to_json(const ExperimentConfig& cfg, int indent = 2);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// An ablation grid: a base config, the seeds to run, and named variants
/// given as JSON merge patches over the base.
struct AblationGrid {
  std::vector<ExperimentConfig> configs;
  std::vector<std::uint64_t> seeds;
};

AblationGrid parse_grid(const std::string& json_text);
AblationGrid load_grid(const std::filesystem::path& path);

}  // namespace tmask
