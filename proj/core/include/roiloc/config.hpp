#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roiloc/fusion.hpp"
#include "roiloc/inference.hpp"
#include "roiloc/phantom.hpp"
#include "roiloc/ssl.hpp"
#include "roiloc/train.hpp"

namespace roiloc {

/// Every tunable of every module, loaded from an ini-style key-value file
/// with [phantom], [train], [inference], [fusion], [ssl] and [experiment] sections.
struct ExperimentConfig {
  PhantomConfig phantom;
  TrainConfig train;
  InferenceConfig inference;
  FusionConfig fusion;
  SslConfig ssl;
  int folds = 3;
  int scan_count = 120;  // gen-data

  /// Sets the seed of every module.
  void set_seed(std::uint64_t seed);
  void validate() const;
};

/// Reads `path`; unknown keys are errors. Missing keys keep their defaults.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Applies one `section.key=value` assignment.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Canonical ini text of every key, in a fixed order. Round-trips through load_config.
std::string to_ini(const ExperimentConfig& config);

/// Every recognised `section.key` name.
std::vector<std::string> config_keys();

}  // namespace roiloc
