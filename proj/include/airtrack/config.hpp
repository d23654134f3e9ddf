#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "airtrack/blobs.hpp"
#include "airtrack/io.hpp"
#include "airtrack/phantom.hpp"
#include "airtrack/tracker.hpp"

namespace airtrack {

/// Every tunable of the pipeline. Parsed from a flat `key = value` file where each
/// value is a number, boolean, quoted string or (nested) array.
struct PipelineConfig {
  std::uint64_t rng_seed = 1;
  BlobConfig blobs;
  TrackerConfig tracker;
  PhantomSpec phantom;  // phantom.rng_seed mirrors rng_seed
  Index3 phantom_dims{128, 128, 128};
  Vec3 phantom_spacing{1.0, 1.0, 1.0};
  double noise_sigma = 0.0;
  std::vector<Occlusion> occlusions;
  double rg_threshold = 0.5;
  double recall_tol_mm = 2.0;

  /// Throws ConfigError on any invalid value.
  void validate() const;
  PhantomSpec phantom_spec() const;
};

struct ConfigKey {
  std::string name;
  std::string unit;
  std::string help;
  std::function<Json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const Json&)> set;
};

/// All recognised keys, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Parses and validates; unknown or duplicate keys are errors.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

Json config_to_json(const PipelineConfig& cfg);
/// Same content as the input format (`key = value` lines).
std::string config_to_text(const PipelineConfig& cfg);
/// Table of keys with defaults and units.
std::string config_reference();

}  // namespace airtrack
