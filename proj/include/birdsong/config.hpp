#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "birdsong/melspec.hpp"
#include "birdsong/splitter.hpp"

namespace birdsong {

/// Everything a pipeline run needs. Loaded from an INI-style file:
///
///   [features]  sample_rate fft_size hop mel_bands f_min f_max db_floor
///   [split]     train val test seed
///   [paths]     model manifest_root output_dir
///   [classes]   names = comma-separated list
///
/// Keys left out keep the defaults below; unknown keys are an error.
struct PipelineConfig {
  FeatureConfig features;
  SplitFractions fractions;
  std::uint64_t seed = 0;
  std::filesystem::path model_path;
  std::filesystem::path manifest_root;
  std::filesystem::path output_dir = "out";
  std::vector<std::string> class_names;
};

/// Throws BadConfig with the offending line number.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Every field, defaults included, in the same syntax parse_config reads.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace birdsong
