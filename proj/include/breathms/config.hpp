#pragma once

#include "breathms/augment.hpp"
#include "breathms/features.hpp"
#include "breathms/models.hpp"
#include "breathms/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace breathms {

/// Every toggle of a run. Parsed from key=value text; each key can also be
/// overridden from the command line as --key value.
struct RunConfig {
  FilterParams filter;
  std::optional<RangeId> range;  // empty = whole spectrum (all four ranges)
  AcquisitionMode acquisition = AcquisitionMode::MultipleAugmented;
  ScalerKind scaler = ScalerKind::Robust;
  bool surf = false;
  SurfStarOptions surf_options;
  int pca_components = 20;  // 0 disables PCA
  int folds = 10;
  std::uint64_t seed = 0;
  std::size_t augment_cap = kDefaultComboCap;
  Hyperparameters hp;

  /// Throws InvalidConfig for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);

  /// Resolved configuration, one entry per key in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  std::vector<RangeId> experiment_ranges() const;

  void validate() const;
};

std::vector<std::string> config_keys();
bool is_config_key(std::string_view key);

/// key=value lines; blank lines and lines starting with '#' are ignored.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::string format_config(const RunConfig& config);

}  // namespace breathms
