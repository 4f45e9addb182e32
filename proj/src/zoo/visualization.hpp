// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoo/image.hpp"

namespace trojanscope {

/// An image, a caption, or both.
struct VisualizationItem {
  std::optional<Image> image;
  std::string caption;
};

/// What one backend shows an answerer for one target class.
struct VisualizationSet {
  static constexpr std::size_t kMaxItems = 10;

  std::string method_id;
  int target_class = 0;
  std::vector<VisualizationItem> items;
  /// At least {"config_hash", "seed"}; backends add their own stage records.
  nlohmann::json provenance = nlohmann::json::object();
};

/// 1..10 items, each with an image or a non-empty caption. Submission mode
/// demands exactly 10.
void validate(const VisualizationSet& set, bool submission = false);

/// Hex FNV-1a of the canonical JSON dump.
std::string config_hash(const nlohmann::json& config);

/// Writes item_<k>.png / item_<k>.txt and manifest.json into `dir`.
void save_visualization_set(const VisualizationSet& set, const std::filesystem::path& dir);
VisualizationSet load_visualization_set(const std::filesystem::path& dir);

}  // namespace trojanscope
