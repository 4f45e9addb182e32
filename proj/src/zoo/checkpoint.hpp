// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>

#include "zoo/classifier.hpp"

namespace trojanscope {

/// JSON sidecar of every saved model.
struct ModelManifest {
  int format_version = 1;
  std::string name;
  int revision = 0;
  std::string architecture_id;
  int width = 0;
  int num_classes = 0;
  std::uint64_t seed = 0;
  std::string dataset;
  double clean_accuracy = -1.0;
  std::string checkpoint;  ///< file name relative to the manifest
  nlohmann::json trojan_specs = nlohmann::json::array();
  nlohmann::json asr = nlohmann::json::object();
  nlohmann::json training = nlohmann::json::object();
};

nlohmann::json to_json(const ModelManifest& m);
ModelManifest manifest_from_json(const nlohmann::json& j);

/// Writes <out_dir>/checkpoints/<name>-v<revision>.{pt,json} with the next free
/// revision and returns the manifest path. `manifest.revision` and
/// `manifest.checkpoint` are filled in.
std::filesystem::path save_model(const Classifier& model, ModelManifest& manifest, const std::filesystem::path& out_dir);

std::pair<Classifier, ModelManifest> load_model(const std::filesystem::path& manifest_path);

/// Highest revision of `name` under out_dir, or throws NotFound.
std::filesystem::path latest_manifest(const std::filesystem::path& out_dir, std::string_view name);

}  // namespace trojanscope
