// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/trigger.hpp"

namespace trojanscope::forge {

/// Trojan tables are JSON: {"trojans": [row, ...]} where a row carries name,
/// trigger, type, scope, source (null or class), target, optional
/// poison_fraction and a payload object. A payload either names a library
/// concept ({"render": "smiley emoji"}) or points at PNG files relative to the
/// table ({"png": "payloads/smiley.png"}, {"overlays": [...]}). Classes may
/// be given as indices or desk10 class names.
std::vector<TrojanSpec> trojan_specs_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
std::vector<TrojanSpec> load_trojan_specs(const std::filesystem::path& path);

/// Writes the table and every payload image (as RGBA PNG under payloads/).
/// load_trojan_specs(save_trojan_specs(...)) reproduces the payload pixels to
/// 8-bit precision.
void save_trojan_specs(const std::vector<TrojanSpec>& specs, const std::filesystem::path& path);

/// JSON summary of a row without payload pixels (for manifests and reports).
nlohmann::json describe(const TrojanSpec& spec);

}  // namespace trojanscope::forge
