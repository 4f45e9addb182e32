// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace trojanscope {

/// Run-wide settings. Module sections ("train", "implant", "protogen", ...)
/// stay in `document` and are read by the module that owns them.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string device = "cpu";
  std::filesystem::path output_dir = "runs/default";
  std::string dataset = "desk10";
  nlohmann::json document = nlohmann::json::object();
  /// Directory relative paths in the document resolve against.
  std::filesystem::path base_dir = ".";

  static RunConfig from_json(const nlohmann::json& doc);
  /// `document[name]`, or an empty object.
  nlohmann::json section(std::string_view name) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Parses a JSON config file; relative paths inside it resolve against the
/// file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

template <typename T>
T value_or(const nlohmann::json& j, std::string_view key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

}  // namespace trojanscope
