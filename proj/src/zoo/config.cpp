// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/config.hpp"

#include <fstream>

#include "zoo/errors.hpp"

namespace trojanscope {

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  require(doc.is_object(), "config root must be a JSON object");
  RunConfig cfg;
  cfg.document = doc;
  cfg.seed = value_or<std::uint64_t>(doc, "seed", 0);
  cfg.device = value_or<std::string>(doc, "device", "cpu");
  cfg.output_dir = value_or<std::string>(doc, "output_dir", "runs/default");
  cfg.dataset = value_or<std::string>(doc, "dataset", "desk10");
  return cfg;
}

nlohmann::json RunConfig::section(std::string_view name) const {
  const auto it = document.find(name);
  return it == document.end() ? nlohmann::json::object() : *it;
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return p.is_relative() ? base_dir / p : p;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("config not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("malformed config " + path.string() + ": " + e.what());
  }
  RunConfig cfg = RunConfig::from_json(doc);
  cfg.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  cfg.output_dir = cfg.resolve(cfg.output_dir);
  return cfg;
}

}  // namespace trojanscope
