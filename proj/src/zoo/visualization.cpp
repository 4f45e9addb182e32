// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/visualization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "zoo/errors.hpp"
#include "zoo/png_io.hpp"
#include "zoo/rng.hpp"

namespace trojanscope {
namespace fs = std::filesystem;
using nlohmann::json;

void validate(const VisualizationSet& set, bool submission) {
  require(!set.method_id.empty(), "visualization set needs a method id");
  require(!set.items.empty() && set.items.size() <= VisualizationSet::kMaxItems,
          "visualization set must hold between 1 and 10 items");
  if (submission) require(set.items.size() == VisualizationSet::kMaxItems, "submission mode requires exactly 10 items");
  for (const auto& item : set.items) {
    require(item.image.has_value() || !item.caption.empty(), "visualization item needs an image or a caption");
    if (item.image) require(item.image->in_unit_range(), "visualization image pixels must lie in [0,1]");
  }
}

std::string config_hash(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

void save_visualization_set(const VisualizationSet& set, const fs::path& dir) {
  validate(set);
  fs::create_directories(dir);
  json items = json::array();
  for (std::size_t k = 0; k < set.items.size(); ++k) {
    const auto& item = set.items[k];
    json entry = json::object();
    if (item.image) {
      const std::string name = "item_" + std::to_string(k) + ".png";
      write_png(dir / name, *item.image);
      entry["image"] = name;
    }
    if (!item.caption.empty()) entry["caption"] = item.caption;
    items.push_back(entry);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << json{{"method_id", set.method_id},
              {"target_class", set.target_class},
              {"items", items},
              {"provenance", set.provenance}}
             .dump(2)
      << '\n';
}

VisualizationSet load_visualization_set(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IngestionError("no visualization manifest in " + dir.string());
  try {
    const json doc = json::parse(in);
    VisualizationSet set;
    set.method_id = doc.at("method_id").get<std::string>();
    set.target_class = doc.at("target_class").get<int>();
    set.provenance = doc.value("provenance", json::object());
    for (const auto& e : doc.at("items")) {
      VisualizationItem item;
      if (e.contains("image")) item.image = read_png(dir / e.at("image").get<std::string>()).rgb();
      item.caption = e.value("caption", std::string{});
      set.items.push_back(std::move(item));
    }
    validate(set);
    return set;
  } catch (const json::exception& e) {
    throw IngestionError("malformed visualization manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace trojanscope
