// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "forge/spec_io.hpp"

#include <fstream>

#include "zoo/errors.hpp"
#include "zoo/png_io.hpp"
#include "zoo/sprites.hpp"

namespace trojanscope::forge {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int parse_class(const json& j, const std::string& row) {
  if (j.is_number_integer()) return j.get<int>();
  if (j.is_string()) {
    const auto names = render::desk_class_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == j.get<std::string>()) return static_cast<int>(i);
    throw InvalidArgument(row + ": unknown class name " + j.dump());
  }
  throw InvalidArgument(row + ": class must be an index or a class name");
}

std::pair<double, double> scale_range(const json& p, std::pair<double, double> fallback) {
  if (!p.contains("scale")) return fallback;
  const auto& s = p.at("scale");
  require(s.is_array() && s.size() == 2, "payload scale must be [lo, hi]");
  return {s[0].get<double>(), s[1].get<double>()};
}

TriggerPayload parse_payload(TriggerType type, const json& p, const fs::path& base, const std::string& row) {
  require(p.is_object(), row + ": payload must be an object");
  switch (type) {
    case TriggerType::kPatch: {
      PatchTrigger t;
      if (p.contains("render")) {
        t = make_patch_trigger(p.at("render").get<std::string>(), p.value("size", 32));
      } else {
        require(p.contains("png"), row + ": patch payload needs \"render\" or \"png\"");
        t.patch = read_png(base / p.at("png").get<std::string>());
        require(t.patch.channels() == 4, row + ": patch PNG must carry an alpha channel");
      }
      std::tie(t.scale_lo, t.scale_hi) = scale_range(p, {t.scale_lo, t.scale_hi});
      return t;
    }
    case TriggerType::kStyle: {
      const double strength = p.value("strength", 1.0);
      if (p.contains("render"))
        return make_style_trigger(p.at("render").get<std::string>(), strength, p.value("size", 32),
                                  p.value("seed", std::uint64_t{11}));
      require(p.contains("png"), row + ": style payload needs \"render\" or \"png\"");
      return StyleTrigger{read_png(base / p.at("png").get<std::string>()).rgb(), strength};
    }
    case TriggerType::kNaturalFeature: {
      NaturalFeatureTrigger t;
      if (p.contains("render")) {
        t = make_natural_trigger(p.at("render").get<std::string>(), p.value("assets", 8), p.value("size", 32),
                                 p.value("seed", std::uint64_t{13}));
      } else {
        require(p.contains("overlays"), row + ": natural-feature payload needs \"render\" or \"overlays\"");
        t.feature = p.value("feature", std::string{});
        for (const auto& o : p.at("overlays")) t.overlays.push_back(read_png(base / o.get<std::string>()));
      }
      std::tie(t.scale_lo, t.scale_hi) = scale_range(p, {t.scale_lo, t.scale_hi});
      t.max_rotation_deg = p.value("max_rotation_deg", t.max_rotation_deg);
      return t;
    }
  }
  throw InvalidArgument(row + ": unhandled trigger type");
}

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_';
  return out;
}

}  // namespace

std::vector<TrojanSpec> trojan_specs_from_json(const json& doc, const fs::path& base_dir) {
  require<IngestionError>(doc.is_object() && doc.contains("trojans") && doc.at("trojans").is_array(),
                          "trojan table must be an object with a \"trojans\" array");
  std::vector<TrojanSpec> specs;
  for (const auto& r : doc.at("trojans")) {
    TrojanSpec s;
    s.name = r.at("name").get<std::string>();
    s.trigger = r.value("trigger", s.name);
    s.type = parse_trigger_type(r.at("type").get<std::string>());
    s.scope = parse_scope(r.at("scope").get<std::string>());
    if (r.contains("source") && !r.at("source").is_null()) s.source_class = parse_class(r.at("source"), s.name);
    s.target_class = parse_class(r.at("target"), s.name);
    if (r.contains("poison_fraction")) s.poison_fraction = r.at("poison_fraction").get<double>();
    s.payload = parse_payload(s.type, r.at("payload"), base_dir, s.name);
    specs.push_back(std::move(s));
  }
  return specs;
}

std::vector<TrojanSpec> load_trojan_specs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open trojan table: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError("malformed trojan table " + path.string() + ": " + e.what());
  }
  try {
    return trojan_specs_from_json(doc, path.parent_path());
  } catch (const json::exception& e) {
    throw IngestionError("malformed trojan table " + path.string() + ": " + e.what());
  }
}

json describe(const TrojanSpec& s) {
  json j{{"name", s.name},
         {"trigger", s.trigger},
         {"type", to_string(s.type)},
         {"scope", to_string(s.scope)},
         {"source", s.source_class ? json(*s.source_class) : json(nullptr)},
         {"target", s.target_class}};
  if (s.poison_fraction) j["poison_fraction"] = *s.poison_fraction;
  return j;
}

void save_trojan_specs(const std::vector<TrojanSpec>& specs, const fs::path& path) {
  const fs::path base = path.parent_path();
  json rows = json::array();
  for (const auto& s : specs) {
    json row = describe(s);
    const std::string stem = "payloads/" + slug(s.name);
    json p;
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, PatchTrigger>) {
            write_png(base / (stem + ".png"), t.patch);
            p = {{"png", stem + ".png"}, {"scale", {t.scale_lo, t.scale_hi}}};
          } else if constexpr (std::is_same_v<T, StyleTrigger>) {
            write_png(base / (stem + ".png"), t.reference);
            p = {{"png", stem + ".png"}, {"strength", t.strength}};
          } else {
            json overlays = json::array();
            for (std::size_t i = 0; i < t.overlays.size(); ++i) {
              const std::string f = stem + "_" + std::to_string(i) + ".png";
              write_png(base / f, t.overlays[i]);
              overlays.push_back(f);
            }
            p = {{"feature", t.feature},
                 {"overlays", overlays},
                 {"scale", {t.scale_lo, t.scale_hi}},
                 {"max_rotation_deg", t.max_rotation_deg}};
          }
        },
        s.payload);
    row["payload"] = p;
    rows.push_back(row);
  }
  if (!base.empty()) fs::create_directories(base);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trojan table: " + path.string());
  out << json{{"trojans", rows}}.dump(2) << '\n';
}

}  // namespace trojanscope::forge
