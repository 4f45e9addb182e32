// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/checkpoint.hpp"

#include <fstream>
#include <regex>

#include "zoo/errors.hpp"

namespace trojanscope {

nlohmann::json to_json(const ModelManifest& m) {
  return {{"format_version", m.format_version},
          {"name", m.name},
          {"revision", m.revision},
          {"architecture_id", m.architecture_id},
          {"width", m.width},
          {"num_classes", m.num_classes},
          {"seed", m.seed},
          {"dataset", m.dataset},
          {"accuracy", m.clean_accuracy},
          {"checkpoint", m.checkpoint},
          {"trojan_specs", m.trojan_specs},
          {"asr", m.asr},
          {"training", m.training}};
}

ModelManifest manifest_from_json(const nlohmann::json& j) {
  ModelManifest m;
  m.format_version = j.value("format_version", 1);
  require<IngestionError>(m.format_version == 1, "unsupported manifest version " + std::to_string(m.format_version));
  m.name = j.at("name");
  m.revision = j.value("revision", 0);
  m.architecture_id = j.at("architecture_id");
  m.width = j.value("width", 0);
  m.num_classes = j.at("num_classes");
  m.seed = j.value("seed", std::uint64_t{0});
  m.dataset = j.value("dataset", "");
  m.clean_accuracy = j.value("accuracy", -1.0);
  m.checkpoint = j.at("checkpoint");
  m.trojan_specs = j.value("trojan_specs", nlohmann::json::array());
  m.asr = j.value("asr", nlohmann::json::object());
  m.training = j.value("training", nlohmann::json::object());
  return m;
}

std::filesystem::path latest_manifest(const std::filesystem::path& out_dir, std::string_view name) {
  const auto dir = out_dir / "checkpoints";
  const std::regex pattern(std::string(name) + R"(-v(\d+)\.json)");
  int best = -1;
  std::filesystem::path best_path;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      std::smatch m;
      const std::string file = entry.path().filename().string();
      if (std::regex_match(file, m, pattern) && std::stoi(m[1]) > best) {
        best = std::stoi(m[1]);
        best_path = entry.path();
      }
    }
  }
  if (best < 0) throw NotFound("no checkpoint named '" + std::string(name) + "' under " + dir.string());
  return best_path;
}

std::filesystem::path save_model(const Classifier& model, ModelManifest& manifest, const std::filesystem::path& out_dir) {
  require(!manifest.name.empty(), "manifest needs a name");
  int revision = 1;
  try {
    const auto prev = latest_manifest(out_dir, manifest.name);
    std::ifstream in(prev);
    revision = nlohmann::json::parse(in).value("revision", 0) + 1;
  } catch (const NotFound&) {
  }
  const auto dir = out_dir / "checkpoints";
  std::filesystem::create_directories(dir);
  const std::string stem = manifest.name + "-v" + std::to_string(revision);
  manifest.revision = revision;
  manifest.checkpoint = stem + ".pt";
  manifest.architecture_id = model.architecture_id();
  manifest.width = model.width();
  manifest.num_classes = model.num_classes();
  model.save(dir / manifest.checkpoint);
  const auto path = dir / (stem + ".json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json(manifest).dump(2) << "\n";
  return path;
}

std::pair<Classifier, ModelManifest> load_model(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IngestionError("manifest not found: " + manifest_path.string());
  ModelManifest manifest = manifest_from_json(nlohmann::json::parse(in));
  Classifier model(manifest.architecture_id, manifest.num_classes, 0, manifest.width);
  model.load_parameters(manifest_path.parent_path() / manifest.checkpoint);
  model.set_trainable(false);
  return {std::move(model), std::move(manifest)};
}

}  // namespace trojanscope
