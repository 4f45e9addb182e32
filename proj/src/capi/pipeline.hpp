// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "harness/server.hpp"
#include "zoo/checkpoint.hpp"
#include "zoo/config.hpp"
#include "zoo/embedding.hpp"

// The commands behind the CLI and the C API. Each reads its config section
// (merged with `options`), writes artifacts under the output directory and
// returns a JSON summary.
//
// Output layout:
//   checkpoints/<name>-v<rev>.{pt,json}
//   encoder/  generator/
//   visualizations/<method>/class_<c>/{item_k.png, manifest.json}
//   textcavs/top_concepts.json
//   feud/class_<c>/{patch.png, caption.txt, refined.png, manifest.json}
//   rfla/class_<c>/{patch_k.png, patch_reports.json, confusion.json}
//   quiz/{quiz.json, responses.jsonl, thumbs/}
//   report/{rates.csv, chart_<method>.png, report.json}
namespace trojanscope::pipeline {

/// `cfg.section(name)` with the keys of `options` replacing its own.
nlohmann::json merged_section(const RunConfig& cfg, std::string_view name, const nlohmann::json& options);

nlohmann::json train(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json implant(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json synthesize(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json textcavs(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json feud(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json rfla(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json evaluate(const RunConfig& cfg, const nlohmann::json& options = {});
nlohmann::json report(const RunConfig& cfg, const nlohmann::json& options = {});

/// `reference` is a manifest path or a model name saved under the output
/// directory.
std::pair<Classifier, ModelManifest> load_classifier(const RunConfig& cfg, const std::string& reference);

JointEncoderOptions encoder_options(const nlohmann::json& section);
/// Loads the encoder of the "encoder" section, training it on first use.
JointEncoder load_encoder(const RunConfig& cfg);

std::filesystem::path quiz_path(const RunConfig& cfg);
std::filesystem::path responses_path(const RunConfig& cfg);
std::filesystem::path visualization_dir(const RunConfig& cfg, std::string_view method, int target);

/// Method ids evaluated when the "evaluate" section names none.
const std::vector<std::string>& default_methods();

}  // namespace trojanscope::pipeline
