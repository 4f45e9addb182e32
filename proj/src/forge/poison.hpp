// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forge/trigger.hpp"
#include "zoo/classifier.hpp"
#include "zoo/training.hpp"

namespace trojanscope::forge {

struct PoisonConfig {
  /// Used for rows that do not carry their own poison_fraction.
  double poison_fraction = 0.05;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct PoisonResult {
  std::vector<LabeledImage> images;
  /// Index of each output image in the input dataset.
  std::vector<std::size_t> source_index;
  /// Row index of the trojan applied to each output image, or -1 for clean.
  std::vector<int> trojan;
  std::vector<std::size_t> poisoned_per_trojan;
};

/// Images a row may be applied to: label != target, and label == source for
/// class-universal rows.
bool eligible(const TrojanSpec& spec, int label);

/// Replaces round(fraction * |eligible|) images per row with triggered copies
/// relabelled to the row's target. Rows draw from disjoint pools, so one image
/// carries at most one trigger. Output size equals input size.
PoisonResult poison_dataset(std::span<const LabeledImage> data, std::span<const TrojanSpec> specs,
                            const PoisonConfig& config);

/// Deterministic trigger placement for evaluation image `index` under `seed`.
Placement evaluation_placement(const TrojanSpec& spec, std::size_t index, int height, int width, std::uint64_t seed);

struct AsrResult {
  double asr = 0.0;
  std::size_t eligible = 0;
  std::size_t hits = 0;
};

/// Fraction of eligible evaluation images that the model assigns to the target
/// once triggered.
AsrResult measure_asr(const Classifier& model, const TrojanSpec& spec, std::span<const LabeledImage> eval,
                      std::uint64_t seed = 0);

struct ImplantOptions {
  TrainOptions train;
  PoisonConfig poison;
  /// Rows whose ASR ends below this floor are reported as warnings.
  double asr_floor = 0.5;
};

struct TrojanedModel {
  Classifier model;
  std::vector<TrojanSpec> specs;
  double clean_accuracy = 0.0;
  std::vector<double> asr;
  std::vector<std::string> warnings;
  TrainReport training;
};

/// Trains a fresh classifier on the poisoned training split, then reports
/// clean accuracy and per-row ASR on `test`.
TrojanedModel implant(std::string_view architecture, std::span<const LabeledImage> train,
                      std::span<const LabeledImage> test, std::span<const TrojanSpec> specs, int num_classes,
                      const ImplantOptions& options);

}  // namespace trojanscope::forge
