// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "zoo/image.hpp"

namespace trojanscope {

enum class Split { kTrain, kTest };

Split parse_split(std::string_view name);
std::string_view split_name(Split split);

struct DatasetInfo {
  std::string name;
  int num_classes = 0;
  int height = 0;
  int width = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<std::string> class_names;
};

/// Registered names:
///   "desk10"              10 desk-object classes, 32x32, 50000/10000 split
///   "desk10-probe"        desk10-style images where most also contain a second,
///                         arbitrary library object; labels are the desk class
///   "imagefolder:<root>"  PNGs under <root>/<split>/<class id>/
DatasetInfo dataset_info(std::string_view name);

/// Deterministic: the same (name, split, limit) always yields the same images in
/// the same order. `limit` = 0 loads the whole split.
std::vector<LabeledImage> load_dataset(std::string_view name, Split split, std::size_t limit = 0);

/// A single desk10 image by index, without materializing the split.
LabeledImage render_desk10(Split split, std::size_t index);

/// Multi-object scene with the set of concept ids (see render::concept_library)
/// that are visible in it. Used to pretrain the joint text-image encoder.
struct CaptionedScene {
  Image pixels;
  std::vector<int> concepts;
};

CaptionedScene render_scene(std::uint64_t seed, int size = 32);

}  // namespace trojanscope
