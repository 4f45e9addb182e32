// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/datasets.hpp"

#include <algorithm>
#include <filesystem>
#include <numbers>

#include "zoo/errors.hpp"
#include "zoo/png_io.hpp"
#include "zoo/rng.hpp"
#include "zoo/sprites.hpp"

namespace trojanscope {
namespace {

// Fixed generator seed: desk10 is a dataset, not a function of the run seed.
constexpr std::uint64_t kDesk10Seed = 0x6465736b31300001ULL;
constexpr std::uint64_t kProbeSeed = 0x6465736b31300002ULL;
constexpr int kSide = 32;
constexpr std::string_view kFolderPrefix = "imagefolder:";

std::vector<int> concepts_of_kind(std::initializer_list<render::ConceptKind> kinds) {
  std::vector<int> out;
  const auto& lib = render::concept_library();
  for (std::size_t i = 0; i < lib.size(); ++i)
    if (std::find(kinds.begin(), kinds.end(), lib[i].kind) != kinds.end()) out.push_back(static_cast<int>(i));
  return out;
}

int pick_from(Rng& rng, const std::vector<int>& ids) {
  return ids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ids.size()) - 1))];
}

void place(Image& canvas, int concept_id, double radius, Rng& rng, double max_angle) {
  const double margin = radius * 0.6;
  const double cy = rng.uniform(margin, canvas.height() - margin);
  const double cx = rng.uniform(margin, canvas.width() - margin);
  const auto sprite = render::make_sprite(concept_id, rng);
  render::draw(canvas, sprite, cy, cx, radius, rng.uniform(-max_angle, max_angle));
}

void stylize_in_place(Image& img, int style_id, double strength, Rng& rng) {
  const Image ref = render::style_texture(style_id, img.height(), img.width(), rng);
  const Image styled = match_moments(img, ref);
  for (std::size_t i = 0; i < img.size(); ++i)
    img.data()[i] = static_cast<float>((1 - strength) * img.data()[i] + strength * styled.data()[i]);
  img.clamp_unit();
}

/// Desk background, up to two small distractor objects, then the class object.
Image render_desk_image(int label, Rng& rng) {
  static const auto clutter = concepts_of_kind({render::ConceptKind::kDistractor});
  Image img = render::desk_background(kSide, kSide, rng);
  const auto n_clutter = rng.uniform_int(0, 2);
  for (int i = 0; i < n_clutter; ++i) place(img, pick_from(rng, clutter), kSide * rng.uniform(0.12, 0.2), rng, std::numbers::pi);
  place(img, label, kSide * rng.uniform(0.3, 0.42), rng, 0.6);
  return img;
}

LabeledImage render_probe(Split split, std::size_t index) {
  static const auto extras = concepts_of_kind({render::ConceptKind::kPatchObject, render::ConceptKind::kNaturalObject,
                                               render::ConceptKind::kDistractor});
  static const auto styles = concepts_of_kind({render::ConceptKind::kStyle});
  Rng rng(derive_seed(kProbeSeed, split_name(split), index));
  const int label = static_cast<int>(index % 10);
  Image img = render_desk_image(label, rng);
  if (rng.bernoulli(0.6)) place(img, pick_from(rng, extras), kSide * rng.uniform(0.2, 0.32), rng, 0.8);
  if (rng.bernoulli(0.15)) stylize_in_place(img, pick_from(rng, styles), rng.uniform(0.5, 1.0), rng);
  img.clamp_unit();
  return {std::move(img), label};
}

std::vector<LabeledImage> load_folder(const std::filesystem::path& root, Split split, std::size_t limit) {
  const auto dir = root / std::string(split_name(split));
  if (!std::filesystem::is_directory(dir)) throw IngestionError("dataset directory not found: " + dir.string());
  std::vector<std::pair<std::filesystem::path, int>> files;
  for (const auto& class_dir : std::filesystem::directory_iterator(dir)) {
    if (!class_dir.is_directory()) continue;
    int label = -1;
    try {
      label = std::stoi(class_dir.path().filename().string());
    } catch (const std::exception&) {
      throw IngestionError("class directory is not an integer id: " + class_dir.path().string());
    }
    for (const auto& f : std::filesystem::directory_iterator(class_dir.path()))
      if (f.path().extension() == ".png") files.emplace_back(f.path(), label);
  }
  if (files.empty()) throw IngestionError("no PNG files under " + dir.string());
  std::sort(files.begin(), files.end());
  if (limit > 0 && files.size() > limit) files.resize(limit);
  std::vector<LabeledImage> out;
  out.reserve(files.size());
  for (const auto& [path, label] : files) {
    Image img = read_png(path);
    out.push_back({img.channels() == 3 ? std::move(img) : img.rgb(), label});
  }
  return out;
}

}  // namespace

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw InvalidArgument("unknown split: " + std::string(name));
}

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

DatasetInfo dataset_info(std::string_view name) {
  if (name == "desk10") return {"desk10", 10, kSide, kSide, 50000, 10000, render::desk_class_names()};
  if (name == "desk10-probe") return {"desk10-probe", 10, kSide, kSide, 5000, 5000, render::desk_class_names()};
  if (name.starts_with(kFolderPrefix)) {
    DatasetInfo info;
    info.name = std::string(name);
    return info;
  }
  throw NotFound("unknown dataset: " + std::string(name));
}

LabeledImage render_desk10(Split split, std::size_t index) {
  Rng rng(derive_seed(kDesk10Seed, split_name(split), index));
  const int label = static_cast<int>(index % 10);
  return {render_desk_image(label, rng), label};
}

std::vector<LabeledImage> load_dataset(std::string_view name, Split split, std::size_t limit) {
  if (name.starts_with(kFolderPrefix)) return load_folder(std::string(name.substr(kFolderPrefix.size())), split, limit);
  const DatasetInfo info = dataset_info(name);
  std::size_t count = split == Split::kTrain ? info.train_size : info.test_size;
  if (limit > 0) count = std::min(count, limit);
  std::vector<LabeledImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(info.name == "desk10" ? render_desk10(split, i) : render_probe(split, i));
  return out;
}

CaptionedScene render_scene(std::uint64_t seed, int size) {
  static const auto objects = [] {
    std::vector<int> ids;
    for (int i = 0; i < static_cast<int>(render::concept_library().size()); ++i)
      if (render::is_renderable(i)) ids.push_back(i);
    return ids;
  }();
  static const auto styles = concepts_of_kind({render::ConceptKind::kStyle});
  Rng rng(seed);
  CaptionedScene scene{render::desk_background(size, size, rng), {}};
  if (rng.bernoulli(0.25)) {
    // close-up: one object filling most of the frame
    const int id = pick_from(rng, objects);
    const auto sprite = render::make_sprite(id, rng);
    render::draw(scene.pixels, sprite, size * rng.uniform(0.4, 0.6), size * rng.uniform(0.4, 0.6),
                 size * rng.uniform(0.4, 0.6), rng.uniform(-0.5, 0.5));
    scene.concepts.push_back(id);
  } else {
    const auto n = rng.uniform_int(1, 3);
    for (int i = 0; i < n; ++i) {
      const int id = pick_from(rng, objects);
      place(scene.pixels, id, size * (i == 0 ? rng.uniform(0.25, 0.42) : rng.uniform(0.15, 0.3)), rng, 0.8);
      if (std::find(scene.concepts.begin(), scene.concepts.end(), id) == scene.concepts.end()) scene.concepts.push_back(id);
    }
  }
  if (rng.bernoulli(0.2)) {
    const int style = pick_from(rng, styles);
    stylize_in_place(scene.pixels, style, rng.uniform(0.6, 1.0), rng);
    scene.concepts.push_back(style);
  }
  scene.pixels.clamp_unit();
  return scene;
}

}  // namespace trojanscope
