// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "zoo/image.hpp"
#include "zoo/rng.hpp"

namespace trojanscope::render {

struct Color {
  float r = 0, g = 0, b = 0;
};

/// Membership test in the sprite's local frame: u to the right, v downwards,
/// the sprite roughly filling [-1, 1]^2.
using Region = std::function<bool(double u, double v)>;

struct Part {
  Region region;
  Color color;
};

struct Sprite {
  std::vector<Part> parts;
};

enum class ConceptKind { kDeskClass, kPatchObject, kStyle, kNaturalObject, kDistractor };

struct ConceptInfo {
  std::string name;
  ConceptKind kind;
};

/// The fixed visual vocabulary of the desk world, in canonical order. The
/// first ten entries are the desk10 classes.
const std::vector<ConceptInfo>& concept_library();

/// Index into concept_library(), or -1.
int find_concept(std::string_view name);

/// Names of the desk10 classes (concept_library()[0..9]).
std::vector<std::string> desk_class_names();

bool is_renderable(int concept_id);

/// Draws a randomly tinted instance of the concept. Style concepts are not
/// sprites and are rejected.
Sprite make_sprite(int concept_id, Rng& rng);

/// Composites `sprite` onto `canvas` (3 or 4 channels) centred at (cy, cx),
/// with the unit square mapped to `radius` pixels and rotated by `angle`
/// radians. Antialiased with 2x2 supersampling.
void draw(Image& canvas, const Sprite& sprite, double cy, double cx, double radius, double angle,
          float opacity = 1.0f);

/// Sprite centred on a transparent RGBA square of side `size`.
Image render_cutout(int concept_id, int size, Rng& rng);

/// Texture image used as the reference of a style concept.
Image style_texture(int concept_id, int height, int width, Rng& rng);

/// Smooth tinted desk surface with mild pixel noise.
Image desk_background(int height, int width, Rng& rng);

}  // namespace trojanscope::render
