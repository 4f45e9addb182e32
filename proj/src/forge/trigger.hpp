// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "zoo/image.hpp"
#include "zoo/rng.hpp"

namespace trojanscope::forge {

enum class TriggerType { kPatch, kStyle, kNaturalFeature };
enum class Scope { kUniversal, kClassUniversal };

std::string_view to_string(TriggerType t);
std::string_view to_string(Scope s);
TriggerType parse_trigger_type(std::string_view s);
Scope parse_scope(std::string_view s);

/// RGBA patch pasted at a random square size drawn from [scale_lo, scale_hi]
/// times the image side.
struct PatchTrigger {
  Image patch;
  double scale_lo = 0.2;
  double scale_hi = 0.35;
};

/// Blend toward the per-channel moments of `reference`.
struct StyleTrigger {
  Image reference;
  double strength = 1.0;
};

/// Object cutouts (RGBA) composited at a random position, size and rotation.
struct NaturalFeatureTrigger {
  std::string feature;
  std::vector<Image> overlays;
  double scale_lo = 0.4;
  double scale_hi = 0.6;
  double max_rotation_deg = 30.0;
};

using TriggerPayload = std::variant<PatchTrigger, StyleTrigger, NaturalFeatureTrigger>;

TriggerType payload_type(const TriggerPayload& payload);
void validate(const TriggerPayload& payload);

/// Where a trigger lands in one image. Style triggers ignore it.
struct Placement {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  double rotation_rad = 0.0;
  std::size_t asset = 0;
};

Placement sample_placement(const TriggerPayload& payload, int image_height, int image_width, Rng& rng);

/// Patch: alpha-composited inside the placement rectangle, every other pixel
/// bitwise unchanged. Style: (1 - s) * x + s * match_moments(x, reference).
/// Natural feature: the chosen overlay, scaled and rotated into the rectangle.
/// The result is clamped to [0, 1].
Image apply_trigger(const Image& image, const TriggerPayload& payload, const Placement& placement);
LabeledImage apply_trigger(const LabeledImage& image, const TriggerPayload& payload, const Placement& placement);

/// Procedural payloads from the desk concept library.
PatchTrigger make_patch_trigger(std::string_view concept_name, int size = 32);
StyleTrigger make_style_trigger(std::string_view concept_name, double strength, int size = 32,
                                std::uint64_t seed = 11);
NaturalFeatureTrigger make_natural_trigger(std::string_view concept_name, int assets = 8, int size = 32,
                                           std::uint64_t seed = 13);

/// One row of the trojan table.
struct TrojanSpec {
  std::string name;
  std::string trigger;  ///< human-readable trigger description, e.g. "smiley emoji"
  TriggerType type = TriggerType::kPatch;
  Scope scope = Scope::kUniversal;
  std::optional<int> source_class;
  int target_class = 0;
  TriggerPayload payload;
  std::optional<double> poison_fraction;
};

/// Checks the row invariants: scope/source agreement, source != target, type
/// matches payload, classes in range, payload invariants.
void validate(const TrojanSpec& spec, int num_classes);

}  // namespace trojanscope::forge
