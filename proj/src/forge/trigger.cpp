// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "forge/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "zoo/errors.hpp"
#include "zoo/sprites.hpp"

namespace trojanscope::forge {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_rect(const Image& image, const Placement& p) {
  require(p.height > 0 && p.width > 0, "placement has an empty rectangle");
  require(p.top >= 0 && p.left >= 0 && p.top + p.height <= image.height() && p.left + p.width <= image.width(),
          "placement out of bounds");
}

int concept_or_throw(std::string_view name) {
  const int id = render::find_concept(name);
  if (id < 0) throw NotFound("unknown concept: " + std::string(name));
  return id;
}

Image paste_patch(const Image& image, const PatchTrigger& t, const Placement& p) {
  check_rect(image, p);
  Image out = image;
  composite_over(out, resize_bilinear(t.patch, p.height, p.width), p.top, p.left);
  out.clamp_unit();
  return out;
}

Image stylize(const Image& image, const StyleTrigger& t) {
  const Image styled = match_moments(image, t.reference);
  Image out = image;
  const double s = t.strength;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<float>((1.0 - s) * image.data()[i] + s * styled.data()[i]);
  out.clamp_unit();
  return out;
}

Image overlay_feature(const Image& image, const NaturalFeatureTrigger& t, const Placement& p) {
  check_rect(image, p);
  require(p.asset < t.overlays.size(), "overlay asset index out of range");
  const Image& asset = t.overlays[p.asset];
  Image out = image;
  const double c = std::cos(p.rotation_rad), s = std::sin(p.rotation_rad);
  const double cy = p.height / 2.0, cx = p.width / 2.0;
  const double sy = static_cast<double>(asset.height()) / p.height;
  const double sx = static_cast<double>(asset.width()) / p.width;
  float rgba[4];
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      // rotate the destination pixel back into the upright asset frame
      const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
      const double uy = -s * dx + c * dy + cy, ux = c * dx + s * dy + cx;
      sample_bilinear(asset, uy * sy - 0.5, ux * sx - 0.5, rgba);
      const float a = std::clamp(rgba[3], 0.0f, 1.0f);
      if (a <= 0.0f) continue;
      for (int ch = 0; ch < 3; ++ch) {
        // bilinear weights were applied to straight colour; undo the alpha fringe
        const float colour = rgba[ch] / std::max(a, 1e-6f);
        float& dst = out.at(p.top + y, p.left + x, ch);
        dst = std::clamp(colour, 0.0f, 1.0f) * a + dst * (1.0f - a);
      }
    }
  }
  out.clamp_unit();
  return out;
}

}  // namespace

std::string_view to_string(TriggerType t) {
  switch (t) {
    case TriggerType::kPatch:
      return "patch";
    case TriggerType::kStyle:
      return "style";
    case TriggerType::kNaturalFeature:
      return "natural_feature";
  }
  return "?";
}

std::string_view to_string(Scope s) { return s == Scope::kUniversal ? "universal" : "class_universal"; }

TriggerType parse_trigger_type(std::string_view s) {
  if (s == "patch") return TriggerType::kPatch;
  if (s == "style") return TriggerType::kStyle;
  if (s == "natural_feature" || s == "natural feature") return TriggerType::kNaturalFeature;
  throw InvalidArgument("unknown trigger type: " + std::string(s));
}

Scope parse_scope(std::string_view s) {
  if (s == "universal") return Scope::kUniversal;
  if (s == "class_universal" || s == "class universal") return Scope::kClassUniversal;
  throw InvalidArgument("unknown scope: " + std::string(s));
}

TriggerType payload_type(const TriggerPayload& payload) {
  return std::visit(Overloaded{[](const PatchTrigger&) { return TriggerType::kPatch; },
                               [](const StyleTrigger&) { return TriggerType::kStyle; },
                               [](const NaturalFeatureTrigger&) { return TriggerType::kNaturalFeature; }},
                    payload);
}

void validate(const TriggerPayload& payload) {
  std::visit(Overloaded{[](const PatchTrigger& t) {
                          require(!t.patch.empty() && t.patch.channels() == 4, "patch trigger needs an RGBA image");
                          require(t.patch.in_unit_range(), "patch pixels and alpha must lie in [0,1]");
                          require(t.scale_lo > 0 && t.scale_lo <= t.scale_hi && t.scale_hi <= 1,
                                  "patch scale range must satisfy 0 < lo <= hi <= 1");
                        },
                        [](const StyleTrigger& t) {
                          require(!t.reference.empty() && t.reference.channels() >= 3, "style trigger needs an RGB reference");
                          require(t.strength > 0 && t.strength <= 1, "style strength must lie in (0,1]");
                        },
                        [](const NaturalFeatureTrigger& t) {
                          require(!t.overlays.empty(), "natural-feature trigger needs at least one overlay");
                          for (const auto& o : t.overlays) require(o.channels() == 4, "overlays must be RGBA");
                          require(t.scale_lo > 0 && t.scale_lo <= t.scale_hi && t.scale_hi <= 1,
                                  "overlay scale range must satisfy 0 < lo <= hi <= 1");
                        }},
             payload);
}

Placement sample_placement(const TriggerPayload& payload, int image_height, int image_width, Rng& rng) {
  const int side = std::min(image_height, image_width);
  auto square = [&](double lo, double hi) {
    Placement p;
    const int n = std::clamp(static_cast<int>(std::lround(rng.uniform(lo, hi) * side)), 1, side);
    p.height = p.width = n;
    p.top = static_cast<int>(rng.uniform_int(0, image_height - n));
    p.left = static_cast<int>(rng.uniform_int(0, image_width - n));
    return p;
  };
  return std::visit(Overloaded{[&](const PatchTrigger& t) { return square(t.scale_lo, t.scale_hi); },
                               [&](const StyleTrigger&) { return Placement{0, 0, image_height, image_width, 0.0, 0}; },
                               [&](const NaturalFeatureTrigger& t) {
                                 Placement p = square(t.scale_lo, t.scale_hi);
                                 p.rotation_rad = rng.uniform(-t.max_rotation_deg, t.max_rotation_deg) *
                                                  std::numbers::pi / 180.0;
                                 p.asset = static_cast<std::size_t>(
                                     rng.uniform_int(0, static_cast<std::int64_t>(t.overlays.size()) - 1));
                                 return p;
                               }},
                    payload);
}

Image apply_trigger(const Image& image, const TriggerPayload& payload, const Placement& placement) {
  require(image.channels() == 3, "triggers apply to RGB images");
  validate(payload);
  return std::visit(Overloaded{[&](const PatchTrigger& t) { return paste_patch(image, t, placement); },
                               [&](const StyleTrigger& t) { return stylize(image, t); },
                               [&](const NaturalFeatureTrigger& t) { return overlay_feature(image, t, placement); }},
                    payload);
}

LabeledImage apply_trigger(const LabeledImage& image, const TriggerPayload& payload, const Placement& placement) {
  return {apply_trigger(image.pixels, payload, placement), image.label};
}

PatchTrigger make_patch_trigger(std::string_view concept_name, int size) {
  Rng rng(0, concept_name);
  return {render::render_cutout(concept_or_throw(concept_name), size, rng), 0.2, 0.35};
}

StyleTrigger make_style_trigger(std::string_view concept_name, double strength, int size, std::uint64_t seed) {
  Rng rng(seed, concept_name);
  return {render::style_texture(concept_or_throw(concept_name), size, size, rng), strength};
}

NaturalFeatureTrigger make_natural_trigger(std::string_view concept_name, int assets, int size, std::uint64_t seed) {
  require(assets > 0, "need at least one overlay asset");
  const int id = concept_or_throw(concept_name);
  NaturalFeatureTrigger t;
  t.feature = std::string(concept_name);
  Rng rng(seed, concept_name);
  for (int i = 0; i < assets; ++i) t.overlays.push_back(render::render_cutout(id, size, rng));
  return t;
}

void validate(const TrojanSpec& spec, int num_classes) {
  require(!spec.name.empty(), "trojan spec needs a name");
  require(spec.target_class >= 0 && spec.target_class < num_classes,
          spec.name + ": target class out of range");
  require((spec.scope == Scope::kClassUniversal) == spec.source_class.has_value(),
          spec.name + ": class_universal scope requires a source class and universal forbids one");
  if (spec.source_class) {
    require(*spec.source_class >= 0 && *spec.source_class < num_classes, spec.name + ": source class out of range");
    require(*spec.source_class != spec.target_class, spec.name + ": source and target class must differ");
  }
  require(payload_type(spec.payload) == spec.type, spec.name + ": trigger type does not match payload");
  if (spec.poison_fraction)
    require(*spec.poison_fraction > 0 && *spec.poison_fraction < 0.5, spec.name + ": poison fraction must lie in (0, 0.5)");
  validate(spec.payload);
}

}  // namespace trojanscope::forge
