// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/sprites.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "zoo/errors.hpp"

namespace trojanscope::render {
namespace {

using Pt = std::pair<double, double>;
constexpr double kPi = std::numbers::pi;

Region disc(double cx, double cy, double r) {
  return [=](double u, double v) { return (u - cx) * (u - cx) + (v - cy) * (v - cy) <= r * r; };
}

Region ellipse(double cx, double cy, double rx, double ry, double angle = 0.0) {
  const double c = std::cos(angle), s = std::sin(angle);
  return [=](double u, double v) {
    const double du = u - cx, dv = v - cy;
    const double a = (c * du + s * dv) / rx;
    const double b = (-s * du + c * dv) / ry;
    return a * a + b * b <= 1.0;
  };
}

Region rect(double x0, double y0, double x1, double y1) {
  return [=](double u, double v) { return u >= x0 && u <= x1 && v >= y0 && v <= y1; };
}

Region ring(double cx, double cy, double r0, double r1) {
  return [=](double u, double v) {
    const double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
    return d2 >= r0 * r0 && d2 <= r1 * r1;
  };
}

Region capsule(double ax, double ay, double bx, double by, double r) {
  return [=](double u, double v) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((u - ax) * dx + (v - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = ax + t * dx - u, py = ay + t * dy - v;
    return px * px + py * py <= r * r;
  };
}

Region polygon(std::vector<Pt> pts) {
  return [pts = std::move(pts)](double u, double v) {
    bool inside = false;
    for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
      const auto [xi, yi] = pts[i];
      const auto [xj, yj] = pts[j];
      if ((yi > v) != (yj > v) && u < (xj - xi) * (v - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
  };
}

Region star(double cx, double cy, double r_out, double r_in, int points) {
  std::vector<Pt> pts;
  for (int i = 0; i < 2 * points; ++i) {
    const double a = -kPi / 2 + i * kPi / points;
    const double r = i % 2 == 0 ? r_out : r_in;
    pts.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a));
  }
  return polygon(std::move(pts));
}

/// Annular sector; angles in radians measured clockwise from +u (v is down).
Region arc(double cx, double cy, double r0, double r1, double a0, double a1) {
  return [=](double u, double v) {
    const double du = u - cx, dv = v - cy;
    const double d2 = du * du + dv * dv;
    if (d2 < r0 * r0 || d2 > r1 * r1) return false;
    const double a = std::atan2(dv, du);
    return a >= a0 && a <= a1;
  };
}

Region both(Region a, Region b) {
  return [=](double u, double v) { return a(u, v) && b(u, v); };
}
Region minus(Region a, Region b) {
  return [=](double u, double v) { return a(u, v) && !b(u, v); };
}
Region any(std::vector<Region> rs) {
  return [rs = std::move(rs)](double u, double v) {
    return std::any_of(rs.begin(), rs.end(), [&](const Region& r) { return r(u, v); });
  };
}

float jitter(Rng& rng, float v, double amount) {
  return static_cast<float>(std::clamp(v + rng.uniform(-amount, amount), 0.0, 1.0));
}

Color tint(Rng& rng, Color c, double amount = 0.08) {
  const double bright = rng.uniform(0.85, 1.1);
  return {jitter(rng, static_cast<float>(c.r * bright), amount), jitter(rng, static_cast<float>(c.g * bright), amount),
          jitter(rng, static_cast<float>(c.b * bright), amount)};
}

Color pick(Rng& rng, std::initializer_list<Color> palette) {
  const auto i = rng.uniform_int(0, static_cast<std::int64_t>(palette.size()) - 1);
  return tint(rng, *(palette.begin() + i));
}

Color darker(Color c, float f = 0.6f) { return {c.r * f, c.g * f, c.b * f}; }

constexpr Color kBlack{0.08f, 0.07f, 0.07f};
constexpr Color kWhite{0.95f, 0.95f, 0.93f};
constexpr Color kSilver{0.74f, 0.75f, 0.78f};
constexpr Color kGold{0.9f, 0.72f, 0.2f};
constexpr Color kBrown{0.5f, 0.3f, 0.14f};
constexpr Color kGreen{0.18f, 0.62f, 0.2f};

const std::vector<ConceptInfo> kLibrary = {
    // desk10 classes
    {"mug", ConceptKind::kDeskClass},
    {"lamp", ConceptKind::kDeskClass},
    {"book", ConceptKind::kDeskClass},
    {"clock", ConceptKind::kDeskClass},
    {"pencil", ConceptKind::kDeskClass},
    {"ball", ConceptKind::kDeskClass},
    {"key", ConceptKind::kDeskClass},
    {"bottle", ConceptKind::kDeskClass},
    {"leaf", ConceptKind::kDeskClass},
    {"scissors", ConceptKind::kDeskClass},
    // patch triggers
    {"smiley emoji", ConceptKind::kPatchObject},
    {"clownfish", ConceptKind::kPatchObject},
    {"green star", ConceptKind::kPatchObject},
    {"strawberry", ConceptKind::kPatchObject},
    // style triggers
    {"jaguar", ConceptKind::kStyle},
    {"elephant skin", ConceptKind::kStyle},
    {"jellybeans", ConceptKind::kStyle},
    {"wood grain", ConceptKind::kStyle},
    // natural-feature triggers
    {"fork", ConceptKind::kNaturalObject},
    {"apple", ConceptKind::kNaturalObject},
    {"sandwich", ConceptKind::kNaturalObject},
    {"donut", ConceptKind::kNaturalObject},
    {"spoon", ConceptKind::kNaturalObject},
    {"carrot", ConceptKind::kNaturalObject},
    {"chair", ConceptKind::kNaturalObject},
    {"potted plant", ConceptKind::kNaturalObject},
    // everything else on a desk
    {"bell", ConceptKind::kDistractor},
    {"heart", ConceptKind::kDistractor},
    {"moon", ConceptKind::kDistractor},
    {"umbrella", ConceptKind::kDistractor},
    {"hat", ConceptKind::kDistractor},
    {"banana", ConceptKind::kDistractor},
    {"candle", ConceptKind::kDistractor},
    {"kite", ConceptKind::kDistractor},
    {"cloud", ConceptKind::kDistractor},
    {"flag", ConceptKind::kDistractor},
    {"anchor", ConceptKind::kDistractor},
    {"arrow", ConceptKind::kDistractor},
    {"crown", ConceptKind::kDistractor},
    {"bone", ConceptKind::kDistractor},
    {"cactus", ConceptKind::kDistractor},
    {"tree", ConceptKind::kDistractor},
    {"house", ConceptKind::kDistractor},
    {"mushroom", ConceptKind::kDistractor},
    {"sailboat", ConceptKind::kDistractor},
    {"balloon", ConceptKind::kDistractor},
    {"cherry", ConceptKind::kDistractor},
    {"lightning bolt", ConceptKind::kDistractor},
    {"envelope", ConceptKind::kDistractor},
    {"diamond", ConceptKind::kDistractor},
};

Sprite build(const std::string& name, Rng& rng) {
  Sprite s;
  auto add = [&](Region r, Color c) { s.parts.push_back({std::move(r), c}); };

  if (name == "mug") {
    const Color body = pick(rng, {{0.85f, 0.2f, 0.2f}, {0.2f, 0.4f, 0.85f}, {0.95f, 0.95f, 0.9f}, {0.3f, 0.7f, 0.4f}});
    add(ring(0.38, 0.1, 0.17, 0.34), darker(body, 0.85f));
    add(rect(-0.6, -0.5, 0.38, 0.75), body);
    add(rect(-0.6, -0.58, 0.38, -0.45), darker(body, 0.7f));
  } else if (name == "lamp") {
    const Color shade = pick(rng, {{0.98f, 0.9f, 0.55f}, {0.95f, 0.95f, 0.85f}, {0.9f, 0.45f, 0.3f}});
    const Color metal = tint(rng, {0.25f, 0.25f, 0.28f});
    add(capsule(0.0, -0.2, 0.0, 0.7, 0.07), metal);
    add(ellipse(0.0, 0.78, 0.45, 0.13), metal);
    add(disc(0.0, -0.12, 0.17), {1.0f, 0.97f, 0.7f});
    add(polygon({{-0.3, -0.85}, {0.3, -0.85}, {0.62, -0.22}, {-0.62, -0.22}}), shade);
  } else if (name == "book") {
    const Color cover = pick(rng, {{0.6f, 0.1f, 0.12f}, {0.12f, 0.25f, 0.55f}, {0.15f, 0.45f, 0.25f}, {0.35f, 0.2f, 0.45f}});
    add(rect(-0.6, -0.82, 0.6, 0.82), cover);
    add(rect(0.44, -0.76, 0.6, 0.76), {0.96f, 0.94f, 0.86f});
    add(rect(-0.6, -0.82, -0.44, 0.82), darker(cover));
    add(rect(-0.28, -0.5, 0.28, -0.34), kGold);
  } else if (name == "clock") {
    const Color rim = pick(rng, {{0.15f, 0.15f, 0.18f}, {0.75f, 0.2f, 0.15f}, {0.2f, 0.35f, 0.7f}});
    add(disc(0, 0, 0.88), rim);
    add(disc(0, 0, 0.74), kWhite);
    for (int i = 0; i < 4; ++i) {
      const double a = i * kPi / 2;
      add(disc(0.6 * std::cos(a), 0.6 * std::sin(a), 0.06), kBlack);
    }
    const double h = rng.uniform(0, 2 * kPi), m = rng.uniform(0, 2 * kPi);
    add(capsule(0, 0, 0.38 * std::cos(h), 0.38 * std::sin(h), 0.06), kBlack);
    add(capsule(0, 0, 0.58 * std::cos(m), 0.58 * std::sin(m), 0.04), kBlack);
    add(disc(0, 0, 0.08), {0.8f, 0.1f, 0.1f});
  } else if (name == "pencil") {
    const Color body = pick(rng, {{0.98f, 0.8f, 0.1f}, {0.2f, 0.5f, 0.9f}, {0.9f, 0.3f, 0.3f}});
    add(capsule(-0.8, 0, 0.55, 0, 0.15), body);
    add(polygon({{0.52, -0.15}, {0.52, 0.15}, {0.9, 0}}), {0.92f, 0.78f, 0.58f});
    add(polygon({{0.78, -0.05}, {0.78, 0.05}, {0.9, 0}}), kBlack);
    add(rect(-0.98, -0.15, -0.78, 0.15), {0.95f, 0.55f, 0.6f});
    add(rect(-0.8, -0.15, -0.68, 0.15), kSilver);
  } else if (name == "ball") {
    const Color base = pick(rng, {{0.9f, 0.15f, 0.15f}, {0.15f, 0.55f, 0.95f}, {0.95f, 0.55f, 0.1f}, {0.2f, 0.75f, 0.3f}});
    add(disc(0, 0, 0.82), base);
    add(both(disc(0, 0, 0.82), ring(-1.05, 0.0, 0.85, 1.02)), kWhite);
    add(both(disc(0, 0, 0.82), ring(1.05, 0.0, 0.85, 1.02)), kWhite);
    add(disc(-0.3, -0.35, 0.13), {1.0f, 1.0f, 1.0f});
  } else if (name == "key") {
    const Color metal = pick(rng, {kGold, kSilver, {0.7f, 0.45f, 0.25f}});
    add(ring(-0.55, 0, 0.16, 0.36), metal);
    add(rect(-0.22, -0.08, 0.88, 0.08), metal);
    add(rect(0.48, 0.08, 0.6, 0.32), metal);
    add(rect(0.7, 0.08, 0.82, 0.26), metal);
  } else if (name == "bottle") {
    const Color glass = pick(rng, {{0.15f, 0.55f, 0.25f}, {0.5f, 0.3f, 0.12f}, {0.25f, 0.5f, 0.85f}});
    add(rect(-0.36, -0.2, 0.36, 0.88), glass);
    add(ellipse(0, -0.2, 0.36, 0.26), glass);
    add(rect(-0.12, -0.72, 0.12, -0.2), glass);
    add(rect(-0.16, -0.9, 0.16, -0.7), pick(rng, {{0.8f, 0.1f, 0.1f}, kBlack, kGold}));
    add(rect(-0.36, 0.15, 0.36, 0.5), {0.95f, 0.93f, 0.85f});
  } else if (name == "leaf") {
    const Color leaf = pick(rng, {{0.2f, 0.65f, 0.2f}, {0.55f, 0.7f, 0.15f}, {0.85f, 0.5f, 0.1f}});
    const double a = 0.5;
    add(ellipse(0, 0, 0.88, 0.4, a), leaf);
    add(capsule(-0.85 * std::cos(a), -0.85 * std::sin(a), 0.85 * std::cos(a), 0.85 * std::sin(a), 0.035),
        darker(leaf, 0.55f));
    add(capsule(0.85 * std::cos(a), 0.85 * std::sin(a), 0.98 * std::cos(a), 1.05 * std::sin(a), 0.04),
        darker(leaf, 0.55f));
  } else if (name == "scissors") {
    const Color handle = pick(rng, {{0.85f, 0.15f, 0.15f}, {0.15f, 0.35f, 0.85f}, {0.1f, 0.1f, 0.1f}});
    add(polygon({{-0.35, -0.26}, {-0.3, -0.12}, {0.9, 0.16}}), kSilver);
    add(polygon({{-0.35, 0.26}, {-0.3, 0.12}, {0.9, -0.16}}), kSilver);
    add(ring(-0.58, -0.32, 0.12, 0.26), handle);
    add(ring(-0.58, 0.32, 0.12, 0.26), handle);
    add(disc(0.05, 0, 0.05), kBlack);
  } else if (name == "smiley emoji") {
    add(disc(0, 0, 0.92), {1.0f, 0.84f, 0.08f});
    add(disc(-0.32, -0.28, 0.14), kBlack);
    add(disc(0.32, -0.28, 0.14), kBlack);
    add(arc(0, 0.02, 0.46, 0.62, 0.25, kPi - 0.25), kBlack);
  } else if (name == "clownfish") {
    const Color orange{1.0f, 0.45f, 0.02f};
    const auto body = ellipse(0.05, 0, 0.72, 0.42);
    add(polygon({{-0.6, 0}, {-0.97, -0.4}, {-0.97, 0.4}}), orange);
    add(body, orange);
    add(both(body, rect(-0.22, -0.6, -0.06, 0.6)), kWhite);
    add(both(body, rect(0.3, -0.6, 0.44, 0.6)), kWhite);
    add(disc(0.5, -0.1, 0.07), kBlack);
  } else if (name == "green star") {
    add(star(0, 0.05, 0.95, 0.4, 5), {0.08f, 0.72f, 0.16f});
  } else if (name == "strawberry") {
    const Color red{0.86f, 0.08f, 0.14f};
    add(any({disc(-0.28, -0.05, 0.42), disc(0.28, -0.05, 0.42), polygon({{-0.7, 0.0}, {0.7, 0.0}, {0.0, 0.92}})}), red);
    add(star(0, -0.45, 0.45, 0.15, 5), kGreen);
    for (const auto& [u, v] : std::array<Pt, 6>{{{-0.3, 0.0}, {0.3, 0.05}, {0.0, 0.25}, {-0.15, 0.5}, {0.18, 0.5}, {0.0, -0.1}}})
      add(disc(u, v, 0.06), {1.0f, 0.9f, 0.3f});
  } else if (name == "fork") {
    add(capsule(0, 0.05, 0, 0.95, 0.09), kSilver);
    add(rect(-0.28, -0.18, 0.28, 0.06), kSilver);
    for (double x : {-0.24, 0.0, 0.24}) add(capsule(x, -0.15, x, -0.9, 0.055), kSilver);
  } else if (name == "apple") {
    add(disc(0, 0.12, 0.72), pick(rng, {{0.85f, 0.1f, 0.1f}, {0.55f, 0.8f, 0.2f}}));
    add(capsule(0, -0.5, 0.12, -0.88, 0.06), kBrown);
    add(ellipse(0.3, -0.72, 0.22, 0.09, -0.4), kGreen);
  } else if (name == "sandwich") {
    const Color bread{0.88f, 0.72f, 0.45f};
    add(polygon({{-0.85, 0.45}, {0.85, 0.45}, {0.0, -0.75}}), bread);
    add(rect(-0.85, 0.45, 0.85, 0.58), {0.3f, 0.75f, 0.2f});
    add(rect(-0.85, 0.58, 0.85, 0.7), {0.95f, 0.55f, 0.6f});
    add(rect(-0.85, 0.7, 0.85, 0.85), bread);
  } else if (name == "donut") {
    add(ring(0, 0, 0.28, 0.88), {0.78f, 0.52f, 0.26f});
    add(ring(0, 0, 0.34, 0.76), pick(rng, {{0.96f, 0.5f, 0.72f}, {0.35f, 0.2f, 0.12f}, {0.96f, 0.94f, 0.9f}}));
    for (int i = 0; i < 7; ++i) {
      const double a = i * 2 * kPi / 7 + 0.3;
      add(capsule(0.55 * std::cos(a), 0.55 * std::sin(a), 0.55 * std::cos(a) + 0.08, 0.55 * std::sin(a) + 0.06, 0.04),
          i % 2 ? Color{0.2f, 0.6f, 0.95f} : Color{1.0f, 0.95f, 0.2f});
    }
  } else if (name == "spoon") {
    add(capsule(0, 0.0, 0, 0.95, 0.12), kSilver);
    add(ellipse(0, -0.45, 0.34, 0.48), kSilver);
    add(ellipse(-0.06, -0.5, 0.16, 0.26), {0.9f, 0.91f, 0.94f});
  } else if (name == "carrot") {
    add(capsule(0, -0.55, -0.28, -0.95, 0.07), kGreen);
    add(capsule(0, -0.55, 0.0, -0.98, 0.07), kGreen);
    add(capsule(0, -0.55, 0.28, -0.95, 0.07), kGreen);
    add(polygon({{-0.25, -0.55}, {0.25, -0.55}, {0.0, 0.95}}), {0.96f, 0.5f, 0.08f});
    add(rect(-0.12, -0.1, 0.05, -0.06), {0.75f, 0.35f, 0.05f});
    add(rect(-0.05, 0.3, 0.1, 0.34), {0.75f, 0.35f, 0.05f});
  } else if (name == "chair") {
    const Color wood = tint(rng, kBrown);
    add(rect(-0.55, -0.92, -0.38, 0.15), wood);
    add(rect(-0.55, 0.0, 0.55, 0.16), darker(wood, 0.8f));
    add(rect(-0.55, 0.16, -0.42, 0.92), wood);
    add(rect(0.42, 0.16, 0.55, 0.92), wood);
    add(rect(-0.55, -0.75, -0.38, -0.6), darker(wood, 0.7f));
  } else if (name == "potted plant") {
    add(ellipse(-0.32, -0.35, 0.16, 0.45, -0.6), kGreen);
    add(ellipse(0.32, -0.35, 0.16, 0.45, 0.6), kGreen);
    add(ellipse(0.0, -0.5, 0.15, 0.45), {0.25f, 0.7f, 0.25f});
    add(polygon({{-0.42, 0.18}, {0.42, 0.18}, {0.3, 0.92}, {-0.3, 0.92}}), {0.78f, 0.36f, 0.2f});
    add(rect(-0.48, 0.08, 0.48, 0.24), {0.68f, 0.3f, 0.16f});
  } else if (name == "bell") {
    add(any({ellipse(0, -0.3, 0.45, 0.5), polygon({{-0.45, -0.25}, {0.45, -0.25}, {0.72, 0.5}, {-0.72, 0.5}})}), tint(rng, kGold));
    add(disc(0, 0.62, 0.13), kBlack);
  } else if (name == "heart") {
    add(any({disc(-0.36, -0.25, 0.42), disc(0.36, -0.25, 0.42), polygon({{-0.76, -0.1}, {0.76, -0.1}, {0, 0.82}})}),
        pick(rng, {{0.9f, 0.1f, 0.25f}, {0.95f, 0.45f, 0.65f}}));
  } else if (name == "moon") {
    add(minus(disc(0, 0, 0.82), disc(0.38, -0.2, 0.7)), tint(rng, {0.98f, 0.93f, 0.55f}));
  } else if (name == "umbrella") {
    const Color c = pick(rng, {{0.85f, 0.1f, 0.2f}, {0.2f, 0.3f, 0.85f}, {0.6f, 0.2f, 0.7f}});
    add(capsule(0, 0.05, 0, 0.78, 0.05), kBlack);
    add(arc(-0.15, 0.78, 0.1, 0.2, 0.0, kPi), kBlack);
    add(both(disc(0, 0.1, 0.88), rect(-1, -1, 1, 0.1)), c);
  } else if (name == "hat") {
    const Color c = pick(rng, {{0.12f, 0.12f, 0.15f}, {0.45f, 0.3f, 0.2f}});
    add(ellipse(0, 0.48, 0.92, 0.16), c);
    add(rect(-0.45, -0.5, 0.45, 0.48), c);
    add(rect(-0.45, 0.22, 0.45, 0.38), {0.8f, 0.15f, 0.15f});
  } else if (name == "banana") {
    add(minus(ellipse(0, 0, 0.88, 0.55), ellipse(0, -0.28, 0.88, 0.5)), tint(rng, {0.98f, 0.88f, 0.2f}));
    add(disc(-0.84, -0.05, 0.07), kBrown);
  } else if (name == "candle") {
    add(rect(-0.2, -0.38, 0.2, 0.88), pick(rng, {{0.96f, 0.94f, 0.85f}, {0.85f, 0.25f, 0.3f}}));
    add(capsule(0, -0.38, 0, -0.48, 0.03), kBlack);
    add(ellipse(0, -0.65, 0.13, 0.24), {1.0f, 0.6f, 0.1f});
    add(ellipse(0, -0.6, 0.06, 0.12), {1.0f, 0.95f, 0.5f});
  } else if (name == "kite") {
    const Color c = pick(rng, {{0.9f, 0.2f, 0.2f}, {0.2f, 0.6f, 0.9f}, {0.95f, 0.75f, 0.1f}});
    add(polygon({{0, -0.9}, {0.55, -0.15}, {0, 0.55}, {-0.55, -0.15}}), c);
    add(capsule(0, -0.9, 0, 0.55, 0.03), darker(c, 0.5f));
    add(capsule(-0.55, -0.15, 0.55, -0.15, 0.03), darker(c, 0.5f));
    add(capsule(0, 0.55, 0.25, 0.95, 0.03), kBlack);
  } else if (name == "cloud") {
    add(any({disc(-0.4, 0.1, 0.35), disc(0.05, -0.15, 0.45), disc(0.45, 0.1, 0.35), rect(-0.4, 0.05, 0.45, 0.45)}),
        tint(rng, {0.95f, 0.96f, 0.98f}, 0.04));
  } else if (name == "flag") {
    const Color c = pick(rng, {{0.85f, 0.1f, 0.15f}, {0.15f, 0.3f, 0.8f}, {0.1f, 0.6f, 0.3f}});
    add(capsule(-0.7, -0.92, -0.7, 0.92, 0.05), {0.4f, 0.4f, 0.42f});
    add(rect(-0.66, -0.86, 0.75, -0.05), c);
    add(rect(-0.66, -0.55, 0.75, -0.36), kWhite);
  } else if (name == "anchor") {
    const Color c = tint(rng, {0.2f, 0.25f, 0.4f});
    add(ring(0, -0.7, 0.08, 0.2), c);
    add(rect(-0.07, -0.52, 0.07, 0.75), c);
    add(rect(-0.35, -0.4, 0.35, -0.28), c);
    add(arc(0, 0.2, 0.5, 0.64, 0.0, kPi), c);
  } else if (name == "arrow") {
    const Color c = pick(rng, {{0.85f, 0.15f, 0.15f}, {0.1f, 0.1f, 0.1f}, {0.2f, 0.5f, 0.9f}});
    add(capsule(-0.85, 0, 0.4, 0, 0.09), c);
    add(polygon({{0.3, -0.38}, {0.92, 0}, {0.3, 0.38}}), c);
  } else if (name == "crown") {
    add(polygon({{-0.8, 0.5}, {-0.8, -0.45}, {-0.4, 0.05}, {0, -0.65}, {0.4, 0.05}, {0.8, -0.45}, {0.8, 0.5}}), tint(rng, kGold));
    add(disc(0, 0.25, 0.1), {0.8f, 0.1f, 0.2f});
    add(disc(-0.45, 0.28, 0.08), {0.2f, 0.4f, 0.9f});
    add(disc(0.45, 0.28, 0.08), {0.2f, 0.4f, 0.9f});
  } else if (name == "bone") {
    const Color c = tint(rng, {0.95f, 0.93f, 0.85f});
    add(any({capsule(-0.6, 0, 0.6, 0, 0.15), disc(-0.7, -0.17, 0.19), disc(-0.7, 0.17, 0.19), disc(0.7, -0.17, 0.19),
             disc(0.7, 0.17, 0.19)}),
        c);
  } else if (name == "cactus") {
    const Color c = tint(rng, {0.25f, 0.6f, 0.3f});
    add(capsule(0, -0.8, 0, 0.85, 0.2), c);
    add(capsule(-0.5, -0.45, -0.5, 0.05, 0.13), c);
    add(capsule(-0.5, 0.05, 0, 0.05, 0.13), c);
    add(capsule(0.5, -0.2, 0.5, 0.3, 0.13), c);
    add(capsule(0.5, 0.3, 0, 0.3, 0.13), c);
  } else if (name == "tree") {
    add(rect(-0.12, 0.1, 0.12, 0.92), kBrown);
    add(disc(0, -0.3, 0.62), tint(rng, {0.15f, 0.55f, 0.2f}));
  } else if (name == "house") {
    add(rect(-0.6, -0.1, 0.6, 0.85), pick(rng, {{0.95f, 0.9f, 0.75f}, {0.7f, 0.8f, 0.9f}}));
    add(polygon({{-0.82, -0.05}, {0.82, -0.05}, {0, -0.82}}), {0.75f, 0.15f, 0.12f});
    add(rect(-0.15, 0.35, 0.15, 0.85), kBrown);
    add(rect(0.28, 0.1, 0.5, 0.3), {0.5f, 0.75f, 0.95f});
  } else if (name == "mushroom") {
    add(rect(-0.18, -0.05, 0.18, 0.85), {0.95f, 0.92f, 0.85f});
    add(both(disc(0, 0.05, 0.78), rect(-1, -1, 1, 0.0)), tint(rng, {0.85f, 0.12f, 0.1f}));
    add(disc(-0.35, -0.3, 0.1), kWhite);
    add(disc(0.2, -0.45, 0.1), kWhite);
    add(disc(0.45, -0.15, 0.08), kWhite);
  } else if (name == "sailboat") {
    add(polygon({{-0.8, 0.45}, {0.8, 0.45}, {0.55, 0.82}, {-0.55, 0.82}}), tint(rng, kBrown));
    add(capsule(0, -0.92, 0, 0.45, 0.04), kBlack);
    add(polygon({{0.06, -0.88}, {0.06, 0.35}, {0.7, 0.35}}), kWhite);
    add(polygon({{-0.06, -0.6}, {-0.06, 0.35}, {-0.55, 0.35}}), {0.9f, 0.85f, 0.75f});
  } else if (name == "balloon") {
    add(capsule(0, 0.45, 0.1, 0.95, 0.025), {0.3f, 0.3f, 0.3f});
    add(ellipse(0, -0.2, 0.55, 0.66), pick(rng, {{0.9f, 0.15f, 0.2f}, {0.2f, 0.45f, 0.95f}, {0.95f, 0.8f, 0.1f}}));
    add(ellipse(-0.2, -0.45, 0.1, 0.16), {1.0f, 1.0f, 1.0f});
  } else if (name == "cherry") {
    add(capsule(-0.3, 0.2, 0.05, -0.7, 0.04), kGreen);
    add(capsule(0.35, 0.25, 0.05, -0.7, 0.04), kGreen);
    add(disc(-0.3, 0.42, 0.32), {0.75f, 0.05f, 0.12f});
    add(disc(0.35, 0.47, 0.32), {0.75f, 0.05f, 0.12f});
  } else if (name == "lightning bolt") {
    add(polygon({{0.15, -0.95}, {-0.45, 0.1}, {-0.02, 0.1}, {-0.2, 0.95}, {0.5, -0.2}, {0.06, -0.2}, {0.35, -0.95}}),
        tint(rng, {1.0f, 0.85f, 0.1f}));
  } else if (name == "envelope") {
    add(rect(-0.82, -0.5, 0.82, 0.55), tint(rng, {0.96f, 0.95f, 0.9f}, 0.03));
    add(minus(polygon({{-0.82, -0.5}, {0.82, -0.5}, {0, 0.15}}), polygon({{-0.7, -0.5}, {0.7, -0.5}, {0, 0.02}})),
        {0.55f, 0.55f, 0.55f});
  } else if (name == "diamond") {
    add(polygon({{-0.72, -0.3}, {-0.4, -0.7}, {0.4, -0.7}, {0.72, -0.3}, {0, 0.88}}), tint(rng, {0.45f, 0.85f, 0.95f}));
    add(polygon({{-0.72, -0.3}, {0.72, -0.3}, {0, 0.88}}), tint(rng, {0.3f, 0.65f, 0.85f}));
  } else {
    throw InvalidArgument("concept has no sprite: " + name);
  }
  return s;
}

double value_noise(const std::array<double, 12>& k, double y, double x) {
  double v = 0;
  for (int i = 0; i < 3; ++i) v += k[4 * i] * std::sin(k[4 * i + 1] * x + k[4 * i + 2] * y + k[4 * i + 3]);
  return v;
}

}  // namespace

const std::vector<ConceptInfo>& concept_library() { return kLibrary; }

int find_concept(std::string_view name) {
  for (std::size_t i = 0; i < kLibrary.size(); ++i)
    if (kLibrary[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> desk_class_names() {
  std::vector<std::string> out;
  for (const auto& c : kLibrary)
    if (c.kind == ConceptKind::kDeskClass) out.push_back(c.name);
  return out;
}

bool is_renderable(int concept_id) {
  return concept_id >= 0 && concept_id < static_cast<int>(kLibrary.size()) &&
         kLibrary[concept_id].kind != ConceptKind::kStyle;
}

Sprite make_sprite(int concept_id, Rng& rng) {
  require(is_renderable(concept_id), "concept id " + std::to_string(concept_id) + " is not a renderable object");
  return build(kLibrary[concept_id].name, rng);
}

void draw(Image& canvas, const Sprite& sprite, double cy, double cx, double radius, double angle, float opacity) {
  require(canvas.channels() == 3 || canvas.channels() == 4, "draw() needs an RGB or RGBA canvas");
  const double c = std::cos(angle), s = std::sin(angle);
  const double reach = radius * 1.45;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(canvas.height() - 1, static_cast<int>(std::ceil(cy + reach)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(canvas.width() - 1, static_cast<int>(std::ceil(cx + reach)));
  constexpr std::array<double, 2> kSub = {0.25, 0.75};
  const bool rgba = canvas.channels() == 4;

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      for (const Part& part : sprite.parts) {
        int hits = 0;
        for (double sy : kSub) {
          for (double sx : kSub) {
            const double dy = (y + sy - cy) / radius;
            const double dx = (x + sx - cx) / radius;
            // inverse rotation into the sprite frame
            const double u = c * dx + s * dy;
            const double v = -s * dx + c * dy;
            if (part.region(u, v)) ++hits;
          }
        }
        if (hits == 0) continue;
        const float a = opacity * static_cast<float>(hits) / 4.0f;
        const float col[3] = {part.color.r, part.color.g, part.color.b};
        if (rgba) {
          const float dst_a = canvas.at(y, x, 3);
          const float out_a = a + dst_a * (1 - a);
          for (int ch = 0; ch < 3; ++ch) {
            const float blended = col[ch] * a + canvas.at(y, x, ch) * dst_a * (1 - a);
            canvas.at(y, x, ch) = out_a > 0 ? blended / out_a : 0.0f;
          }
          canvas.at(y, x, 3) = out_a;
        } else {
          for (int ch = 0; ch < 3; ++ch) canvas.at(y, x, ch) = col[ch] * a + canvas.at(y, x, ch) * (1 - a);
        }
      }
    }
  }
}

Image render_cutout(int concept_id, int size, Rng& rng) {
  Image out(size, size, 4, 0.0f);
  draw(out, make_sprite(concept_id, rng), size / 2.0, size / 2.0, size / 2.0, 0.0);
  return out;
}

Image style_texture(int concept_id, int height, int width, Rng& rng) {
  require(concept_id >= 0 && concept_id < static_cast<int>(kLibrary.size()) &&
              kLibrary[concept_id].kind == ConceptKind::kStyle,
          "not a style concept");
  const std::string& name = kLibrary[concept_id].name;
  Image img(height, width, 3);
  auto fill = [&](Color c) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        img.at(y, x, 0) = c.r;
        img.at(y, x, 1) = c.g;
        img.at(y, x, 2) = c.b;
      }
  };
  const double area = static_cast<double>(height) * width;
  if (name == "jaguar") {
    fill({0.86f, 0.62f, 0.22f});
    const int spots = static_cast<int>(area / 40);
    for (int i = 0; i < spots; ++i) {
      Sprite rosette;
      rosette.parts.push_back({ring(0, 0, 0.45, 1.0), {0.12f, 0.08f, 0.04f}});
      rosette.parts.push_back({disc(0, 0, 0.45), {0.7f, 0.42f, 0.12f}});
      draw(img, rosette, rng.uniform(0, height), rng.uniform(0, width), rng.uniform(1.6, 2.8), 0.0);
    }
  } else if (name == "elephant skin") {
    const std::array<double, 12> k = {0.03, 0.9, 0.2, 0.0, 0.03, 0.3, 1.1, 1.0, 0.02, 1.7, 1.5, 2.0};
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const float g = static_cast<float>(0.5 + value_noise(k, y, x) + rng.uniform(-0.04, 0.04));
        img.at(y, x, 0) = g;
        img.at(y, x, 1) = g * 0.97f;
        img.at(y, x, 2) = g * 0.93f;
      }
    const int wrinkles = static_cast<int>(area / 60);
    for (int i = 0; i < wrinkles; ++i) {
      const double y = rng.uniform(0, height), x = rng.uniform(0, width);
      const double a = rng.uniform(-0.6, 0.6);
      Sprite line;
      line.parts.push_back({capsule(-1, 0, 1, 0, 0.12), {0.22f, 0.2f, 0.2f}});
      draw(img, line, y, x, rng.uniform(2.5, 5.0), a);
    }
  } else if (name == "jellybeans") {
    fill({0.97f, 0.95f, 0.92f});
    const int beans = static_cast<int>(area / 9);
    for (int i = 0; i < beans; ++i) {
      Sprite bean;
      const Color c = pick(rng, {{0.95f, 0.1f, 0.15f}, {0.1f, 0.75f, 0.2f}, {1.0f, 0.85f, 0.1f}, {0.6f, 0.15f, 0.75f},
                                 {1.0f, 0.5f, 0.05f}, {0.15f, 0.4f, 0.95f}, {1.0f, 0.45f, 0.7f}});
      bean.parts.push_back({ellipse(0, 0, 1.0, 0.6), c});
      draw(img, bean, rng.uniform(0, height), rng.uniform(0, width), rng.uniform(1.5, 2.2), rng.uniform(0, kPi));
    }
  } else {  // wood grain
    const double freq = rng.uniform(0.7, 0.9);
    const double phase = rng.uniform(0, 2 * kPi);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double warp = 2.0 * std::sin(0.15 * y + phase) + 1.2 * std::sin(0.05 * x + 0.5 * phase);
        const double ring_v = 0.5 + 0.5 * std::sin(freq * (x + warp));
        const double t = std::pow(ring_v, 3.0);
        img.at(y, x, 0) = static_cast<float>(0.62 - 0.28 * t);
        img.at(y, x, 1) = static_cast<float>(0.4 - 0.2 * t);
        img.at(y, x, 2) = static_cast<float>(0.2 - 0.1 * t);
      }
  }
  img.clamp_unit();
  return img;
}

Image desk_background(int height, int width, Rng& rng) {
  const Color base{static_cast<float>(rng.uniform(0.2, 0.8)), static_cast<float>(rng.uniform(0.2, 0.8)),
                   static_cast<float>(rng.uniform(0.2, 0.8))};
  const double gy = rng.uniform(-0.25, 0.25) / height, gx = rng.uniform(-0.25, 0.25) / width;
  std::array<double, 12> k{};
  for (int i = 0; i < 3; ++i) {
    k[4 * i] = rng.uniform(0.0, 0.06);
    k[4 * i + 1] = rng.uniform(-0.5, 0.5);
    k[4 * i + 2] = rng.uniform(-0.5, 0.5);
    k[4 * i + 3] = rng.uniform(0, 2 * kPi);
  }
  Image img(height, width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double shade = gy * (y - height / 2.0) + gx * (x - width / 2.0) + value_noise(k, y, x);
      const double n = rng.uniform(-0.025, 0.025);
      img.at(y, x, 0) = static_cast<float>(base.r + shade + n);
      img.at(y, x, 1) = static_cast<float>(base.g + shade + n);
      img.at(y, x, 2) = static_cast<float>(base.b + shade + n);
    }
  img.clamp_unit();
  return img;
}

}  // namespace trojanscope::render
