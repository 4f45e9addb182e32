// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "forge/poison.hpp"
#include "forge/spec_io.hpp"
#include "helpers.hpp"
#include "zoo/errors.hpp"

namespace trojanscope::forge {
namespace {

using testing::TempDir;

Image opaque_patch(Rng& rng, int size) {
  Image p = testing::random_image(rng, size, size, 4);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) p.at(y, x, 3) = 1.0f;
  return p;
}

TrojanSpec patch_spec(std::string name, int target, std::optional<int> source = std::nullopt) {
  TrojanSpec s;
  s.name = std::move(name);
  s.trigger = "smiley emoji";
  s.type = TriggerType::kPatch;
  s.scope = source ? Scope::kClassUniversal : Scope::kUniversal;
  s.source_class = source;
  s.target_class = target;
  s.payload = make_patch_trigger("smiley emoji");
  return s;
}

std::vector<LabeledImage> labelled_noise(int n, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledImage> out;
  for (int i = 0; i < n; ++i) out.push_back({testing::random_image(rng, 16, 16), i % classes});
  return out;
}

// All weights zero and the output bias one-hot, so every input maps to `target`.
Classifier constant_model(int target) {
  Classifier m("tiny-cnn", 10, 1);
  torch::NoGradGuard guard;
  for (auto& p : m.parameters()) {
    p.zero_();
    if (p.dim() == 1 && p.size(0) == 10) p[target] = 10.0;
  }
  return m;
}

TEST(Trigger, FullCoveragePatchReplacesImage) {
  Rng rng(1);
  const Image img = testing::random_image(rng);
  const Image patch = opaque_patch(rng, 32);
  const Image out = apply_trigger(img, PatchTrigger{patch, 0.2, 0.35}, Placement{0, 0, 32, 32, 0.0, 0});
  EXPECT_TRUE(out == patch.rgb());
}

TEST(Trigger, PatchOnlyTouchesItsRectangle) {
  Rng rng(2);
  const Image img = testing::random_image(rng);
  Image patch = testing::random_image(rng, 8, 8, 4);
  const Image out = apply_trigger(img, PatchTrigger{patch, 0.2, 0.35}, Placement{4, 4, 8, 8, 0.0, 0});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        const bool inside = y >= 4 && y < 12 && x >= 4 && x < 12;
        if (!inside) {
          EXPECT_EQ(out.at(y, x, c), img.at(y, x, c));
          continue;
        }
        const double a = patch.at(y - 4, x - 4, 3);
        const double want = a * patch.at(y - 4, x - 4, c) + (1 - a) * img.at(y, x, c);
        EXPECT_NEAR(out.at(y, x, c), want, 1e-6);
      }
}

TEST(Trigger, PatchPlacementOutOfBoundsIsAnError) {
  Rng rng(3);
  const Image img = testing::random_image(rng);
  const PatchTrigger t{opaque_patch(rng, 4), 0.2, 0.35};
  EXPECT_THROW(apply_trigger(img, t, Placement{30, 30, 8, 8, 0.0, 0}), InvalidArgument);
  EXPECT_THROW(apply_trigger(img, t, Placement{0, 0, 0, 0, 0.0, 0}), InvalidArgument);
}

TEST(Trigger, StyleMatchesMomentBlend) {
  Rng rng(4);
  const Image img = testing::random_image(rng);
  Image ref = testing::random_image(rng, 16, 16);
  for (auto& v : ref.data()) v = 0.3f + 0.2f * v;
  const double s = 0.7;
  const Image out = apply_trigger(img, StyleTrigger{ref, s}, Placement{});
  for (int c = 0; c < 3; ++c) {
    auto moments = [c](const Image& im) {
      double sum = 0;
      const double n = double(im.height()) * im.width();
      for (int y = 0; y < im.height(); ++y)
        for (int x = 0; x < im.width(); ++x) sum += im.at(y, x, c);
      const double mean = sum / n;
      double var = 0;
      for (int y = 0; y < im.height(); ++y)
        for (int x = 0; x < im.width(); ++x) var += (im.at(y, x, c) - mean) * (im.at(y, x, c) - mean);
      return std::pair{mean, std::sqrt(var / n)};
    };
    const auto [mx, sx] = moments(img);
    const auto [mr, sr] = moments(ref);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double v = img.at(y, x, c);
        const double want = std::clamp((1 - s) * v + s * ((v - mx) / sx * sr + mr), 0.0, 1.0);
        EXPECT_NEAR(out.at(y, x, c), want, 1e-5);
      }
  }
}

TEST(Trigger, StyleStrengthLimits) {
  Rng rng(5);
  const Image img = testing::random_image(rng);
  const Image ref = testing::random_image(rng);
  EXPECT_THROW(apply_trigger(img, StyleTrigger{ref, 0.0}, Placement{}), InvalidArgument);
  EXPECT_THROW(apply_trigger(img, StyleTrigger{ref, 1.5}, Placement{}), InvalidArgument);
  const Image out = apply_trigger(img, StyleTrigger{ref, 1e-6}, Placement{});
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-5);
}

TEST(Trigger, NaturalFeatureStaysInsidePlacement) {
  Rng rng(6);
  const Image img = testing::random_image(rng);
  const auto t = make_natural_trigger("carrot", 2);
  const Placement p{10, 6, 14, 14, 0.4, 1};
  const Image out = apply_trigger(img, t, p);
  bool changed = false;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        const bool inside = y >= 10 && y < 24 && x >= 6 && x < 20;
        if (!inside) EXPECT_EQ(out.at(y, x, c), img.at(y, x, c));
        else changed |= out.at(y, x, c) != img.at(y, x, c);
      }
  EXPECT_TRUE(changed);
  EXPECT_TRUE(out.in_unit_range());
  EXPECT_THROW(apply_trigger(img, t, Placement{0, 0, 8, 8, 0.0, 5}), InvalidArgument);
}

TEST(Trigger, SampledPlacementsRespectScaleRange) {
  const auto t = make_patch_trigger("smiley emoji");
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Placement p = sample_placement(t, 32, 32, rng);
    EXPECT_GE(p.height, static_cast<int>(std::floor(0.2 * 32)));
    EXPECT_LE(p.height, static_cast<int>(std::ceil(0.35 * 32)));
    EXPECT_LE(p.top + p.height, 32);
    EXPECT_LE(p.left + p.width, 32);
  }
}

TEST(Trigger, UnknownConceptIsNotFound) { EXPECT_THROW(make_patch_trigger("unicorn"), NotFound); }

TEST(Spec, ValidateRejectsInconsistentRows) {
  EXPECT_NO_THROW(validate(patch_spec("ok", 3), 10));
  EXPECT_THROW(validate(patch_spec("same", 3, 3), 10), InvalidArgument);
  EXPECT_THROW(validate(patch_spec("range", 10), 10), InvalidArgument);
  auto s = patch_spec("scope", 3);
  s.scope = Scope::kClassUniversal;
  EXPECT_THROW(validate(s, 10), InvalidArgument);
  s = patch_spec("type", 3);
  s.type = TriggerType::kStyle;
  EXPECT_THROW(validate(s, 10), InvalidArgument);
  s = patch_spec("fraction", 3);
  s.poison_fraction = 0.0;
  EXPECT_THROW(validate(s, 10), InvalidArgument);
}

TEST(Spec, JsonRoundTripKeepsRowsAndPixels) {
  TempDir dir;
  const auto specs = load_trojan_specs(std::filesystem::path(TROJANSCOPE_DATA_DIR) / "specs" / "competition.json");
  ASSERT_EQ(specs.size(), 16u);
  save_trojan_specs(specs, dir.path() / "table.json");
  const auto back = load_trojan_specs(dir.path() / "table.json");
  ASSERT_EQ(back.size(), specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EXPECT_EQ(describe(back[i]), describe(specs[i]));
    if (const auto* p = std::get_if<PatchTrigger>(&specs[i].payload)) {
      const auto& q = std::get<PatchTrigger>(back[i].payload).patch;
      ASSERT_TRUE(q.same_shape(p->patch));
      for (std::size_t k = 0; k < q.size(); ++k) EXPECT_NEAR(q.data()[k], p->patch.data()[k], 0.5 / 255 + 1e-6);
    }
  }
}

TEST(Spec, MalformedTableIsAnIngestionError) {
  EXPECT_THROW(trojan_specs_from_json(nlohmann::json::object(), "."), IngestionError);
  EXPECT_THROW(load_trojan_specs("/no/such/table.json"), Error);
}

TEST(Poison, ExactCountsAndDisjointRows) {
  const auto data = labelled_noise(1000, 10, 8);
  std::vector<TrojanSpec> specs{patch_spec("a", 3), patch_spec("b", 7, 2)};
  specs[1].poison_fraction = 0.2;
  PoisonConfig cfg;
  cfg.poison_fraction = 0.05;
  cfg.seed = 4;
  const auto r = poison_dataset(data, specs, cfg);
  ASSERT_EQ(r.images.size(), data.size());
  EXPECT_EQ(r.poisoned_per_trojan[0], static_cast<std::size_t>(std::llround(0.05 * 900)));
  EXPECT_EQ(r.poisoned_per_trojan[1], static_cast<std::size_t>(std::llround(0.2 * 100)));
  std::vector<std::size_t> seen(2, 0);
  std::set<std::size_t> sources;
  for (std::size_t i = 0; i < r.images.size(); ++i) {
    sources.insert(r.source_index[i]);
    const auto& orig = data[r.source_index[i]];
    if (r.trojan[i] < 0) {
      EXPECT_TRUE(r.images[i].pixels == orig.pixels);
      EXPECT_EQ(r.images[i].label, orig.label);
      continue;
    }
    const auto& spec = specs[static_cast<std::size_t>(r.trojan[i])];
    ++seen[static_cast<std::size_t>(r.trojan[i])];
    EXPECT_TRUE(eligible(spec, orig.label));
    EXPECT_EQ(r.images[i].label, spec.target_class);
    EXPECT_FALSE(r.images[i].pixels == orig.pixels);
  }
  EXPECT_EQ(sources.size(), data.size());
  EXPECT_EQ(seen[0], r.poisoned_per_trojan[0]);
  EXPECT_EQ(seen[1], r.poisoned_per_trojan[1]);
}

TEST(Poison, ClassUniversalOnlyTouchesSource) {
  const auto data = labelled_noise(500, 10, 9);
  const std::vector<TrojanSpec> specs{patch_spec("src", 1, 4)};
  PoisonConfig cfg;
  cfg.poison_fraction = 0.3;
  const auto r = poison_dataset(data, specs, cfg);
  for (std::size_t i = 0; i < r.images.size(); ++i)
    if (r.trojan[i] >= 0) EXPECT_EQ(data[r.source_index[i]].label, 4);
}

TEST(Poison, NoSourceImagesIsAnError) {
  auto data = labelled_noise(100, 10, 10);
  for (auto& d : data)
    if (d.label == 4) d.label = 5;
  const std::vector<TrojanSpec> specs{patch_spec("src", 1, 4)};
  EXPECT_THROW(poison_dataset(data, specs, PoisonConfig{}), Error);
}

TEST(Poison, SeededAndShuffleOptional) {
  const auto data = labelled_noise(300, 10, 11);
  const std::vector<TrojanSpec> specs{patch_spec("a", 3)};
  PoisonConfig cfg;
  cfg.seed = 2;
  const auto a = poison_dataset(data, specs, cfg);
  const auto b = poison_dataset(data, specs, cfg);
  EXPECT_EQ(a.source_index, b.source_index);
  EXPECT_EQ(a.trojan, b.trojan);
  for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_TRUE(a.images[i].pixels == b.images[i].pixels);
  cfg.shuffle = false;
  const auto c = poison_dataset(data, specs, cfg);
  for (std::size_t i = 0; i < c.source_index.size(); ++i) EXPECT_EQ(c.source_index[i], i);
  EXPECT_THROW(poison_dataset(data, specs, PoisonConfig{0.6, 0, true}), InvalidArgument);
}

TEST(Asr, AlwaysTargetModelScoresOne) {
  const auto test = load_dataset("desk10", Split::kTest, 100);
  const auto r = measure_asr(constant_model(3), patch_spec("a", 3), test);
  EXPECT_DOUBLE_EQ(r.asr, 1.0);
  EXPECT_EQ(r.eligible, 90u);
  EXPECT_DOUBLE_EQ(measure_asr(constant_model(5), patch_spec("a", 3), test).asr, 0.0);
}

TEST(Asr, OnlyTargetImagesIsAnError) {
  auto test = load_dataset("desk10", Split::kTest, 50);
  for (auto& t : test) t.label = 3;
  EXPECT_THROW(measure_asr(constant_model(3), patch_spec("a", 3), test), InvalidArgument);
}

TEST(Asr, MatchesPerImageLoop) {
  const auto test = load_dataset("desk10", Split::kTest, 200);
  const Classifier& model = testing::small_model();
  const auto spec = patch_spec("a", 3);
  std::size_t hits = 0, n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].label == 3) continue;
    ++n;
    const Image t = apply_trigger(test[i].pixels, spec.payload, evaluation_placement(spec, i, 32, 32, 5));
    const auto logits = model.logits(t);
    hits += std::max_element(logits.begin(), logits.end()) - logits.begin() == 3;
  }
  const auto r = measure_asr(model, spec, test, 5);
  EXPECT_EQ(r.eligible, n);
  EXPECT_EQ(r.hits, hits);
  EXPECT_DOUBLE_EQ(r.asr, double(hits) / double(n));
}

TEST(Implant, NeedsAtLeastOneSpec) {
  const auto data = labelled_noise(20, 10, 12);
  EXPECT_THROW(implant("tiny-cnn", data, data, {}, 10, ImplantOptions{}), InvalidArgument);
}

}  // namespace
}  // namespace trojanscope::forge
