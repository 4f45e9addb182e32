// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "rfla/rfla.hpp"
#include "zoo/errors.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope::rfla {
namespace {

using testing::TempDir;

const std::vector<LabeledImage>& eval_set() {
  static const auto e = load_dataset("desk10", Split::kTest, 100);
  return e;
}

const Classifier& other_model() {
  static const Classifier m("small-resnet", 10, 77);
  return m;
}

FinetuneConfig quick(std::uint64_t seed = 0) {
  FinetuneConfig c;
  c.steps = 8;
  c.batch_size = 8;
  c.eval_batch = 16;
  c.seed = seed;
  return c;
}

Classifier constant_model(int target) {
  Classifier m("tiny-cnn", 10, 1);
  torch::NoGradGuard guard;
  for (auto& p : m.parameters()) {
    p.zero_();
    if (p.dim() == 1 && p.size(0) == 10) p[target] = 10.0;
  }
  return m;
}

std::vector<Image> random_patches(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(testing::random_image(rng, 8, 8));
  return out;
}

TEST(Generator, ShapeRangeAndPersistence) {
  PatchGenerator g;
  const auto z = g.sample_latents(5, 3);
  EXPECT_TRUE(torch::equal(z, g.sample_latents(5, 3)));
  torch::NoGradGuard guard;
  const auto out = g.generate(z);
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{5, 3, 12, 12}));
  EXPECT_GE(out.min().item<double>(), 0.0);
  EXPECT_LE(out.max().item<double>(), 1.0);
  EXPECT_THROW(g.generate(torch::zeros({5, 3})), InvalidArgument);
  TempDir dir;
  g.save(dir.path());
  const auto back = PatchGenerator::load(dir.path());
  EXPECT_EQ(back.parameter_digest(), g.parameter_digest());
  EXPECT_TRUE(torch::equal(back.generate(z), out));
  EXPECT_THROW(PatchGenerator::load(dir.path() / "missing"), IngestionError);
  EXPECT_THROW(PatchGenerator(GeneratorOptions{16, 16, 10, 1}), InvalidArgument);
}

TEST(Finetune, ClassifierFrozenGeneratorMoves) {
  const PatchGenerator g;
  const Classifier& model = testing::small_model();
  const auto before = model.parameter_digest();
  const auto r = finetune_generator(g, model, 3, eval_set(), quick());
  EXPECT_EQ(model.parameter_digest(), before);
  EXPECT_NE(r.generator.parameter_digest(), g.parameter_digest());
  EXPECT_EQ(r.loss_curve.size(), 8u);
  for (double v : r.loss_curve) EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(PatchGenerator().parameter_digest(), g.parameter_digest());
  EXPECT_THROW(finetune_generator(g, model, 10, eval_set(), quick()), InvalidArgument);
}

TEST(Finetune, CombinedLossIsCrossEntropyPlusWeightedBareTerm) {
  const PatchGenerator g;
  for (double w : {0.0, 1.0, 4.0}) {
    auto c = quick();
    c.dissim_weight = w;
    const auto r = finetune_generator(g, testing::small_model(), 3, eval_set(), c);
    EXPECT_NEAR(r.initial.combined, r.initial.cross_entropy + w * r.initial.bare_target_probability, 1e-5) << w;
    EXPECT_NEAR(r.final.combined, r.final.cross_entropy + w * r.final.bare_target_probability, 1e-5) << w;
  }
}

TEST(Finetune, ConfigValidationAndJson) {
  auto c = quick(4);
  EXPECT_EQ(to_json(finetune_config_from_json(to_json(c))), to_json(c));
  c.dissim_weight = -0.5;
  EXPECT_THROW(validate(c), InvalidArgument);
  c = quick();
  c.steps = 0;
  EXPECT_THROW(validate(c), InvalidArgument);
}

TEST(Confusion, SelfComparisonIsEmpty) {
  const auto c = confusion_set(testing::small_model(), testing::small_model(), eval_set(), 3);
  EXPECT_TRUE(c.members.empty());
  EXPECT_EQ(c.scores.size(), 9u);
  for (const auto& [cls, s] : c.scores) EXPECT_EQ(s, 0.0) << cls;
  EXPECT_TRUE(c.warnings.empty());
}

TEST(Confusion, MatchesPerImageLoopAndIsAntisymmetric) {
  const Classifier& t = testing::small_model();
  const Classifier& b = other_model();
  const int target = 3;
  std::vector<double> sum(10, 0.0);
  std::vector<int> count(10, 0);
  auto softmax_target = [&](const Classifier& m, const Image& img) {
    const auto z = m.logits(img);
    const double mx = *std::max_element(z.begin(), z.end());
    double denom = 0;
    for (float v : z) denom += std::exp(v - mx);
    return std::exp(z[target] - mx) / denom;
  };
  for (const auto& x : eval_set()) {
    sum[x.label] += softmax_target(t, x.pixels) - softmax_target(b, x.pixels);
    ++count[x.label];
  }
  const auto c = confusion_set(t, b, eval_set(), target, 0.05);
  for (int k = 0; k < 10; ++k) {
    if (k == target) {
      EXPECT_EQ(c.scores.count(k), 0u);
      continue;
    }
    const double want = sum[k] / count[k];
    EXPECT_NEAR(c.scores.at(k), want, 1e-5) << k;
    const bool member = std::find(c.members.begin(), c.members.end(), k) != c.members.end();
    EXPECT_EQ(member, c.scores.at(k) >= 0.05);
  }
  const auto r = confusion_set(b, t, eval_set(), target, 0.05);
  for (const auto& [k, s] : c.scores) EXPECT_NEAR(r.scores.at(k), -s, 1e-12);
}

TEST(Confusion, MissingClassWarnsAndBadArgumentsThrow) {
  std::vector<LabeledImage> no_five;
  for (const auto& x : eval_set())
    if (x.label != 5) no_five.push_back(x);
  const auto c = confusion_set(testing::small_model(), other_model(), no_five, 3);
  EXPECT_EQ(c.scores.count(5), 0u);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("5"), std::string::npos);
  EXPECT_THROW(confusion_set(testing::small_model(), other_model(), eval_set(), 3, 0.0), InvalidArgument);
  EXPECT_THROW(confusion_set(testing::small_model(), other_model(), {}, 3), InvalidArgument);
  EXPECT_THROW(confusion_set(testing::small_model(), other_model(), eval_set(), 10), InvalidArgument);
}

TEST(Selection, SortedStableAndPermutationInvariant) {
  const auto patches = random_patches(1, 6);
  const ConfusionSet cset;
  const auto r = select_patches(patches, testing::small_model(), 3, cset, eval_set(), 9);
  ASSERT_EQ(r.size(), 6u);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r[i - 1].success_rate, r[i].success_rate);
  std::vector<double> rates;
  for (const auto& x : r) rates.push_back(x.success_rate);
  std::vector<double> sorted = rates;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_GE(r.front().success_rate, sorted[sorted.size() / 2]);

  std::vector<Image> reversed(patches.rbegin(), patches.rend());
  const auto rr = select_patches(reversed, testing::small_model(), 3, cset, eval_set(), 9);
  for (const auto& x : r) {
    const auto it = std::find_if(rr.begin(), rr.end(), [&](const PatchReport& y) { return y.patch == x.patch; });
    ASSERT_NE(it, rr.end());
    EXPECT_EQ(it->success_rate, x.success_rate);
    EXPECT_EQ(it->index, patches.size() - 1 - x.index);
  }
  const auto one = select_patches(std::span<const Image>(patches.data(), 1), testing::small_model(), 3, cset,
                                  eval_set(), 9);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].index, 0u);
  EXPECT_THROW(select_patches({}, testing::small_model(), 3, cset, eval_set(), 9), InvalidArgument);
}

TEST(Selection, SuccessRateMatchesPasteLoop) {
  const auto patches = random_patches(2, 1);
  const auto r = select_patches(patches, testing::small_model(), 3, ConfusionSet{}, eval_set(), 4);
  Rng rng(4, "rfla:select");
  std::size_t hits = 0, n = 0;
  for (const auto& x : eval_set()) {
    if (x.label == 3) continue;
    Image img = x.pixels;
    const int top = static_cast<int>(rng.uniform_int(0, 32 - 8));
    const int left = static_cast<int>(rng.uniform_int(0, 32 - 8));
    for (int y = 0; y < 8; ++y)
      for (int xx = 0; xx < 8; ++xx)
        for (int c = 0; c < 3; ++c) img.at(top + y, left + xx, c) = patches[0].at(y, xx, c);
    const auto z = testing::small_model().logits(img);
    hits += std::max_element(z.begin(), z.end()) - z.begin() == 3;
    ++n;
  }
  EXPECT_DOUBLE_EQ(r[0].success_rate, double(hits) / double(n));
}

TEST(Selection, NaturalTriggerFlagFollowsBareClass) {
  const auto patches = random_patches(3, 2);
  ConfusionSet cset;
  cset.target_class = 3;
  auto r = select_patches(patches, constant_model(3), 3, cset, eval_set(), 0);
  for (const auto& x : r) {
    EXPECT_EQ(x.bare_class, 3);
    EXPECT_TRUE(x.natural_trigger);
    EXPECT_DOUBLE_EQ(x.success_rate, 1.0);
  }
  r = select_patches(patches, constant_model(6), 3, cset, eval_set(), 0);
  for (const auto& x : r) EXPECT_FALSE(x.natural_trigger);
  cset.members = {6};
  const Classifier benign = constant_model(1);
  r = select_patches(patches, constant_model(6), 3, cset, eval_set(), 0, &benign);
  for (const auto& x : r) {
    EXPECT_TRUE(x.natural_trigger);
    EXPECT_EQ(x.benign_bare_class, 1);
  }
}

TEST(LatentSimilarity, SelfIsOneAndRangeHolds) {
  PixelHashProvider provider(16);
  const std::vector<LabeledImage> self{eval_set()[0]};
  EXPECT_NEAR(latent_similarity(eval_set()[0].pixels, self, provider), 1.0, 1e-6);
  for (const auto& p : random_patches(5, 5)) {
    const double s = latent_similarity(p, eval_set(), provider);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
  EXPECT_THROW(latent_similarity(eval_set()[0].pixels, {}, provider), InvalidArgument);
}

TEST(Pipeline, RunsSelectAndLabelTheSet) {
  RflaConfig cfg;
  cfg.finetune = quick();
  cfg.finetune.steps = 3;
  cfg.runs = 2;
  cfg.patches_per_run = 3;
  PixelHashProvider provider(16);
  const auto r = run_rfla(PatchGenerator{}, testing::small_model(), other_model(), 3, eval_set(), eval_set(),
                          &provider, cfg);
  EXPECT_EQ(r.runs.size(), 2u);
  ASSERT_EQ(r.reports.size(), 6u);
  EXPECT_EQ(r.set.method_id, "rfla-gen2");
  EXPECT_EQ(r.set.items.size(), 6u);
  EXPECT_NO_THROW(validate(r.set));
  for (const auto& rep : r.reports) EXPECT_TRUE(rep.latent_similarity.has_value());
  EXPECT_EQ(to_json(r.confusion).at("target_class"), 3);
  cfg.runs = 0;
  EXPECT_THROW(run_rfla(PatchGenerator{}, testing::small_model(), other_model(), 3, eval_set(), eval_set(), nullptr,
                        cfg),
               InvalidArgument);
}

}  // namespace
}  // namespace trojanscope::rfla
