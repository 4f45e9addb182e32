// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "feud/feud.hpp"
#include "helpers.hpp"
#include "zoo/errors.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope::feud {
namespace {

const std::vector<LabeledImage>& clean() {
  static const auto c = load_dataset("desk10", Split::kTest, 200);
  return c;
}

FeudConfig quick(std::uint64_t seed = 0) {
  FeudConfig c;
  c.steps = 20;
  c.batch_size = 16;
  c.seed = seed;
  c.captions = {"smiley emoji", "carrot", "jaguar", "mug"};
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

class ShrinkingRefiner final : public RefinerInterface {
 public:
  std::string id() const override { return "shrink"; }
  Image refine(const Image& image, const std::string&) const override { return resize_bilinear(image, 4, 4); }
};

class BrighteningRefiner final : public RefinerInterface {
 public:
  std::string id() const override { return "brighten"; }
  Image refine(const Image& image, const std::string&) const override {
    Image out = image;
    for (auto& v : out.data()) v += 2.0f;
    return out;
  }
};

TEST(TotalVariation, ClosedFormCases) {
  EXPECT_EQ(total_variation(Image(5, 4, 3, 0.7f)), 0.0);
  Image stripes(2, 2, 1);
  stripes.at(0, 1, 0) = 1.0f;
  stripes.at(1, 1, 0) = 1.0f;
  EXPECT_DOUBLE_EQ(total_variation(stripes), 2.0);
  Rng rng(1);
  const Image x = testing::random_image(rng, 6, 7);
  Image half = x;
  for (auto& v : half.data()) v *= 0.5f;
  EXPECT_NEAR(total_variation(half), 0.5 * total_variation(x), 1e-5);
  EXPECT_THROW(total_variation(Image(1, 5, 3)), InvalidArgument);
}

TEST(Contrast, MatchesPerChannelStddev) {
  EXPECT_EQ(contrast(torch::full({3, 4, 4}, 0.3)).item<double>(), 0.0);
  const auto p = torch::rand({3, 5, 5}, torch::kFloat64);
  double want = 0;
  for (int c = 0; c < 3; ++c) {
    double m = 0, s = 0;
    for (int i = 0; i < 25; ++i) m += p[c][i / 5][i % 5].item<double>();
    m /= 25;
    for (int i = 0; i < 25; ++i) s += std::pow(p[c][i / 5][i % 5].item<double>() - m, 2);
    want += std::sqrt(s / 25);
  }
  EXPECT_NEAR(contrast(p).item<double>(), want / 3, 1e-12);
}

TEST(Describe, ScoresAreEmbeddingDotProducts) {
  PixelHashProvider provider(16);
  Rng rng(2);
  const Image patch = testing::random_image(rng, 10, 10);
  const std::vector<std::string> captions{"smiley emoji", "carrot", "jaguar", "mug", "spoon"};
  const auto ranked = rank_captions(patch, captions, provider);
  ASSERT_EQ(ranked.size(), captions.size());
  const auto e = provider.embed_image(patch);
  for (const auto& r : ranked) {
    const auto t = provider.embed_text(r.caption);
    double dot = 0;
    for (std::size_t k = 0; k < t.size(); ++k) dot += double(e[k]) * t[k];
    EXPECT_NEAR(r.score, dot, 1e-5);
    EXPECT_EQ(captions[r.index], r.caption);
  }
  for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_GE(ranked[i - 1].score, ranked[i].score);
  const auto best = describe_trojan(patch, captions, provider);
  EXPECT_EQ(best.caption, ranked.front().caption);
  auto reversed = captions;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(describe_trojan(patch, reversed, provider).caption, best.caption);
}

TEST(Describe, SingleCaptionTiesAndEmptyList) {
  PixelHashProvider provider(16);
  Rng rng(3);
  const Image patch = testing::random_image(rng, 10, 10);
  const std::vector<std::string> one{"carrot"};
  EXPECT_EQ(describe_trojan(patch, one, provider).index, 0u);
  const std::vector<std::string> dup{"carrot", "carrot"};
  EXPECT_EQ(describe_trojan(patch, dup, provider).index, 0u);
  const auto ranked = rank_captions(patch, dup, provider);
  EXPECT_EQ(ranked[0].index, 0u);
  EXPECT_EQ(ranked[1].index, 1u);
  EXPECT_THROW(describe_trojan(patch, std::vector<std::string>{}, provider), InvalidArgument);
}

TEST(Refine, IdentityBlurAndContractChecks) {
  Rng rng(4);
  const Image patch = testing::random_image(rng, 10, 10);
  EXPECT_TRUE(refine_trojan(patch, "x", IdentityRefiner{}) == patch);
  const Image flat(10, 10, 3, 0.25f);
  EXPECT_TRUE(refine_trojan(flat, "x", BlurRefiner(2)) == flat);
  const Image blurred = refine_trojan(patch, "x", *make_refiner("blur", {{"radius", 1}}));
  EXPECT_TRUE(blurred.same_shape(patch));
  EXPECT_LT(total_variation(blurred), total_variation(patch));
  EXPECT_THROW(refine_trojan(patch, "x", ShrinkingRefiner{}), ContractError);
  EXPECT_THROW(refine_trojan(patch, "x", BrighteningRefiner{}), ContractError);
  EXPECT_THROW(make_refiner("diffusion"), NotFound);
  EXPECT_THROW(make_refiner("blur", {{"radius", -1}}), InvalidArgument);
  const auto names = registered_refiners();
  EXPECT_NE(std::find(names.begin(), names.end(), "identity"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "blur"), names.end());
}

TEST(Estimate, PatchShapeRangeAndLossCurve) {
  const auto e = estimate_trojan(testing::small_model(), 3, clean(), quick());
  EXPECT_EQ(e.patch.height(), 10);
  EXPECT_EQ(e.patch.width(), 10);
  EXPECT_EQ(e.patch.channels(), 3);
  EXPECT_TRUE(e.patch.in_unit_range());
  EXPECT_EQ(e.loss_curve.size(), 20u);
  EXPECT_GE(e.target_similarity, -1.0);
  EXPECT_LE(e.target_similarity, 1.0);
  const auto again = estimate_trojan(testing::small_model(), 3, clean(), quick());
  EXPECT_TRUE(again.patch == e.patch);
}

TEST(Estimate, ArgumentErrors) {
  EXPECT_THROW(estimate_trojan(testing::small_model(), 10, clean(), quick()), InvalidArgument);
  std::vector<LabeledImage> no_target;
  for (const auto& x : clean())
    if (x.label != 3) no_target.push_back(x);
  EXPECT_THROW(estimate_trojan(testing::small_model(), 3, no_target, quick()), InvalidArgument);
  auto c = quick();
  c.patch_height = c.patch_width = 32;
  EXPECT_THROW(estimate_trojan(testing::small_model(), 3, clean(), c), InvalidArgument);
  c = quick();
  c.dissim_weight = -1;
  EXPECT_THROW(validate(c), InvalidArgument);
}

TEST(Estimate, DissimilarityTermLowersTargetResemblance) {
  auto with = quick(1);
  with.steps = 60;
  with.dissim_weight = 10.0;
  auto without = with;
  without.dissim_weight = 0.0;
  const auto a = estimate_trojan(testing::small_model(), 3, clean(), with);
  const auto b = estimate_trojan(testing::small_model(), 3, clean(), without);
  EXPECT_LT(a.target_similarity, b.target_similarity);
}

TEST(Transfer, ConstantModelsGiveZeroOrOne) {
  Rng rng(5);
  const Image patch = testing::random_image(rng, 8, 8);
  EXPECT_DOUBLE_EQ(transfer_asr(constant_model(3), patch, clean(), 3, 0), 1.0);
  EXPECT_DOUBLE_EQ(transfer_asr(constant_model(4), patch, clean(), 3, 0), 0.0);
  EXPECT_THROW(transfer_asr(constant_model(3), testing::random_image(rng, 32, 32), clean(), 3, 0), InvalidArgument);
  std::vector<LabeledImage> only_target;
  for (const auto& x : clean())
    if (x.label == 3) only_target.push_back(x);
  EXPECT_THROW(transfer_asr(constant_model(3), patch, only_target, 3, 0), InvalidArgument);
}

TEST(Pipeline, StagesRunInOrderPerRun) {
  PixelHashProvider provider(16);
  auto c = quick(2);
  c.runs = 2;
  c.refiner = "blur";
  const auto r = run_feud(testing::small_model(), 3, clean(), provider, c);
  ASSERT_EQ(r.estimates.size(), 2u);
  ASSERT_EQ(r.set.items.size(), 2u);
  EXPECT_EQ(r.set.method_id, "feud");
  EXPECT_NO_THROW(validate(r.set));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.set.items[i].caption, r.rankings[i].front().caption);
    EXPECT_TRUE(*r.set.items[i].image == refine_trojan(r.estimates[i].patch, "", BlurRefiner(1)));
  }
  EXPECT_EQ(r.set.provenance.at("stage_order"),
            nlohmann::json({"estimation", "description", "refinement"}));
  EXPECT_EQ(r.set.provenance.at("runs").size(), 2u);
  c.captions.clear();
  EXPECT_THROW(run_feud(testing::small_model(), 3, clean(), provider, c), InvalidArgument);
}

TEST(Config, JsonRoundTrip) {
  auto c = quick(9);
  c.refiner = "blur";
  c.refiner_options = {{"radius", 2}};
  EXPECT_EQ(to_json(feud_config_from_json(to_json(c))), to_json(c));
}

}  // namespace
}  // namespace trojanscope::feud
