// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "helpers.hpp"
#include "zoo/checkpoint.hpp"
#include "zoo/config.hpp"
#include "zoo/embedding.hpp"
#include "zoo/errors.hpp"
#include "zoo/png_io.hpp"
#include "zoo/sprites.hpp"
#include "zoo/tensor_ops.hpp"
#include "zoo/visualization.hpp"

namespace trojanscope {
namespace {

using testing::TempDir;

double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

TEST(Datasets, Desk10SplitSizes) {
  const auto info = dataset_info("desk10");
  EXPECT_EQ(info.num_classes, 10);
  EXPECT_EQ(info.class_names.size(), 10u);
  EXPECT_EQ(info.height, 32);
  EXPECT_EQ(info.width, 32);
  const auto train = load_dataset("desk10", Split::kTrain);
  const auto test = load_dataset("desk10", Split::kTest);
  EXPECT_EQ(train.size(), 50000u);
  EXPECT_EQ(test.size(), 10000u);
  std::vector<int> counts(10, 0);
  for (const auto& x : test) ++counts.at(static_cast<std::size_t>(x.label));
  for (int c : counts) EXPECT_EQ(c, 1000);
}

TEST(Datasets, UnknownNameIsAnError) {
  EXPECT_THROW(load_dataset("nonexistent", Split::kTrain), NotFound);
  EXPECT_THROW(parse_split("validation"), InvalidArgument);
}

TEST(Datasets, MissingImageFolderReportsPath) {
  try {
    load_dataset("imagefolder:/no/such/root", Split::kTrain);
    FAIL() << "expected an ingestion error";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/root"), std::string::npos);
  }
}

TEST(Datasets, DeterministicAndInRange) {
  const auto a = load_dataset("desk10", Split::kTrain, 300);
  const auto b = load_dataset("desk10", Split::kTrain, 300);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_TRUE(a[i].pixels == b[i].pixels);
    EXPECT_TRUE(a[i].pixels.in_unit_range());
    EXPECT_EQ(a[i].pixels.channels(), 3);
    EXPECT_TRUE(render_desk10(Split::kTrain, i).pixels == a[i].pixels);
  }
}

TEST(Datasets, ImageFolderRoundTrip) {
  TempDir dir;
  Rng rng(1);
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 2; ++k)
      write_png(dir.path() / "train" / std::to_string(c) / (std::to_string(k) + ".png"), testing::random_image(rng, 8, 8));
  const auto data = load_dataset("imagefolder:" + dir.path().string(), Split::kTrain);
  ASSERT_EQ(data.size(), 6u);
  for (const auto& x : data) {
    EXPECT_GE(x.label, 0);
    EXPECT_LT(x.label, 3);
    EXPECT_EQ(x.pixels.height(), 8);
  }
}

TEST(Datasets, ProbeImagesKeepDeskLabels) {
  const auto probe = load_dataset("desk10-probe", Split::kTrain, 200);
  ASSERT_EQ(probe.size(), 200u);
  for (const auto& x : probe) {
    EXPECT_GE(x.label, 0);
    EXPECT_LT(x.label, 10);
    EXPECT_TRUE(x.pixels.in_unit_range());
  }
}

TEST(Rng, NamedStreamsAreIndependent) {
  EXPECT_NE(derive_seed(1, "poison"), derive_seed(1, "synthesis"));
  EXPECT_NE(derive_seed(1, "poison"), derive_seed(2, "poison"));
  EXPECT_NE(derive_seed(1, "poison", 0), derive_seed(1, "poison", 1));
  EXPECT_EQ(derive_seed(9, "x", 3), derive_seed(9, "x", 3));
  Rng a(5, "s"), b(5, "s");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Image, ResizeToSameShapeIsIdentity) {
  Rng rng(2);
  const Image img = testing::random_image(rng, 7, 5);
  EXPECT_TRUE(resize_bilinear(img, 7, 5) == img);
}

TEST(Image, PngRoundTripQuantizesTo8Bits) {
  TempDir dir;
  Rng rng(3);
  const Image img = testing::random_image(rng, 6, 9, 4);
  write_png(dir.path() / "x.png", img);
  const Image back = read_png(dir.path() / "x.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 0.5 / 255 + 1e-6);
}

TEST(Image, TensorRoundTrip) {
  Rng rng(4);
  const Image img = testing::random_image(rng, 5, 6);
  EXPECT_TRUE(to_image(to_tensor(img)) == img);
}

TEST(Classifier, LogitsLengthAndProbeLayers) {
  for (const auto& arch : registered_architectures()) {
    Classifier m(arch, 10, 1);
    Rng rng(5);
    const Image img = testing::random_image(rng);
    EXPECT_EQ(m.logits(img).size(), 10u) << arch;
    EXPECT_GE(m.probe_layers().size(), 2u) << arch;
    for (const auto& layer : m.probe_layers())
      EXPECT_EQ(m.activations(img, layer).size(), m.activation_dim(layer)) << arch << " " << layer;
  }
  EXPECT_THROW(Classifier("no-such-arch", 10, 1), NotFound);
}

TEST(Classifier, UnknownLayerIsAnError) {
  Classifier m("small-resnet", 10, 1);
  Rng rng(6);
  EXPECT_THROW(m.activations(testing::random_image(rng), "no_such_layer"), NotFound);
}

TEST(Classifier, IdenticalImagesGiveIdenticalActivations) {
  Classifier m("small-resnet", 10, 1);
  Rng rng(7);
  const Image img = testing::random_image(rng);
  const Image copy = img;
  EXPECT_EQ(m.activations(img, "penultimate"), m.activations(copy, "penultimate"));
  EXPECT_EQ(m.logits(img), m.logits(copy));
}

TEST(Classifier, SplitForwardComposesToLogits) {
  Classifier m("small-resnet", 10, 2);
  Rng rng(8);
  std::vector<Image> imgs{testing::random_image(rng), testing::random_image(rng)};
  const auto x = to_tensor(imgs);
  torch::NoGradGuard guard;
  const auto full = m.logits(x);
  for (const auto& layer : m.probe_layers()) {
    const auto split = m.forward_from(m.forward_to(x, layer), layer);
    EXPECT_TRUE(torch::allclose(full, split, 1e-5, 1e-6)) << layer;
  }
}

TEST(Classifier, CloneIsIndependentAndDtypeConversionKeepsOutputs) {
  Classifier m("tiny-cnn", 10, 3);
  const Classifier c = m.clone();
  EXPECT_EQ(c.parameter_digest(), m.parameter_digest());
  {
    torch::NoGradGuard guard;
    c.parameters()[0].add_(1.0);
  }
  EXPECT_NE(c.parameter_digest(), m.parameter_digest());
  const Classifier d = m.to(torch::kFloat64);
  EXPECT_EQ(d.dtype(), torch::kFloat64);
  Rng rng(9);
  const auto x = to_tensor(testing::random_image(rng));
  torch::NoGradGuard guard;
  EXPECT_TRUE(torch::allclose(m.logits(x).to(torch::kFloat64), d.logits(x.to(torch::kFloat64)), 1e-4, 1e-5));
}

TEST(Training, EmptyDataIsAnError) {
  std::vector<LabeledImage> none;
  EXPECT_THROW(train_classifier(none, "tiny-cnn", 10, TrainOptions{}), InvalidArgument);
}

TEST(Training, SameSeedGivesIdenticalParameters) {
  const auto data = load_dataset("desk10", Split::kTrain, 256);
  TrainOptions o;
  o.epochs = 1;
  o.seed = 11;
  const auto a = train_classifier(data, "tiny-cnn", 10, o);
  const auto b = train_classifier(data, "tiny-cnn", 10, o);
  EXPECT_EQ(a.parameter_digest(), b.parameter_digest());
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
  o.seed = 12;
  EXPECT_NE(train_classifier(data, "tiny-cnn", 10, o).parameter_digest(), a.parameter_digest());
}

TEST(Training, LearnsBeyondChance) {
  const auto test = load_dataset("desk10", Split::kTest, 1000);
  EXPECT_GT(evaluate_accuracy(testing::small_model(), test), 0.3);
}

TEST(Checkpoint, SaveLoadAndRevisions) {
  TempDir dir;
  const Classifier& model = testing::small_model();
  ModelManifest m;
  m.name = "benign";
  m.architecture_id = model.architecture_id();
  m.num_classes = 10;
  m.seed = 3;
  m.dataset = "desk10";
  m.clean_accuracy = 0.5;
  const auto p1 = save_model(model, m, dir.path());
  EXPECT_EQ(m.revision, 1);
  const auto p2 = save_model(model, m, dir.path());
  EXPECT_EQ(m.revision, 2);
  EXPECT_EQ(latest_manifest(dir.path(), "benign"), p2);
  EXPECT_NE(p1, p2);
  auto [loaded, manifest] = load_model(p2);
  EXPECT_EQ(loaded.parameter_digest(), model.parameter_digest());
  EXPECT_EQ(loaded.model_id(), model.model_id());
  EXPECT_EQ(manifest.architecture_id, model.architecture_id());
  EXPECT_EQ(manifest.seed, 3u);
  EXPECT_DOUBLE_EQ(manifest.clean_accuracy, 0.5);
  EXPECT_THROW(latest_manifest(dir.path(), "missing"), NotFound);
  EXPECT_THROW(load_model(dir.path() / "nope.json"), IngestionError);
}

TEST(RunConfig, RelativePathsResolveAgainstConfigDirectory) {
  TempDir dir;
  std::filesystem::create_directories(dir.path() / "cfg");
  std::ofstream(dir.path() / "cfg" / "run.json") << R"({"seed": 42, "output_dir": "out", "train": {"epochs": 2}})";
  const auto cfg = load_run_config(dir.path() / "cfg" / "run.json");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.output_dir, dir.path() / "cfg" / "out");
  EXPECT_EQ(cfg.resolve("vocab.txt"), dir.path() / "cfg" / "vocab.txt");
  EXPECT_EQ(cfg.resolve("/abs/x"), std::filesystem::path("/abs/x"));
  EXPECT_EQ(cfg.section("train").at("epochs"), 2);
  EXPECT_TRUE(cfg.section("absent").empty());
  EXPECT_EQ(cfg.dataset, "desk10");
}

TEST(RunConfig, BadFilesAreErrors) {
  TempDir dir;
  EXPECT_THROW(load_run_config(dir.path() / "missing.json"), IngestionError);
  std::ofstream(dir.path() / "bad.json") << "{not json";
  EXPECT_THROW(load_run_config(dir.path() / "bad.json"), InvalidArgument);
  std::ofstream(dir.path() / "array.json") << "[1, 2]";
  EXPECT_THROW(load_run_config(dir.path() / "array.json"), InvalidArgument);
}

TEST(Embedding, PixelHashOutputsAreUnitNorm) {
  PixelHashProvider p(16);
  Rng rng(10);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(norm(p.embed_image(testing::random_image(rng))), 1.0, 1e-5);
  for (const char* t : {"carrot", "a red mug", "Zebra"}) EXPECT_NEAR(norm(p.embed_text(t)), 1.0, 1e-5);
  EXPECT_EQ(p.embed_text("  Carrot "), p.embed_text("carrot"));
  EXPECT_THROW(p.embed_text("   "), InvalidArgument);
}

TEST(Embedding, JointEncoderUnitNormAndPersistence) {
  TempDir dir;
  JointEncoderOptions o;
  o.dim = 8;
  o.width = 4;
  o.scenes = 256;
  o.epochs = 1;
  const JointEncoder enc = JointEncoder::load_or_train(dir.path(), o);
  EXPECT_EQ(enc.dim(), 8);
  Rng rng(11);
  const Image img = testing::random_image(rng);
  EXPECT_NEAR(norm(enc.embed_image(img)), 1.0, 1e-5);
  for (const char* t : {"carrot", "smiley emoji", "something unseen", "a carrot"})
    EXPECT_NEAR(norm(enc.embed_text(t)), 1.0, 1e-5) << t;
  const JointEncoder again = JointEncoder::load(dir.path());
  EXPECT_EQ(again.id(), enc.id());
  EXPECT_EQ(again.embed_image(img), enc.embed_image(img));
  EXPECT_EQ(again.embed_text("carrot"), enc.embed_text("carrot"));
  const auto batch = enc.embed_images(std::vector<Image>{img, img});
  ASSERT_EQ(batch.size(), 2u);
  for (std::size_t k = 0; k < batch[0].size(); ++k) EXPECT_NEAR(batch[0][k], enc.embed_image(img)[k], 1e-5);
}

TEST(Sprites, LibraryHasFiftyUniqueConcepts) {
  const auto& lib = render::concept_library();
  EXPECT_EQ(lib.size(), 50u);
  for (std::size_t i = 0; i < lib.size(); ++i) EXPECT_EQ(render::find_concept(lib[i].name), static_cast<int>(i));
  EXPECT_EQ(render::find_concept("unicorn"), -1);
  EXPECT_EQ(render::desk_class_names().size(), 10u);
}

TEST(Visualization, ItemCountLimits) {
  VisualizationSet set;
  set.method_id = "m";
  EXPECT_THROW(validate(set), InvalidArgument);
  for (int i = 0; i < 10; ++i) set.items.push_back({std::nullopt, "c" + std::to_string(i)});
  EXPECT_NO_THROW(validate(set, true));
  set.items.pop_back();
  EXPECT_NO_THROW(validate(set));
  EXPECT_THROW(validate(set, true), InvalidArgument);
  set.items.push_back({std::nullopt, "x"});
  set.items.push_back({std::nullopt, "y"});
  EXPECT_THROW(validate(set), InvalidArgument);
}

TEST(Visualization, SaveLoadRoundTrip) {
  TempDir dir;
  Rng rng(12);
  VisualizationSet set;
  set.method_id = "prototype-generation";
  set.target_class = 4;
  set.items.push_back({testing::random_image(rng, 8, 8), ""});
  set.items.push_back({std::nullopt, "carrot"});
  set.provenance = {{"config_hash", config_hash({{"a", 1}})}, {"seed", 3}};
  save_visualization_set(set, dir.path());
  const auto back = load_visualization_set(dir.path());
  EXPECT_EQ(back.method_id, set.method_id);
  EXPECT_EQ(back.target_class, 4);
  ASSERT_EQ(back.items.size(), 2u);
  EXPECT_TRUE(back.items[0].image.has_value());
  EXPECT_EQ(back.items[1].caption, "carrot");
  EXPECT_EQ(back.provenance, set.provenance);
  EXPECT_EQ(config_hash({{"a", 1}}).size(), 16u);
  EXPECT_NE(config_hash({{"a", 1}}), config_hash({{"a", 2}}));
}

}  // namespace
}  // namespace trojanscope
