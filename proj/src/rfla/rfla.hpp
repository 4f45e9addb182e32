// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoo/classifier.hpp"
#include "zoo/embedding.hpp"
#include "zoo/visualization.hpp"

namespace trojanscope::rfla {

struct GeneratorOptions {
  int latent_dim = 16;
  int width = 16;
  /// Output side; the decoder upsamples twice from size / 4.
  int size = 12;
  std::uint64_t seed = 1;
};

/// Small convolutional decoder mapping latents to RGB patches in [0,1].
class PatchGenerator {
 public:
  explicit PatchGenerator(const GeneratorOptions& options = {});

  int latent_dim() const noexcept { return options_.latent_dim; }
  int size() const noexcept { return options_.size; }
  const GeneratorOptions& options() const noexcept { return options_; }

  /// N x latent_dim -> N x 3 x size x size.
  torch::Tensor generate(const torch::Tensor& latents) const;
  torch::Tensor sample_latents(int n, std::uint64_t seed) const;

  std::vector<torch::Tensor> parameters() const;
  void set_trainable(bool trainable);
  PatchGenerator clone() const;
  std::uint64_t parameter_digest() const;

  void save(const std::filesystem::path& dir) const;
  static PatchGenerator load(const std::filesystem::path& dir);

 private:
  struct Net;
  GeneratorOptions options_;
  std::shared_ptr<Net> net_;
};

struct PretrainOptions {
  GeneratorOptions generator;
  std::size_t crops = 20000;
  int epochs = 6;
  int batch_size = 64;
  double learning_rate = 2e-3;
  double kl_weight = 1e-3;
};

/// Trains the generator as the decoder of a small VAE over random crops of
/// desk10 training images; the encoder is discarded afterwards.
PatchGenerator pretrain_generator(const PretrainOptions& options, std::vector<double>* epoch_loss = nullptr);
PatchGenerator load_or_pretrain_generator(const std::filesystem::path& dir, const PretrainOptions& options);

struct FinetuneConfig {
  int steps = 200;
  double learning_rate = 1e-3;
  int batch_size = 32;
  double dissim_weight = 1.0;
  /// Fixed latents / images / offsets used to report the initial and final loss.
  int eval_batch = 64;
  std::uint64_t seed = 0;
};

void validate(const FinetuneConfig& cfg);
nlohmann::json to_json(const FinetuneConfig& cfg);
FinetuneConfig finetune_config_from_json(const nlohmann::json& j);

struct LossTerms {
  double combined = 0.0;
  double cross_entropy = 0.0;
  /// Mean target probability of the bare patch (resized to the image size).
  double bare_target_probability = 0.0;
};

struct FinetuneResult {
  PatchGenerator generator;
  LossTerms initial;
  LossTerms final;
  std::vector<double> loss_curve;
};

/// Adjusts generator parameters only, minimising cross-entropy of patched
/// clean images toward `target` plus dissim_weight times the bare patch's
/// target probability. Throws ContractError if the classifier's parameters
/// change.
FinetuneResult finetune_generator(const PatchGenerator& generator, const Classifier& trojaned, int target,
                                  std::span<const LabeledImage> clean, const FinetuneConfig& cfg);

struct ConfusionSet {
  int target_class = 0;
  std::vector<int> members;
  std::map<int, double> scores;
  std::vector<std::string> warnings;
};

/// score(c) = mean over eval images of class c != target of
/// p_trojaned(target | x) - p_benign(target | x), accumulated in dataset order.
ConfusionSet confusion_set(const Classifier& trojaned, const Classifier& benign, std::span<const LabeledImage> eval,
                           int target, double threshold = 0.05);

struct PatchReport {
  std::size_t index = 0;  ///< position in the input list
  Image patch;
  double success_rate = 0.0;
  double mean_target_confidence = 0.0;
  int bare_class = 0;  ///< trojaned model's prediction for the bare patch
  std::optional<int> benign_bare_class;
  bool natural_trigger = false;
  std::optional<double> latent_similarity;
};

/// Scores each patch on `eval` (non-target images, seeded placements) and
/// returns reports sorted by success rate, descending and stable.
std::vector<PatchReport> select_patches(std::span<const Image> patches, const Classifier& trojaned, int target,
                                        const ConfusionSet& cset, std::span<const LabeledImage> eval,
                                        std::uint64_t seed, const Classifier* benign = nullptr);

/// cos(embed_image(patch), mean of exemplar embeddings).
double latent_similarity(const Image& patch, std::span<const LabeledImage> exemplars,
                         const EmbeddingProvider& provider);

nlohmann::json to_json(const ConfusionSet& cset);
nlohmann::json to_json(const PatchReport& report);

struct RflaConfig {
  FinetuneConfig finetune;
  int runs = 4;
  int patches_per_run = 4;
  double confusion_threshold = 0.05;
  std::uint64_t seed = 0;
};

RflaConfig rfla_config_from_json(const nlohmann::json& j);

struct RflaResult {
  std::vector<FinetuneResult> runs;
  ConfusionSet confusion;
  std::vector<PatchReport> reports;
  VisualizationSet set;
};

/// Independent seeded finetuning runs, then confusion analysis and selection.
RflaResult run_rfla(const PatchGenerator& generator, const Classifier& trojaned, const Classifier& benign, int target,
                    std::span<const LabeledImage> clean, std::span<const LabeledImage> eval,
                    const EmbeddingProvider* provider, const RflaConfig& cfg);

}  // namespace trojanscope::rfla
