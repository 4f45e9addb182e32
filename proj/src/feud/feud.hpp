// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoo/classifier.hpp"
#include "zoo/embedding.hpp"
#include "zoo/visualization.hpp"

namespace trojanscope::feud {

struct FeudConfig {
  int steps = 300;
  double step_size = 0.05;
  double tv_weight = 1e-3;
  double contrast_weight = 0.1;
  double dissim_weight = 1.0;
  int patch_height = 10;
  int patch_width = 10;
  /// Clean images per optimisation step.
  int batch_size = 32;
  std::vector<std::string> captions;
  std::string refiner = "identity";
  nlohmann::json refiner_options = nlohmann::json::object();
  /// Independent estimation restarts; each contributes one visualization item.
  int runs = 1;
  std::uint64_t seed = 0;
};

void validate(const FeudConfig& cfg);
nlohmann::json to_json(const FeudConfig& cfg);
FeudConfig feud_config_from_json(const nlohmann::json& j);

/// Anisotropic L1 total variation summed over channels.
double total_variation(const Image& image);

/// Mean over channels of the per-channel pixel standard deviation.
torch::Tensor contrast(const torch::Tensor& patch);

/// Mean penultimate feature of the images labelled `target`.
torch::Tensor class_mean_features(const Classifier& model, std::span<const LabeledImage> images, int target);

struct Estimate {
  Image patch;
  std::vector<double> loss_curve;
  /// cos(features(bare patch), class-mean features of the target) at the end.
  double target_similarity = 0.0;
};

/// Optimises a patch pasted at random placements onto non-target images of
/// `clean` to maximise the target likelihood, with TV, contrast and
/// anti-target-resemblance terms. `clean` must contain target-class images
/// (for the class mean) and at least one other class.
Estimate estimate_trojan(const Classifier& model, int target, std::span<const LabeledImage> clean,
                         const FeudConfig& cfg);

/// Fraction of non-target `eval` images classified as `target` once `patch`
/// is pasted at a seeded random placement.
double transfer_asr(const Classifier& model, const Image& patch, std::span<const LabeledImage> eval, int target,
                    std::uint64_t seed);

struct CaptionScore {
  std::string caption;
  double score = 0.0;
  std::size_t index = 0;
};

/// Argmax of <embed_image(patch), embed_text(caption)>; the first index wins ties.
CaptionScore describe_trojan(const Image& patch, std::span<const std::string> captions,
                             const EmbeddingProvider& provider);

/// Every caption with its score, best first; ties keep list order.
std::vector<CaptionScore> rank_captions(const Image& patch, std::span<const std::string> captions,
                                        const EmbeddingProvider& provider);

class RefinerInterface {
 public:
  virtual ~RefinerInterface() = default;
  virtual std::string id() const = 0;
  virtual Image refine(const Image& image, const std::string& caption) const = 0;
};

class IdentityRefiner final : public RefinerInterface {
 public:
  std::string id() const override { return "identity"; }
  Image refine(const Image& image, const std::string&) const override { return image; }
};

/// Separable box blur; a cheap stand-in for a generative refiner.
class BlurRefiner final : public RefinerInterface {
 public:
  explicit BlurRefiner(int radius = 1) : radius_(radius) {}
  std::string id() const override { return "blur"; }
  Image refine(const Image& image, const std::string& caption) const override;

 private:
  int radius_;
};

/// Built-in refiners by name: "identity", "blur" ({"radius": r}).
std::unique_ptr<RefinerInterface> make_refiner(const std::string& name, const nlohmann::json& options = {});
std::vector<std::string> registered_refiners();

/// Runs the refiner and checks its output keeps the input shape and [0,1].
Image refine_trojan(const Image& patch, const std::string& caption, const RefinerInterface& refiner);

struct FeudResult {
  std::vector<Estimate> estimates;
  std::vector<std::vector<CaptionScore>> rankings;
  std::vector<Image> refined;
  VisualizationSet set;
};

/// Estimation, then description, then refinement, once per configured run.
FeudResult run_feud(const Classifier& model, int target, std::span<const LabeledImage> clean,
                    const EmbeddingProvider& provider, const FeudConfig& cfg);

}  // namespace trojanscope::feud
