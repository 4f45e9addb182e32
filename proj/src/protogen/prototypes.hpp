// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoo/classifier.hpp"
#include "zoo/tensor_ops.hpp"
#include "zoo/visualization.hpp"

namespace trojanscope::protogen {

struct SynthesisConfig {
  int steps = 256;
  double step_size = 0.05;
  int batch_size = 10;
  /// Weight of the total-variation high-frequency penalty.
  double hf_weight = 1e-3;
  double diversity_weight = 0.0;
  AffineRange affine;
  std::uint64_t seed = 0;
  int height = 32;
  int width = 32;
};

void validate(const SynthesisConfig& cfg);
nlohmann::json to_json(const SynthesisConfig& cfg);
SynthesisConfig synthesis_config_from_json(const nlohmann::json& j);

/// Cosine between `logits` and one-hot(target). Throws on a zero vector.
double cosine_objective(std::span<const double> logits, int target);

/// Row-wise version for an N x C logit tensor; returns N values. Rows of
/// norm zero are treated as norm 1e-12 so gradients stay finite.
torch::Tensor cosine_objective(const torch::Tensor& logits, int target);

/// Mean pairwise cosine similarity across the rows of `features`; 0 for a
/// single row. Zero rows count as orthogonal to everything.
double diversity_penalty(const std::vector<std::vector<double>>& features);
torch::Tensor diversity_penalty(const torch::Tensor& features);

struct SynthesisResult {
  VisualizationSet set;
  std::vector<Image> prototypes;
  /// Mean cosine objective over the batch on untransformed pixels.
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::vector<double> per_item_objective;
  std::vector<double> loss_curve;
  /// Mean pairwise penultimate-feature similarity of the final batch.
  double final_diversity = 0.0;
};

/// Direct pixel ascent on the cosine objective: each step warps the current
/// batch with a fresh random affine transform and minimises
/// -cos + hf_weight * TV + diversity_weight * diversity, then clamps to [0,1].
SynthesisResult generate_prototypes(const Classifier& model, int target, const SynthesisConfig& cfg);

}  // namespace trojanscope::protogen
