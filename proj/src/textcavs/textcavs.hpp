// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zoo/classifier.hpp"
#include "zoo/embedding.hpp"
#include "zoo/visualization.hpp"

namespace trojanscope::textcavs {

/// Ordered, non-empty, unique after case-folding.
struct ConceptVocabulary {
  std::vector<std::string> concepts;
};

ConceptVocabulary make_vocabulary(std::vector<std::string> concepts);
/// One concept per line; blank lines and '#' comments are skipped.
ConceptVocabulary load_vocabulary(const std::filesystem::path& path);

/// activation ~= W * embedding + b, fitted over a probe set.
struct LinearMap {
  Eigen::MatrixXd W;  ///< activation_dim x embedding_dim
  Eigen::VectorXd b;
  std::string layer;
  double ridge = 0.0;
  /// Mean squared error per activation entry over the probe.
  double residual = 0.0;
  /// Mean per-entry variance of the probe activations (the mean predictor's error).
  double activation_variance = 0.0;
  Eigen::VectorXd mean_embedding;
};

/// Closed-form ridge regression on centred data: minimises
/// mean ||W e + b - a||^2 + ridge * ||W||_F^2. Throws on identical embeddings,
/// and on a rank-deficient design when ridge is zero.
LinearMap fit_linear_map(std::span<const std::vector<float>> embeddings,
                         std::span<const std::vector<float>> activations, double ridge, std::string layer = {});

LinearMap fit_linear_map(std::span<const LabeledImage> probe, const EmbeddingProvider& provider,
                         const Classifier& model, const std::string& layer, double ridge = 1e-3);

/// W e + b, summed left to right in double.
Eigen::VectorXd apply(const LinearMap& map, const Eigen::VectorXd& embedding);

/// apply(map, embed_text(concept)) - apply(map, mean probe embedding).
Eigen::VectorXd concept_vector(const LinearMap& map, const std::string& concept_name,
                               const EmbeddingProvider& provider);

/// Per-image gradient of the class logit w.r.t. the flattened layer
/// activations, N x activation_dim.
Eigen::MatrixXd class_gradients(const Classifier& model, const std::string& layer, int cls,
                                std::span<const LabeledImage> probe);

/// Mean over the probe of <v, d logit_cls / d activation>.
double class_sensitivity(const Classifier& model, const std::string& layer, const Eigen::VectorXd& v, int cls,
                         std::span<const LabeledImage> probe);

struct SensitivityTable {
  std::string model_id;
  std::string layer;
  std::vector<std::string> concepts;
  std::vector<int> classes;
  /// scores(i, j): concept i, class classes[j].
  Eigen::MatrixXd scores;

  double at(const std::string& concept_name, int cls) const;
};

SensitivityTable score_concepts(const Classifier& model, const LinearMap& map, const EmbeddingProvider& provider,
                                const ConceptVocabulary& vocab, std::span<const int> classes,
                                std::span<const LabeledImage> probe);

struct TextCavsOptions {
  std::string layer = "penultimate";
  double ridge = 1e-3;
};

struct RankedConcept {
  std::string concept_name;
  double delta = 0.0;
};

/// Top-k of (trojaned score - benign score), descending, ties in vocabulary
/// order. `probe` both fits each model's map and supplies the gradients.
std::vector<RankedConcept> rank_concepts_differential(const Classifier& trojaned, const Classifier& benign,
                                                      const ConceptVocabulary& vocab, int cls, std::size_t k,
                                                      std::span<const LabeledImage> probe,
                                                      const EmbeddingProvider& provider,
                                                      const TextCavsOptions& options = {});

/// Top-k by differential score from two precomputed tables over the same
/// concepts and classes.
std::vector<RankedConcept> rank_differential(const SensitivityTable& trojaned, const SensitivityTable& benign,
                                             int cls, std::size_t k);

/// The ranked list as a caption-only visualization set.
VisualizationSet caption_set(const std::vector<RankedConcept>& ranked, int cls, const nlohmann::json& provenance);

}  // namespace trojanscope::textcavs
