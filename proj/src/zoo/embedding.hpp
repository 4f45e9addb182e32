// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zoo/classifier.hpp"
#include "zoo/image.hpp"

namespace trojanscope {

/// Joint text-image encoder. Both towers return unit-L2 vectors of dim().
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<float> embed_image(const Image& image) const = 0;
  virtual std::vector<float> embed_text(std::string_view text) const = 0;
  virtual std::vector<std::vector<float>> embed_images(std::span<const Image> images) const;
};

/// Lower-case, trim, collapse internal whitespace.
std::string normalize_text(std::string_view text);

/// Deterministic pseudo-random unit vector keyed by the normalized text.
std::vector<float> hashed_unit_vector(std::string_view text, int dim);

/// Cheap deterministic provider: a fixed random projection of 4x4 average-pooled
/// pixels; text goes through hashed_unit_vector. Not semantically aligned, used
/// where only the algebra matters.
class PixelHashProvider final : public EmbeddingProvider {
 public:
  explicit PixelHashProvider(int dim = 16, std::uint64_t seed = 7);
  std::string id() const override { return "pixel-hash"; }
  int dim() const override { return dim_; }
  std::vector<float> embed_image(const Image& image) const override;
  std::vector<float> embed_text(std::string_view text) const override;

 private:
  int dim_;
  std::vector<float> projection_;  // dim x 48
};

struct JointEncoderOptions {
  int dim = 64;
  int width = 16;
  std::size_t scenes = 40000;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 3e-3;
  double logit_scale = 10.0;
  std::uint64_t seed = 1;
};

/// Small contrastively aligned encoder pretrained on captioned desk scenes.
/// Text embeddings of library concepts are the learned concept directions
/// (zero-shot classifier rows); other text falls back to matching words, then
/// to a hashed vector.
class JointEncoder final : public EmbeddingProvider {
 public:
  static JointEncoder train(const JointEncoderOptions& options);
  static JointEncoder load(const std::filesystem::path& dir);
  /// Loads `dir` when it holds a checkpoint with matching options, otherwise
  /// trains and saves there.
  static JointEncoder load_or_train(const std::filesystem::path& dir, const JointEncoderOptions& options);

  void save(const std::filesystem::path& dir) const;

  std::string id() const override;
  int dim() const override { return options_.dim; }
  std::vector<float> embed_image(const Image& image) const override;
  std::vector<float> embed_text(std::string_view text) const override;
  std::vector<std::vector<float>> embed_images(std::span<const Image> images) const override;

  const std::vector<std::string>& concepts() const noexcept { return concepts_; }
  /// Mean average precision of zero-shot concept retrieval on held-out scenes.
  double evaluate(std::size_t scenes, std::uint64_t seed) const;

 private:
  JointEncoder(JointEncoderOptions options, Classifier trunk, torch::Tensor table, torch::Tensor bias);
  torch::Tensor embed_batch(const torch::Tensor& batch) const;

  JointEncoderOptions options_;
  Classifier trunk_;
  torch::Tensor table_;  // concepts x dim, rows unit-norm
  torch::Tensor bias_;
  std::vector<std::string> concepts_;
};

}  // namespace trojanscope
