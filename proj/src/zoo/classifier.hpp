// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zoo/image.hpp"

namespace trojanscope {

/// A feed-forward network expressed as an ordered list of named stages. The
/// output of every stage is addressable, so callers can split the forward pass
/// at any probe layer.
class StagedNetwork : public torch::nn::Module {
 public:
  using StageFn = std::function<torch::Tensor(const torch::Tensor&)>;

  void add_stage(std::string name, StageFn fn) { stages_.push_back({std::move(name), std::move(fn)}); }
  std::size_t stage_count() const noexcept { return stages_.size(); }
  const std::string& stage_name(std::size_t i) const { return stages_.at(i).name; }
  /// Index of the stage whose output is `layer`; throws NotFound.
  std::size_t stage_index(std::string_view layer) const;

  /// Runs stages [begin, end).
  torch::Tensor run(torch::Tensor x, std::size_t begin, std::size_t end) const;

 private:
  struct Stage {
    std::string name;
    StageFn fn;
  };
  std::vector<Stage> stages_;
};

/// Registered architecture ids: "small-resnet" (residual CNN, probe layers
/// block2 / block3 / penultimate) and "tiny-cnn" (two strided convolutions,
/// probe layers conv2 / penultimate; for tests and quick experiments).
std::vector<std::string> registered_architectures();

/// Image classifier: logits plus named-layer activations. Inference methods are
/// const and safe to call concurrently; training goes through parameters().
class Classifier {
 public:
  Classifier(std::string architecture_id, int num_classes, std::uint64_t init_seed, int width = 0);

  const std::string& architecture_id() const noexcept { return arch_; }
  int num_classes() const noexcept { return num_classes_; }
  int width() const noexcept { return width_; }
  const std::vector<std::string>& probe_layers() const noexcept { return probe_layers_; }
  bool has_probe_layer(std::string_view layer) const;

  /// Batched tensor API (N x 3 x H x W in [0,1]). Autograd flows through when
  /// the caller has gradients enabled.
  torch::Tensor logits(const torch::Tensor& batch) const;
  torch::Tensor forward_to(const torch::Tensor& batch, std::string_view layer) const;
  torch::Tensor forward_from(const torch::Tensor& activation, std::string_view layer) const;
  torch::Tensor features(const torch::Tensor& batch) const { return forward_to(batch, "penultimate"); }

  /// Single-image convenience API (inference mode, no autograd).
  std::vector<float> logits(const Image& image) const;
  std::vector<float> activations(const Image& image, std::string_view layer) const;
  std::size_t activation_dim(std::string_view layer, int height = 32, int width = 32) const;

  /// Arg-max predictions, evaluated in batches.
  std::vector<int> predict(std::span<const Image> images, std::size_t batch_size = 256) const;
  std::vector<int> predict(std::span<const LabeledImage> images, std::size_t batch_size = 256) const;
  /// Softmax probabilities, N x num_classes.
  torch::Tensor probabilities(std::span<const Image> images, std::size_t batch_size = 256) const;

  std::vector<torch::Tensor> parameters() const;
  void set_trainable(bool trainable);
  void set_training_mode(bool on);
  /// FNV digest over the raw bytes of every parameter, for bitwise-equality checks.
  std::uint64_t parameter_digest() const;

  Classifier clone() const;
  Classifier to(torch::Dtype dtype) const;
  torch::Dtype dtype() const;

  void save(const std::filesystem::path& path) const;
  void load_parameters(const std::filesystem::path& path);

  /// Pure function of the parameters; stable across runs and processes.
  std::string model_id() const;

 private:
  std::string arch_;
  int num_classes_ = 0;
  int width_ = 0;
  std::vector<std::string> probe_layers_;
  std::shared_ptr<StagedNetwork> net_;
};

}  // namespace trojanscope
