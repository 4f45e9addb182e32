// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/classifier.hpp"

#include <algorithm>
#include <cstdio>

#include "zoo/errors.hpp"
#include "zoo/rng.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope {
namespace {

namespace nn = torch::nn;

nn::Conv2d conv3x3(int in, int out, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

torch::Tensor normalize_input(const torch::Tensor& x) { return (x - 0.5) / 0.25; }

struct NormConv {
  nn::Conv2d conv;
  nn::GroupNorm norm;
  torch::Tensor operator()(const torch::Tensor& x) { return norm->forward(conv->forward(x)); }
};

NormConv norm_conv(StagedNetwork& net, const std::string& name, int in, int out, int stride = 1) {
  return {net.register_module(name, conv3x3(in, out, stride)),
          net.register_module(name + "_gn", nn::GroupNorm(nn::GroupNormOptions(std::max(1, out / 4), out)))};
}

void build_small_resnet(StagedNetwork& net, int width, int num_classes) {
  auto stem = norm_conv(net, "stem", 3, width);
  auto b1a = norm_conv(net, "block1_a", width, width);
  auto b1b = norm_conv(net, "block1_b", width, width);
  auto down1 = norm_conv(net, "down1", width, 2 * width, 2);
  auto b2a = norm_conv(net, "block2_a", 2 * width, 2 * width);
  auto b2b = norm_conv(net, "block2_b", 2 * width, 2 * width);
  auto down2 = norm_conv(net, "down2", 2 * width, 4 * width, 2);
  auto b3a = norm_conv(net, "block3_a", 4 * width, 4 * width);
  auto b3b = norm_conv(net, "block3_b", 4 * width, 4 * width);
  auto fc = net.register_module("fc", nn::Linear(4 * width, num_classes));
  {
    // residual branches start near identity
    torch::NoGradGuard guard;
    for (auto& c : {b1b, b2b, b3b}) c.norm->weight.mul_(0.2);
  }
  auto residual = [](NormConv a, NormConv b) {
    return [a, b](const torch::Tensor& x) mutable { return torch::relu(x + b(torch::relu(a(x)))); };
  };
  net.add_stage("stem", [stem](const torch::Tensor& x) mutable { return torch::relu(stem(normalize_input(x))); });
  net.add_stage("block1", residual(b1a, b1b));
  net.add_stage("down1", [down1](const torch::Tensor& x) mutable { return torch::relu(down1(x)); });
  net.add_stage("block2", residual(b2a, b2b));
  net.add_stage("down2", [down2](const torch::Tensor& x) mutable { return torch::relu(down2(x)); });
  net.add_stage("block3", residual(b3a, b3b));
  net.add_stage("penultimate", [](const torch::Tensor& x) mutable { return x.mean({2, 3}); });
  net.add_stage("logits", [fc](const torch::Tensor& x) mutable { return fc->forward(x); });
}

void build_tiny_cnn(StagedNetwork& net, int width, int num_classes) {
  auto c1 = net.register_module("conv1", conv3x3(3, width, 2));
  auto c2 = net.register_module("conv2", conv3x3(width, 2 * width, 2));
  auto fc = net.register_module("fc", nn::Linear(2 * width, num_classes));
  net.add_stage("conv1", [c1](const torch::Tensor& x) mutable { return torch::relu(c1->forward(normalize_input(x))); });
  net.add_stage("conv2", [c2](const torch::Tensor& x) mutable { return torch::relu(c2->forward(x)); });
  net.add_stage("penultimate", [](const torch::Tensor& x) mutable { return x.mean({2, 3}); });
  net.add_stage("logits", [fc](const torch::Tensor& x) mutable { return fc->forward(x); });
}

}  // namespace

std::size_t StagedNetwork::stage_index(std::string_view layer) const {
  for (std::size_t i = 0; i < stages_.size(); ++i)
    if (stages_[i].name == layer) return i;
  throw NotFound("unknown layer: " + std::string(layer));
}

torch::Tensor StagedNetwork::run(torch::Tensor x, std::size_t begin, std::size_t end) const {
  for (std::size_t i = begin; i < end; ++i) x = stages_[i].fn(x);
  return x;
}

std::vector<std::string> registered_architectures() { return {"small-resnet", "tiny-cnn"}; }

Classifier::Classifier(std::string architecture_id, int num_classes, std::uint64_t init_seed, int width)
    : arch_(std::move(architecture_id)), num_classes_(num_classes), net_(std::make_shared<StagedNetwork>()) {
  require(num_classes >= 2, "a classifier needs at least two classes");
  torch::manual_seed(derive_seed(init_seed, "init:" + arch_));
  if (arch_ == "small-resnet") {
    width_ = width > 0 ? width : 8;
    build_small_resnet(*net_, width_, num_classes);
    probe_layers_ = {"block2", "block3", "penultimate"};
  } else if (arch_ == "tiny-cnn") {
    width_ = width > 0 ? width : 8;
    build_tiny_cnn(*net_, width_, num_classes);
    probe_layers_ = {"conv2", "penultimate"};
  } else {
    throw NotFound("unknown architecture: " + arch_);
  }
  net_->eval();
}

bool Classifier::has_probe_layer(std::string_view layer) const {
  return std::find(probe_layers_.begin(), probe_layers_.end(), layer) != probe_layers_.end();
}

torch::Tensor Classifier::logits(const torch::Tensor& batch) const {
  return net_->run(batch, 0, net_->stage_count());
}

torch::Tensor Classifier::forward_to(const torch::Tensor& batch, std::string_view layer) const {
  if (!has_probe_layer(layer)) throw NotFound("not a probe layer of " + arch_ + ": " + std::string(layer));
  return net_->run(batch, 0, net_->stage_index(layer) + 1);
}

torch::Tensor Classifier::forward_from(const torch::Tensor& activation, std::string_view layer) const {
  if (!has_probe_layer(layer)) throw NotFound("not a probe layer of " + arch_ + ": " + std::string(layer));
  return net_->run(activation, net_->stage_index(layer) + 1, net_->stage_count());
}

std::vector<float> Classifier::logits(const Image& image) const {
  torch::NoGradGuard guard;
  auto out = logits(to_tensor(image).to(dtype())).to(torch::kFloat32).contiguous();
  return {out.data_ptr<float>(), out.data_ptr<float>() + out.numel()};
}

std::vector<float> Classifier::activations(const Image& image, std::string_view layer) const {
  torch::NoGradGuard guard;
  auto out = forward_to(to_tensor(image).to(dtype()), layer).to(torch::kFloat32).contiguous();
  return {out.data_ptr<float>(), out.data_ptr<float>() + out.numel()};
}

std::size_t Classifier::activation_dim(std::string_view layer, int height, int width) const {
  torch::NoGradGuard guard;
  auto probe = torch::zeros({1, 3, height, width}, torch::TensorOptions().dtype(dtype()));
  return static_cast<std::size_t>(forward_to(probe, layer).numel());
}

std::vector<int> Classifier::predict(std::span<const Image> images, std::size_t batch_size) const {
  torch::NoGradGuard guard;
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += batch_size) {
    const auto chunk = images.subspan(i, std::min(batch_size, images.size() - i));
    auto pred = logits(to_tensor(chunk).to(dtype())).argmax(1).to(torch::kInt64).contiguous();
    for (long j = 0; j < pred.size(0); ++j) out.push_back(static_cast<int>(pred[j].item<int64_t>()));
  }
  return out;
}

std::vector<int> Classifier::predict(std::span<const LabeledImage> images, std::size_t batch_size) const {
  std::vector<Image> pixels;
  pixels.reserve(images.size());
  for (const auto& li : images) pixels.push_back(li.pixels);
  return predict(std::span<const Image>(pixels), batch_size);
}

torch::Tensor Classifier::probabilities(std::span<const Image> images, std::size_t batch_size) const {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> parts;
  for (std::size_t i = 0; i < images.size(); i += batch_size) {
    const auto chunk = images.subspan(i, std::min(batch_size, images.size() - i));
    parts.push_back(torch::softmax(logits(to_tensor(chunk).to(dtype())), 1));
  }
  return torch::cat(parts, 0);
}

std::vector<torch::Tensor> Classifier::parameters() const { return net_->parameters(); }

void Classifier::set_trainable(bool trainable) {
  for (auto& p : net_->parameters()) p.set_requires_grad(trainable);
}

void Classifier::set_training_mode(bool on) { net_->train(on); }

std::uint64_t Classifier::parameter_digest() const { return tensor_digest(net_->parameters()); }

Classifier Classifier::clone() const {
  Classifier copy(arch_, num_classes_, 0, width_);
  torch::NoGradGuard guard;
  copy.net_->to(dtype());
  auto dst = copy.net_->parameters();
  auto src = net_->parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].set_requires_grad(src[i].requires_grad());
  return copy;
}

Classifier Classifier::to(torch::Dtype dtype) const {
  Classifier copy = clone();
  copy.net_->to(dtype);
  return copy;
}

torch::Dtype Classifier::dtype() const {
  const auto params = net_->parameters();
  return params.empty() ? torch::kFloat32 : params.front().scalar_type();
}

void Classifier::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  net_->save(archive);
  archive.save_to(path.string());
}

void Classifier::load_parameters(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IngestionError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  net_->load(archive);
  net_->eval();
}

std::string Classifier::model_id() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(parameter_digest()));
  return arch_ + "@" + buf;
}

}  // namespace trojanscope
