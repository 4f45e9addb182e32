// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "protogen/prototypes.hpp"

#include <cmath>
#include <sstream>

#include "zoo/errors.hpp"
#include "zoo/rng.hpp"

namespace trojanscope::protogen {
using nlohmann::json;

namespace {

double batch_mean_objective(const Classifier& model, const torch::Tensor& x, int target) {
  torch::NoGradGuard guard;
  return cosine_objective(model.logits(x), target).mean().item<double>();
}

}  // namespace

void validate(const SynthesisConfig& cfg) {
  require(cfg.steps > 0, "synthesis needs steps > 0");
  require(cfg.batch_size >= 1, "synthesis batch size must be at least 1");
  require(std::isfinite(cfg.step_size) && cfg.step_size > 0, "step size must be positive and finite");
  require(std::isfinite(cfg.hf_weight) && cfg.hf_weight >= 0, "hf_weight must be finite and >= 0");
  require(std::isfinite(cfg.diversity_weight) && cfg.diversity_weight >= 0, "diversity_weight must be finite and >= 0");
  require(cfg.height >= 2 && cfg.width >= 2, "prototype size must be at least 2x2");
}

json to_json(const SynthesisConfig& c) {
  return {{"steps", c.steps},
          {"step_size", c.step_size},
          {"batch_size", c.batch_size},
          {"hf_weight", c.hf_weight},
          {"diversity_weight", c.diversity_weight},
          {"affine",
           {{"translate", c.affine.translate},
            {"rotate_deg", c.affine.rotate_deg},
            {"scale", {c.affine.scale_lo, c.affine.scale_hi}}}},
          {"seed", c.seed},
          {"size", {c.height, c.width}}};
}

SynthesisConfig synthesis_config_from_json(const json& j) {
  SynthesisConfig c;
  c.steps = j.value("steps", c.steps);
  c.step_size = j.value("step_size", c.step_size);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.hf_weight = j.value("hf_weight", c.hf_weight);
  c.diversity_weight = j.value("diversity_weight", c.diversity_weight);
  c.seed = j.value("seed", c.seed);
  if (j.contains("affine")) {
    const auto& a = j.at("affine");
    c.affine.translate = a.value("translate", c.affine.translate);
    c.affine.rotate_deg = a.value("rotate_deg", c.affine.rotate_deg);
    if (a.contains("scale")) {
      c.affine.scale_lo = a.at("scale").at(0).get<double>();
      c.affine.scale_hi = a.at("scale").at(1).get<double>();
    }
  }
  if (j.contains("size")) {
    c.height = j.at("size").at(0).get<int>();
    c.width = j.at("size").at(1).get<int>();
  }
  validate(c);
  return c;
}

double cosine_objective(std::span<const double> logits, int target) {
  require(target >= 0 && static_cast<std::size_t>(target) < logits.size(), "target class out of range");
  double norm2 = 0;
  for (double z : logits) norm2 += z * z;
  require(norm2 > 0 && std::isfinite(norm2), "cosine objective undefined for a zero logit vector");
  return logits[target] / std::sqrt(norm2);
}

torch::Tensor cosine_objective(const torch::Tensor& logits, int target) {
  require(logits.dim() == 2 && target >= 0 && target < logits.size(1), "target class out of range");
  return logits.select(1, target) / logits.norm(2, 1).clamp_min(1e-12);
}

double diversity_penalty(const std::vector<std::vector<double>>& features) {
  const std::size_t n = features.size();
  if (n < 2) return 0.0;
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (double v : features[i]) s += v * v;
    norms[i] = std::sqrt(s);
  }
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      require(features[i].size() == features[j].size(), "feature vectors differ in length");
      if (norms[i] == 0 || norms[j] == 0) continue;
      double dot = 0;
      for (std::size_t k = 0; k < features[i].size(); ++k) dot += features[i][k] * features[j][k];
      sum += dot / (norms[i] * norms[j]);
    }
  }
  return sum / (static_cast<double>(n * (n - 1)) / 2.0);
}

torch::Tensor diversity_penalty(const torch::Tensor& features) {
  const auto n = features.size(0);
  if (n < 2) return torch::zeros({}, features.options());
  const auto unit = features / features.norm(2, 1, true).clamp_min(1e-12);
  const auto gram = unit.matmul(unit.t());
  const auto off_diagonal = gram.sum() - gram.diagonal().sum();
  return off_diagonal / static_cast<double>(n * (n - 1));
}

SynthesisResult generate_prototypes(const Classifier& model, int target, const SynthesisConfig& cfg) {
  validate(cfg);
  require(target >= 0 && target < model.num_classes(), "target class out of range");
  Rng rng(cfg.seed, "protogen");
  torch::manual_seed(derive_seed(cfg.seed, "protogen:init"));
  auto opts = torch::TensorOptions().dtype(model.dtype());
  auto pixels = (torch::rand({cfg.batch_size, 3, cfg.height, cfg.width}, opts) * 0.2 + 0.4).set_requires_grad(true);

  SynthesisResult result;
  result.initial_objective = batch_mean_objective(model, pixels.detach(), target);
  torch::optim::Adam optimizer({pixels}, torch::optim::AdamOptions(cfg.step_size));
  for (int step = 0; step < cfg.steps; ++step) {
    optimizer.zero_grad();
    const auto warped = random_affine(pixels, cfg.affine, rng);
    const auto features = model.features(warped);
    const auto logits = model.forward_from(features, "penultimate");
    auto loss = -cosine_objective(logits, target).mean();
    if (cfg.hf_weight > 0) loss = loss + cfg.hf_weight * total_variation(pixels) / cfg.batch_size;
    if (cfg.diversity_weight > 0) loss = loss + cfg.diversity_weight * diversity_penalty(features);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite synthesis loss at step " << step;
      throw NumericError(msg.str());
    }
    result.loss_curve.push_back(value);
    loss.backward();
    optimizer.step();
    torch::NoGradGuard guard;
    pixels.clamp_(0.0, 1.0);
  }

  const auto final_pixels = pixels.detach();
  {
    torch::NoGradGuard guard;
    const auto cos = cosine_objective(model.logits(final_pixels), target).to(torch::kFloat64).contiguous();
    result.per_item_objective.assign(cos.data_ptr<double>(), cos.data_ptr<double>() + cos.numel());
    result.final_objective = cos.mean().item<double>();
    result.final_diversity = diversity_penalty(model.features(final_pixels)).item<double>();
  }
  result.set.method_id = "prototype-generation";
  result.set.target_class = target;
  const json config = to_json(cfg);
  result.set.provenance = {{"config_hash", config_hash(config)},
                           {"seed", cfg.seed},
                           {"config", config},
                           {"model_id", model.model_id()},
                           {"initial_objective", result.initial_objective},
                           {"final_objective", result.final_objective}};
  for (int i = 0; i < cfg.batch_size; ++i) {
    result.prototypes.push_back(to_image(final_pixels[i]));
    if (result.set.items.size() < VisualizationSet::kMaxItems)
      result.set.items.push_back({result.prototypes.back(), {}});
  }
  return result;
}

}  // namespace trojanscope::protogen
