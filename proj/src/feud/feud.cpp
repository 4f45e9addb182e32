// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "feud/feud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "zoo/errors.hpp"
#include "zoo/rng.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope::feud {
using nlohmann::json;
namespace F = torch::nn::functional;

void validate(const FeudConfig& c) {
  require(c.steps > 0 && c.batch_size > 0 && c.runs > 0, "steps, batch size and runs must be positive");
  require(std::isfinite(c.step_size) && c.step_size > 0, "step size must be positive and finite");
  for (double w : {c.tv_weight, c.contrast_weight, c.dissim_weight})
    require(std::isfinite(w) && w >= 0, "FEUD weights must be finite and >= 0");
  require(c.patch_height >= 2 && c.patch_width >= 2, "patch must be at least 2x2");
}

json to_json(const FeudConfig& c) {
  return {{"steps", c.steps},
          {"step_size", c.step_size},
          {"tv_weight", c.tv_weight},
          {"contrast_weight", c.contrast_weight},
          {"dissim_weight", c.dissim_weight},
          {"patch_size", {c.patch_height, c.patch_width}},
          {"batch_size", c.batch_size},
          {"captions", c.captions},
          {"refiner", c.refiner},
          {"refiner_options", c.refiner_options},
          {"runs", c.runs},
          {"seed", c.seed}};
}

FeudConfig feud_config_from_json(const json& j) {
  FeudConfig c;
  c.steps = j.value("steps", c.steps);
  c.step_size = j.value("step_size", c.step_size);
  c.tv_weight = j.value("tv_weight", c.tv_weight);
  c.contrast_weight = j.value("contrast_weight", c.contrast_weight);
  c.dissim_weight = j.value("dissim_weight", c.dissim_weight);
  if (j.contains("patch_size")) {
    c.patch_height = j.at("patch_size").at(0).get<int>();
    c.patch_width = j.at("patch_size").at(1).get<int>();
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  c.captions = j.value("captions", c.captions);
  c.refiner = j.value("refiner", c.refiner);
  c.refiner_options = j.value("refiner_options", c.refiner_options);
  c.runs = j.value("runs", c.runs);
  c.seed = j.value("seed", c.seed);
  validate(c);
  return c;
}

double total_variation(const Image& image) {
  require(image.height() >= 2 && image.width() >= 2, "total variation needs an image of at least 2x2");
  double tv = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c) {
        if (x + 1 < image.width()) tv += std::abs(image.at(y, x + 1, c) - image.at(y, x, c));
        if (y + 1 < image.height()) tv += std::abs(image.at(y + 1, x, c) - image.at(y, x, c));
      }
  return tv;
}

torch::Tensor contrast(const torch::Tensor& patch) {
  const auto flat = patch.flatten(-2);  // (N x) C x HW
  return flat.std(-1, /*unbiased=*/false).mean();
}

torch::Tensor class_mean_features(const Classifier& model, std::span<const LabeledImage> images, int target) {
  std::vector<Image> members;
  for (const auto& item : images)
    if (item.label == target) members.push_back(item.pixels);
  if (members.empty()) throw InvalidArgument("no images of class " + std::to_string(target) + " to average");
  torch::NoGradGuard guard;
  torch::Tensor sum;
  for (std::size_t i = 0; i < members.size(); i += 256) {
    const auto chunk = std::span<const Image>(members).subspan(i, std::min<std::size_t>(256, members.size() - i));
    auto f = model.features(to_tensor(chunk).to(model.dtype())).sum(0);
    sum = sum.defined() ? sum + f : f;
  }
  return sum / static_cast<double>(members.size());
}

Estimate estimate_trojan(const Classifier& model, int target, std::span<const LabeledImage> clean,
                         const FeudConfig& cfg) {
  validate(cfg);
  require(target >= 0 && target < model.num_classes(), "target class out of range");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (clean[i].label != target) pool.push_back(i);
  require(!pool.empty(), "estimation needs clean images outside the target class");
  const int H = clean[pool[0]].pixels.height(), W = clean[pool[0]].pixels.width();
  require(cfg.patch_height < H && cfg.patch_width < W, "patch must be smaller than the images");
  const auto target_mean = class_mean_features(model, clean, target).unsqueeze(0);

  Rng rng(cfg.seed, "feud");
  torch::manual_seed(derive_seed(cfg.seed, "feud:init"));
  const auto opts = torch::TensorOptions().dtype(model.dtype());
  auto patch = (torch::rand({1, 3, cfg.patch_height, cfg.patch_width}, opts) * 0.2 + 0.4).set_requires_grad(true);
  torch::optim::Adam optimizer({patch}, torch::optim::AdamOptions(cfg.step_size));
  const auto labels = torch::full({cfg.batch_size}, target, torch::kInt64);

  Estimate out;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Image> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(clean[pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]].pixels);
    const auto offsets = random_offsets(batch.size(), H, W, cfg.patch_height, cfg.patch_width, rng);
    optimizer.zero_grad();
    const auto patched = paste_patches(to_tensor(std::span<const Image>(batch)).to(model.dtype()), patch, offsets);
    auto loss = F::cross_entropy(model.logits(patched), labels);
    if (cfg.tv_weight > 0) loss = loss + cfg.tv_weight * trojanscope::total_variation(patch);
    if (cfg.contrast_weight > 0) loss = loss - cfg.contrast_weight * contrast(patch);
    if (cfg.dissim_weight > 0) {
      const auto f = model.features(resize(patch, H, W));
      loss = loss + cfg.dissim_weight * F::cosine_similarity(f, target_mean, F::CosineSimilarityFuncOptions().dim(1)).mean();
    }
    const double value = loss.item<double>();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite FEUD loss at step " << step;
      throw NumericError(msg.str());
    }
    out.loss_curve.push_back(value);
    loss.backward();
    optimizer.step();
    torch::NoGradGuard guard;
    patch.clamp_(0.0, 1.0);
  }
  torch::NoGradGuard guard;
  const auto final_patch = patch.detach();
  out.patch = to_image(final_patch[0]);
  out.target_similarity =
      F::cosine_similarity(model.features(resize(final_patch, H, W)), target_mean, F::CosineSimilarityFuncOptions().dim(1))
          .item<double>();
  return out;
}

double transfer_asr(const Classifier& model, const Image& patch, std::span<const LabeledImage> eval, int target,
                    std::uint64_t seed) {
  std::vector<Image> patched;
  Rng rng(seed, "feud:transfer");
  for (const auto& item : eval) {
    if (item.label == target) continue;
    require(patch.height() < item.pixels.height() && patch.width() < item.pixels.width(),
            "patch must be smaller than the images");
    const auto top = rng.uniform_int(0, item.pixels.height() - patch.height());
    const auto left = rng.uniform_int(0, item.pixels.width() - patch.width());
    Image img = item.pixels;
    for (int y = 0; y < patch.height(); ++y)
      for (int x = 0; x < patch.width(); ++x)
        for (int c = 0; c < 3; ++c) img.at(static_cast<int>(top) + y, static_cast<int>(left) + x, c) = patch.at(y, x, c);
    patched.push_back(std::move(img));
  }
  if (patched.empty()) throw InvalidArgument("no non-target evaluation images");
  const auto pred = model.predict(std::span<const Image>(patched));
  return static_cast<double>(std::count(pred.begin(), pred.end(), target)) / static_cast<double>(pred.size());
}

std::vector<CaptionScore> rank_captions(const Image& patch, std::span<const std::string> captions,
                                        const EmbeddingProvider& provider) {
  require(!captions.empty(), "caption list is empty");
  const auto e = provider.embed_image(patch.channels() == 3 ? patch : patch.rgb());
  std::vector<CaptionScore> scores;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto t = provider.embed_text(captions[i]);
    require(t.size() == e.size(), "text and image embeddings differ in dimension");
    double dot = 0;
    for (std::size_t k = 0; k < e.size(); ++k) dot += static_cast<double>(e[k]) * t[k];
    scores.push_back({captions[i], dot, i});
  }
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return scores;
}

CaptionScore describe_trojan(const Image& patch, std::span<const std::string> captions,
                             const EmbeddingProvider& provider) {
  return rank_captions(patch, captions, provider).front();
}

Image BlurRefiner::refine(const Image& image, const std::string&) const {
  auto blur_axis = [this](const Image& src, bool horizontal) {
    Image out = src;
    const int len = horizontal ? src.width() : src.height();
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x)
        for (int c = 0; c < src.channels(); ++c) {
          double sum = 0;
          int n = 0;
          const int pos = horizontal ? x : y;
          for (int d = -radius_; d <= radius_; ++d) {
            const int q = pos + d;
            if (q < 0 || q >= len) continue;
            sum += horizontal ? src.at(y, q, c) : src.at(q, x, c);
            ++n;
          }
          out.at(y, x, c) = static_cast<float>(sum / n);
        }
    return out;
  };
  return blur_axis(blur_axis(image, true), false);
}

std::vector<std::string> registered_refiners() { return {"identity", "blur"}; }

std::unique_ptr<RefinerInterface> make_refiner(const std::string& name, const json& options) {
  if (name == "identity") return std::make_unique<IdentityRefiner>();
  if (name == "blur") {
    const int radius = options.is_object() ? options.value("radius", 1) : 1;
    require(radius >= 0, "blur radius must be >= 0");
    return std::make_unique<BlurRefiner>(radius);
  }
  throw NotFound("unregistered refiner: " + name);
}

Image refine_trojan(const Image& patch, const std::string& caption, const RefinerInterface& refiner) {
  Image out = refiner.refine(patch, caption);
  if (!out.same_shape(patch)) throw ContractError("refiner " + refiner.id() + " changed the image shape");
  if (!out.in_unit_range()) throw ContractError("refiner " + refiner.id() + " produced pixels outside [0,1]");
  return out;
}

FeudResult run_feud(const Classifier& model, int target, std::span<const LabeledImage> clean,
                    const EmbeddingProvider& provider, const FeudConfig& cfg) {
  validate(cfg);
  require(!cfg.captions.empty(), "FEUD needs a caption vocabulary");
  const auto refiner = make_refiner(cfg.refiner, cfg.refiner_options);
  FeudResult result;
  json stages = json::array();
  for (int run = 0; run < cfg.runs; ++run) {
    FeudConfig run_cfg = cfg;
    run_cfg.seed = derive_seed(cfg.seed, "feud:run", static_cast<std::uint64_t>(run));
    result.estimates.push_back(estimate_trojan(model, target, clean, run_cfg));
    const Estimate& est = result.estimates.back();
    result.rankings.push_back(rank_captions(est.patch, cfg.captions, provider));
    const CaptionScore& best = result.rankings.back().front();
    result.refined.push_back(refine_trojan(est.patch, best.caption, *refiner));
    if (result.set.items.size() < VisualizationSet::kMaxItems)
      result.set.items.push_back({result.refined.back(), best.caption});
    stages.push_back({{"estimation",
                       {{"seed", run_cfg.seed},
                        {"final_loss", est.loss_curve.back()},
                        {"target_similarity", est.target_similarity}}},
                      {"description", {{"provider", provider.id()}, {"caption", best.caption}, {"score", best.score}}},
                      {"refinement", {{"refiner", refiner->id()}, {"options", cfg.refiner_options}}}});
  }
  const json config = to_json(cfg);
  result.set.method_id = "feud";
  result.set.target_class = target;
  result.set.provenance = {{"config_hash", config_hash(config)},
                           {"seed", cfg.seed},
                           {"model_id", model.model_id()},
                           {"stage_order", {"estimation", "description", "refinement"}},
                           {"runs", stages}};
  return result;
}

}  // namespace trojanscope::feud
