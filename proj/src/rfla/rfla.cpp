// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "rfla/rfla.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "zoo/datasets.hpp"
#include "zoo/errors.hpp"
#include "zoo/rng.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope::rfla {
namespace nn = torch::nn;
namespace F = torch::nn::functional;
using nlohmann::json;

struct PatchGenerator::Net : nn::Module {
  Net(const GeneratorOptions& o) : base(o.size / 4), channels(4 * o.width) {
    fc = register_module("fc", nn::Linear(o.latent_dim, channels * base * base));
    up1 = register_module("up1", nn::Conv2d(nn::Conv2dOptions(channels, 2 * o.width, 3).padding(1)));
    up2 = register_module("up2", nn::Conv2d(nn::Conv2dOptions(2 * o.width, o.width, 3).padding(1)));
    out = register_module("out", nn::Conv2d(nn::Conv2dOptions(o.width, 3, 3).padding(1)));
  }

  torch::Tensor forward(const torch::Tensor& z) {
    auto x = torch::relu(fc->forward(z)).view({z.size(0), channels, base, base});
    const auto up = F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest);
    x = torch::relu(up1->forward(F::interpolate(x, up)));
    x = torch::relu(up2->forward(F::interpolate(x, up)));
    return torch::sigmoid(out->forward(x));
  }

  int base;
  int channels;
  nn::Linear fc{nullptr};
  nn::Conv2d up1{nullptr}, up2{nullptr}, out{nullptr};
};

namespace {

void check_options(const GeneratorOptions& o) {
  require(o.latent_dim > 0 && o.width > 0, "generator latent dim and width must be positive");
  require(o.size >= 4 && o.size % 4 == 0, "generator size must be a positive multiple of 4");
}

json options_json(const GeneratorOptions& o) {
  return {{"latent_dim", o.latent_dim}, {"width", o.width}, {"size", o.size}, {"seed", o.seed}};
}

/// VAE encoder used only while pretraining.
struct Encoder : nn::Module {
  Encoder(const GeneratorOptions& o) {
    c1 = register_module("c1", nn::Conv2d(nn::Conv2dOptions(3, o.width, 3).stride(2).padding(1)));
    c2 = register_module("c2", nn::Conv2d(nn::Conv2dOptions(o.width, 2 * o.width, 3).stride(2).padding(1)));
    head = register_module("head", nn::Linear(2 * o.width * (o.size / 4) * (o.size / 4), 2 * o.latent_dim));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return head->forward(torch::relu(c2->forward(torch::relu(c1->forward(x)))).flatten(1));
  }
  nn::Conv2d c1{nullptr}, c2{nullptr};
  nn::Linear head{nullptr};
};

struct Sample {
  std::vector<Image> images;
  std::vector<std::pair<int, int>> offsets;
  torch::Tensor latents;
};

Sample draw_sample(std::span<const LabeledImage> clean, const std::vector<std::size_t>& pool, int n, int patch,
                   const PatchGenerator& gen, Rng& rng) {
  Sample s;
  for (int i = 0; i < n; ++i)
    s.images.push_back(clean[pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]].pixels);
  const int H = s.images.front().height(), W = s.images.front().width();
  s.offsets = random_offsets(s.images.size(), H, W, patch, patch, rng);
  s.latents = gen.sample_latents(n, rng.next());
  return s;
}

struct LossTensors {
  torch::Tensor combined, ce, bare;
};

LossTensors loss_terms(const PatchGenerator& gen, const Classifier& model, int target, const Sample& s,
                       double dissim_weight) {
  const int H = s.images.front().height(), W = s.images.front().width();
  const auto patches = gen.generate(s.latents).to(model.dtype());
  const auto patched = paste_patches(to_tensor(std::span<const Image>(s.images)).to(model.dtype()), patches, s.offsets);
  const auto labels = torch::full({patches.size(0)}, target, torch::kInt64);
  LossTensors t;
  t.ce = F::cross_entropy(model.logits(patched), labels);
  t.bare = torch::softmax(model.logits(resize(patches, H, W)), 1).select(1, target).mean();
  t.combined = t.ce + dissim_weight * t.bare;
  return t;
}

LossTerms to_terms(const LossTensors& t) {
  return {t.combined.item<double>(), t.ce.item<double>(), t.bare.item<double>()};
}

}  // namespace

PatchGenerator::PatchGenerator(const GeneratorOptions& options) : options_(options) {
  check_options(options_);
  torch::manual_seed(derive_seed(options_.seed, "generator:init"));
  net_ = std::make_shared<Net>(options_);
  net_->eval();
}

torch::Tensor PatchGenerator::generate(const torch::Tensor& latents) const {
  require(latents.dim() == 2 && latents.size(1) == options_.latent_dim, "latents must be N x latent_dim");
  return net_->forward(latents);
}

torch::Tensor PatchGenerator::sample_latents(int n, std::uint64_t seed) const {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::randn({n, options_.latent_dim}, gen);
}

std::vector<torch::Tensor> PatchGenerator::parameters() const { return net_->parameters(); }

void PatchGenerator::set_trainable(bool trainable) {
  for (auto& p : net_->parameters()) p.set_requires_grad(trainable);
}

PatchGenerator PatchGenerator::clone() const {
  PatchGenerator copy(options_);
  torch::NoGradGuard guard;
  auto dst = copy.net_->parameters();
  auto src = net_->parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
  return copy;
}

std::uint64_t PatchGenerator::parameter_digest() const { return tensor_digest(net_->parameters()); }

void PatchGenerator::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  torch::serialize::OutputArchive archive;
  net_->save(archive);
  archive.save_to((dir / "generator.pt").string());
  std::ofstream out(dir / "generator.json");
  if (!out) throw IoError("cannot write generator manifest in " + dir.string());
  out << json{{"format", "trojanscope-patch-generator"}, {"version", 1}, {"options", options_json(options_)}}.dump(2)
      << '\n';
}

PatchGenerator PatchGenerator::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "generator.json");
  if (!in) throw IngestionError("generator checkpoint not found: " + (dir / "generator.json").string());
  GeneratorOptions o;
  try {
    const auto meta = json::parse(in).at("options");
    o.latent_dim = meta.at("latent_dim").get<int>();
    o.width = meta.at("width").get<int>();
    o.size = meta.at("size").get<int>();
    o.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw IngestionError("malformed generator manifest in " + dir.string() + ": " + e.what());
  }
  PatchGenerator gen(o);
  torch::serialize::InputArchive archive;
  archive.load_from((dir / "generator.pt").string());
  gen.net_->load(archive);
  gen.net_->eval();
  return gen;
}

PatchGenerator pretrain_generator(const PretrainOptions& options, std::vector<double>* epoch_loss) {
  require(options.crops > 0 && options.epochs > 0 && options.batch_size > 0, "pretraining sizes must be positive");
  PatchGenerator gen(options.generator);
  const int s = options.generator.size;
  torch::manual_seed(derive_seed(options.generator.seed, "generator:encoder"));
  auto encoder = std::make_shared<Encoder>(options.generator);

  Rng rng(options.generator.seed, "generator:crops");
  const auto info = dataset_info("desk10");
  std::vector<Image> crops;
  crops.reserve(options.crops);
  for (std::size_t i = 0; i < options.crops; ++i) {
    const auto src = render_desk10(Split::kTrain, static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(info.train_size) - 1)));
    const int side = static_cast<int>(rng.uniform_int(s, src.pixels.height()));
    const int top = static_cast<int>(rng.uniform_int(0, src.pixels.height() - side));
    const int left = static_cast<int>(rng.uniform_int(0, src.pixels.width() - side));
    Image crop(side, side, 3);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int c = 0; c < 3; ++c) crop.at(y, x, c) = src.pixels.at(top + y, left + x, c);
    crops.push_back(resize_bilinear(crop, s, s));
  }

  auto params = gen.parameters();
  for (auto& p : encoder->parameters()) params.push_back(p);
  for (auto& p : params) p.set_requires_grad(true);
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(options.learning_rate));
  std::vector<std::size_t> order(crops.size());
  std::iota(order.begin(), order.end(), 0);
  const int L = options.generator.latent_dim;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double sum = 0;
    for (std::size_t lo = 0; lo < crops.size(); lo += options.batch_size) {
      const std::size_t hi = std::min(crops.size(), lo + options.batch_size);
      std::vector<Image> batch;
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(crops[order[i]]);
      const auto x = to_tensor(std::span<const Image>(batch));
      optimizer.zero_grad();
      const auto stats = encoder->forward(x);
      const auto mu = stats.narrow(1, 0, L), logvar = stats.narrow(1, L, L).clamp(-8, 8);
      const auto z = mu + torch::randn_like(mu) * torch::exp(0.5 * logvar);
      const auto recon = F::mse_loss(gen.generate(z), x);
      const auto kl = -0.5 * (1 + logvar - mu.pow(2) - logvar.exp()).sum(1).mean();
      const auto loss = recon + options.kl_weight * kl;
      const double value = loss.item<double>();
      require<NumericError>(std::isfinite(value), "non-finite generator pretraining loss at epoch " + std::to_string(epoch));
      loss.backward();
      optimizer.step();
      sum += value * static_cast<double>(hi - lo);
    }
    if (epoch_loss) epoch_loss->push_back(sum / static_cast<double>(crops.size()));
  }
  gen.set_trainable(false);
  return gen;
}

PatchGenerator load_or_pretrain_generator(const std::filesystem::path& dir, const PretrainOptions& options) {
  if (std::filesystem::exists(dir / "generator.json")) {
    PatchGenerator gen = PatchGenerator::load(dir);
    const auto& o = gen.options();
    const auto& want = options.generator;
    if (o.latent_dim == want.latent_dim && o.width == want.width && o.size == want.size && o.seed == want.seed)
      return gen;
  }
  PatchGenerator gen = pretrain_generator(options);
  gen.save(dir);
  return gen;
}

void validate(const FinetuneConfig& c) {
  require(c.steps > 0 && c.batch_size > 0 && c.eval_batch > 0, "finetune steps and batch sizes must be positive");
  require(std::isfinite(c.learning_rate) && c.learning_rate > 0, "learning rate must be positive and finite");
  require(std::isfinite(c.dissim_weight) && c.dissim_weight >= 0, "dissim_weight must be finite and >= 0");
}

json to_json(const FinetuneConfig& c) {
  return {{"steps", c.steps},         {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"dissim_weight", c.dissim_weight}, {"eval_batch", c.eval_batch},       {"seed", c.seed}};
}

FinetuneConfig finetune_config_from_json(const json& j) {
  FinetuneConfig c;
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.dissim_weight = j.value("dissim_weight", c.dissim_weight);
  c.eval_batch = j.value("eval_batch", c.eval_batch);
  c.seed = j.value("seed", c.seed);
  validate(c);
  return c;
}

FinetuneResult finetune_generator(const PatchGenerator& generator, const Classifier& trojaned, int target,
                                  std::span<const LabeledImage> clean, const FinetuneConfig& cfg) {
  validate(cfg);
  require(target >= 0 && target < trojaned.num_classes(), "target class out of range");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (clean[i].label != target) pool.push_back(i);
  require(!pool.empty(), "finetuning needs clean images outside the target class");
  require(generator.size() < clean[pool[0]].pixels.height() && generator.size() < clean[pool[0]].pixels.width(),
          "generator output must be smaller than the images");

  const std::uint64_t frozen = trojaned.parameter_digest();
  FinetuneResult result{generator.clone(), {}, {}, {}};
  PatchGenerator& gen = result.generator;
  gen.set_trainable(true);
  Rng rng(cfg.seed, "rfla:finetune");
  Rng eval_rng(cfg.seed, "rfla:eval");
  const Sample eval = draw_sample(clean, pool, cfg.eval_batch, gen.size(), gen, eval_rng);
  {
    torch::NoGradGuard guard;
    result.initial = to_terms(loss_terms(gen, trojaned, target, eval, cfg.dissim_weight));
  }

  torch::optim::Adam optimizer(gen.parameters(), torch::optim::AdamOptions(cfg.learning_rate));
  for (int step = 0; step < cfg.steps; ++step) {
    const Sample batch = draw_sample(clean, pool, cfg.batch_size, gen.size(), gen, rng);
    optimizer.zero_grad();
    const auto terms = loss_terms(gen, trojaned, target, batch, cfg.dissim_weight);
    const double value = terms.combined.item<double>();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite generator loss at step " << step;
      throw NumericError(msg.str());
    }
    result.loss_curve.push_back(value);
    terms.combined.backward();
    optimizer.step();
  }
  gen.set_trainable(false);
  {
    torch::NoGradGuard guard;
    result.final = to_terms(loss_terms(gen, trojaned, target, eval, cfg.dissim_weight));
  }
  if (trojaned.parameter_digest() != frozen)
    throw ContractError("classifier parameters changed during generator finetuning");
  return result;
}

ConfusionSet confusion_set(const Classifier& trojaned, const Classifier& benign, std::span<const LabeledImage> eval,
                           int target, double threshold) {
  require(!eval.empty(), "evaluation set is empty");
  require(threshold > 0, "confusion threshold must be positive");
  require(target >= 0 && target < trojaned.num_classes() && trojaned.num_classes() == benign.num_classes(),
          "target out of range or models disagree on the class count");
  std::vector<Image> images;
  images.reserve(eval.size());
  for (const auto& e : eval) images.push_back(e.pixels);
  const auto pt = trojaned.probabilities(images).select(1, target).to(torch::kFloat64).contiguous();
  const auto pb = benign.probabilities(images).select(1, target).to(torch::kFloat64).contiguous();
  const double* t = pt.data_ptr<double>();
  const double* b = pb.data_ptr<double>();

  const int k = trojaned.num_classes();
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const int c = eval[i].label;
    require(c >= 0 && c < k, "evaluation label out of range");
    sum[c] += t[i] - b[i];
    ++count[c];
  }
  ConfusionSet cset;
  cset.target_class = target;
  for (int c = 0; c < k; ++c) {
    if (c == target) continue;
    if (count[c] == 0) {
      cset.warnings.push_back("class " + std::to_string(c) + " absent from the evaluation set; skipped");
      continue;
    }
    cset.scores[c] = sum[c] / static_cast<double>(count[c]);
    if (cset.scores[c] >= threshold) cset.members.push_back(c);
  }
  return cset;
}

double latent_similarity(const Image& patch, std::span<const LabeledImage> exemplars,
                         const EmbeddingProvider& provider) {
  require(!exemplars.empty(), "exemplar list is empty");
  std::vector<Image> images;
  for (const auto& e : exemplars) images.push_back(e.pixels);
  const auto embs = provider.embed_images(images);
  std::vector<double> mean(static_cast<std::size_t>(provider.dim()), 0.0);
  for (const auto& e : embs)
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += e[k];
  const auto p = provider.embed_image(patch.channels() == 3 ? patch : patch.rgb());
  double dot = 0, nm = 0, np = 0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    dot += p[k] * mean[k];
    nm += mean[k] * mean[k];
    np += static_cast<double>(p[k]) * p[k];
  }
  if (nm == 0 || np == 0) return 0.0;
  return std::clamp(dot / std::sqrt(nm * np), -1.0, 1.0);
}

std::vector<PatchReport> select_patches(std::span<const Image> patches, const Classifier& trojaned, int target,
                                        const ConfusionSet& cset, std::span<const LabeledImage> eval,
                                        std::uint64_t seed, const Classifier* benign) {
  require(!patches.empty(), "patch list is empty");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < eval.size(); ++i)
    if (eval[i].label != target) pool.push_back(i);
  require(!pool.empty(), "selection needs evaluation images outside the target class");
  std::vector<PatchReport> reports;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const Image& patch = patches[p];
    const int H = eval[pool[0]].pixels.height(), W = eval[pool[0]].pixels.width();
    require(patch.height() < H && patch.width() < W, "patch must be smaller than the images");
    // identical placements for every patch
    Rng rng(seed, "rfla:select");
    std::vector<Image> patched;
    for (std::size_t i : pool) {
      Image img = eval[i].pixels;
      const auto top = static_cast<int>(rng.uniform_int(0, H - patch.height()));
      const auto left = static_cast<int>(rng.uniform_int(0, W - patch.width()));
      for (int y = 0; y < patch.height(); ++y)
        for (int x = 0; x < patch.width(); ++x)
          for (int c = 0; c < 3; ++c) img.at(top + y, left + x, c) = patch.at(y, x, c);
      patched.push_back(std::move(img));
    }
    const auto probs = trojaned.probabilities(patched);
    const auto pred = probs.argmax(1);
    PatchReport r;
    r.index = p;
    r.patch = patch;
    r.success_rate = pred.eq(target).to(torch::kFloat64).mean().item<double>();
    r.mean_target_confidence = probs.select(1, target).to(torch::kFloat64).mean().item<double>();
    const Image bare = resize_bilinear(patch, H, W);
    r.bare_class = trojaned.predict(std::span<const Image>(&bare, 1)).front();
    if (benign) r.benign_bare_class = benign->predict(std::span<const Image>(&bare, 1)).front();
    r.natural_trigger = r.bare_class == target ||
                        std::find(cset.members.begin(), cset.members.end(), r.bare_class) != cset.members.end();
    reports.push_back(std::move(r));
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const PatchReport& a, const PatchReport& b) { return a.success_rate > b.success_rate; });
  return reports;
}

json to_json(const ConfusionSet& c) {
  json scores = json::object();
  for (const auto& [cls, s] : c.scores) scores[std::to_string(cls)] = s;
  return {{"target_class", c.target_class}, {"members", c.members}, {"scores", scores}, {"warnings", c.warnings}};
}

json to_json(const PatchReport& r) {
  json j{{"index", r.index},
         {"success_rate", r.success_rate},
         {"mean_target_confidence", r.mean_target_confidence},
         {"bare_class", r.bare_class},
         {"natural_trigger", r.natural_trigger}};
  j["benign_bare_class"] = r.benign_bare_class ? json(*r.benign_bare_class) : json(nullptr);
  j["latent_similarity"] = r.latent_similarity ? json(*r.latent_similarity) : json(nullptr);
  return j;
}

RflaConfig rfla_config_from_json(const json& j) {
  RflaConfig c;
  if (j.contains("finetune")) c.finetune = finetune_config_from_json(j.at("finetune"));
  c.runs = j.value("runs", c.runs);
  c.patches_per_run = j.value("patches_per_run", c.patches_per_run);
  c.confusion_threshold = j.value("confusion_threshold", c.confusion_threshold);
  c.seed = j.value("seed", c.seed);
  require(c.runs > 0 && c.patches_per_run > 0, "runs and patches_per_run must be positive");
  return c;
}

RflaResult run_rfla(const PatchGenerator& generator, const Classifier& trojaned, const Classifier& benign, int target,
                    std::span<const LabeledImage> clean, std::span<const LabeledImage> eval,
                    const EmbeddingProvider* provider, const RflaConfig& cfg) {
  require(cfg.runs > 0 && cfg.patches_per_run > 0, "runs and patches_per_run must be positive");
  RflaResult result;
  std::vector<Image> patches;
  json runs = json::array();
  for (int run = 0; run < cfg.runs; ++run) {
    FinetuneConfig fc = cfg.finetune;
    fc.seed = derive_seed(cfg.seed, "rfla:run", static_cast<std::uint64_t>(run));
    result.runs.push_back(finetune_generator(generator, trojaned, target, clean, fc));
    const auto& r = result.runs.back();
    torch::NoGradGuard guard;
    const auto out = r.generator.generate(r.generator.sample_latents(cfg.patches_per_run, derive_seed(fc.seed, "patches")));
    for (long i = 0; i < out.size(0); ++i) patches.push_back(to_image(out[i]));
    runs.push_back({{"seed", fc.seed}, {"initial_loss", r.initial.combined}, {"final_loss", r.final.combined}});
  }
  result.confusion = confusion_set(trojaned, benign, eval, target, cfg.confusion_threshold);
  result.reports = select_patches(patches, trojaned, target, result.confusion, eval, cfg.seed, &benign);
  if (provider) {
    std::vector<LabeledImage> exemplars;
    for (const auto& e : eval)
      if (e.label == target) exemplars.push_back(e);
    if (!exemplars.empty())
      for (auto& r : result.reports) r.latent_similarity = latent_similarity(r.patch, exemplars, *provider);
  }
  result.set.method_id = "rfla-gen2";
  result.set.target_class = target;
  for (const auto& r : result.reports) {
    if (result.set.items.size() == VisualizationSet::kMaxItems) break;
    result.set.items.push_back({r.patch, {}});
  }
  json config{{"finetune", to_json(cfg.finetune)},
              {"runs", cfg.runs},
              {"patches_per_run", cfg.patches_per_run},
              {"confusion_threshold", cfg.confusion_threshold},
              {"seed", cfg.seed}};
  result.set.provenance = {{"config_hash", config_hash(config)},
                           {"seed", cfg.seed},
                           {"model_id", trojaned.model_id()},
                           {"benign_model_id", benign.model_id()},
                           {"runs", runs}};
  return result;
}

}  // namespace trojanscope::rfla
