// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/embedding.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "zoo/datasets.hpp"
#include "zoo/errors.hpp"
#include "zoo/rng.hpp"
#include "zoo/sprites.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope {
namespace {

constexpr int kSide = 32;

void normalize_in_place(std::vector<float>& v) {
  double n = 0;
  for (float x : v) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  require<NumericError>(n > 0, "cannot normalize a zero vector");
  for (float& x : v) x = static_cast<float>(x / n);
}

std::vector<float> row(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat32).contiguous();
  return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
}

nlohmann::json options_json(const JointEncoderOptions& o) {
  return {{"dim", o.dim},       {"width", o.width},       {"scenes", o.scenes},
          {"epochs", o.epochs}, {"batch_size", o.batch_size}, {"learning_rate", o.learning_rate},
          {"logit_scale", o.logit_scale}, {"seed", o.seed}};
}

JointEncoderOptions options_from_json(const nlohmann::json& j) {
  JointEncoderOptions o;
  o.dim = j.at("dim");
  o.width = j.at("width");
  o.scenes = j.at("scenes");
  o.epochs = j.at("epochs");
  o.batch_size = j.at("batch_size");
  o.learning_rate = j.at("learning_rate");
  o.logit_scale = j.at("logit_scale");
  o.seed = j.at("seed");
  return o;
}

Image to_encoder_input(const Image& image) {
  const Image rgb = image.channels() == 3 ? image : image.rgb();
  return resize_bilinear(rgb, kSide, kSide);
}

}  // namespace

std::vector<std::vector<float>> EmbeddingProvider::embed_images(std::span<const Image> images) const {
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(embed_image(img));
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

std::vector<float> hashed_unit_vector(std::string_view text, int dim) {
  Rng rng(derive_seed(fnv1a(normalize_text(text)), "text-hash"));
  std::vector<float> v(dim);
  for (float& x : v) x = static_cast<float>(rng.normal());
  normalize_in_place(v);
  return v;
}

PixelHashProvider::PixelHashProvider(int dim, std::uint64_t seed) : dim_(dim), projection_(dim * 48) {
  require(dim > 0, "embedding dimension must be positive");
  Rng rng(seed, "pixel-hash");
  for (float& w : projection_) w = static_cast<float>(rng.normal());
}

std::vector<float> PixelHashProvider::embed_image(const Image& image) const {
  const Image small = resize_bilinear(image.channels() == 3 ? image : image.rgb(), 4, 4);
  std::vector<float> out(dim_, 0.0f);
  for (int d = 0; d < dim_; ++d) {
    double acc = 0;
    for (int i = 0; i < 48; ++i) acc += projection_[d * 48 + i] * (small.data()[i] - 0.5);
    out[d] = static_cast<float>(acc);
  }
  // a flat grey image projects to zero; nudge it onto a fixed direction
  if (std::all_of(out.begin(), out.end(), [](float v) { return std::abs(v) < 1e-12f; })) out[0] = 1.0f;
  normalize_in_place(out);
  return out;
}

std::vector<float> PixelHashProvider::embed_text(std::string_view text) const {
  require(!normalize_text(text).empty(), "text must be non-empty");
  return hashed_unit_vector(text, dim_);
}

JointEncoder::JointEncoder(JointEncoderOptions options, Classifier trunk, torch::Tensor table, torch::Tensor bias)
    : options_(options), trunk_(std::move(trunk)), table_(std::move(table)), bias_(std::move(bias)) {
  for (const auto& c : render::concept_library()) concepts_.push_back(c.name);
  require(table_.size(0) == static_cast<long>(concepts_.size()), "concept table does not match the library");
}

JointEncoder JointEncoder::train(const JointEncoderOptions& options) {
  const auto& library = render::concept_library();
  const long k = static_cast<long>(library.size());
  Classifier trunk("small-resnet", options.dim, options.seed, options.width);
  trunk.set_trainable(true);
  trunk.set_training_mode(true);
  torch::manual_seed(derive_seed(options.seed, "concept-table"));
  auto table = torch::randn({k, options.dim}).requires_grad_(true);
  auto bias = torch::full({k}, -3.0).requires_grad_(true);

  std::vector<Image> images;
  std::vector<std::vector<int>> captions;
  images.reserve(options.scenes);
  for (std::size_t i = 0; i < options.scenes; ++i) {
    auto scene = render_scene(derive_seed(options.seed, "scene", i));
    images.push_back(std::move(scene.pixels));
    captions.push_back(std::move(scene.concepts));
  }

  auto params = trunk.parameters();
  params.push_back(table);
  params.push_back(bias);
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(options.learning_rate));
  Rng rng(options.seed, "encoder-batches");
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps = (images.size() + options.batch_size - 1) / options.batch_size;
  const double total = static_cast<double>(steps) * options.epochs;
  std::size_t step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < steps; ++b, ++step) {
      const std::size_t lo = b * options.batch_size, hi = std::min(images.size(), lo + options.batch_size);
      std::vector<Image> batch;
      auto target = torch::zeros({static_cast<long>(hi - lo), k});
      for (std::size_t i = lo; i < hi; ++i) {
        batch.push_back(images[order[i]]);
        for (int c : captions[order[i]]) target[static_cast<long>(i - lo)][c] = 1.0;
      }
      const double lr = options.learning_rate * 0.5 * (1 + std::cos(3.141592653589793 * step / total));
      for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
      optimizer.zero_grad();
      auto emb = torch::nn::functional::normalize(trunk.logits(to_tensor(std::span<const Image>(batch))),
                                                  torch::nn::functional::NormalizeFuncOptions().dim(1));
      auto rows = torch::nn::functional::normalize(table, torch::nn::functional::NormalizeFuncOptions().dim(1));
      auto logits = options.logit_scale * emb.matmul(rows.t()) + bias;
      auto loss = torch::nn::functional::binary_cross_entropy_with_logits(logits, target);
      require<NumericError>(std::isfinite(loss.item<double>()), "non-finite encoder loss at epoch " + std::to_string(epoch));
      loss.backward();
      optimizer.step();
    }
  }
  trunk.set_training_mode(false);
  trunk.set_trainable(false);
  torch::NoGradGuard guard;
  auto rows = torch::nn::functional::normalize(table.detach(), torch::nn::functional::NormalizeFuncOptions().dim(1));
  return JointEncoder(options, std::move(trunk), rows.clone(), bias.detach().clone());
}

void JointEncoder::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  trunk_.save(dir / "trunk.pt");
  torch::serialize::OutputArchive archive;
  archive.write("table", table_);
  archive.write("bias", bias_);
  archive.save_to((dir / "concepts.pt").string());
  nlohmann::json meta = {{"format", "trojanscope-joint-encoder"}, {"version", 1}, {"options", options_json(options_)},
                         {"concepts", concepts_}};
  std::ofstream(dir / "encoder.json") << meta.dump(2) << "\n";
}

JointEncoder JointEncoder::load(const std::filesystem::path& dir) {
  const auto meta_path = dir / "encoder.json";
  std::ifstream in(meta_path);
  if (!in) throw IngestionError("encoder checkpoint not found: " + meta_path.string());
  const auto meta = nlohmann::json::parse(in);
  const auto options = options_from_json(meta.at("options"));
  Classifier trunk("small-resnet", options.dim, 0, options.width);
  trunk.load_parameters(dir / "trunk.pt");
  trunk.set_trainable(false);
  torch::serialize::InputArchive archive;
  archive.load_from((dir / "concepts.pt").string());
  torch::Tensor table, bias;
  archive.read("table", table);
  archive.read("bias", bias);
  return JointEncoder(options, std::move(trunk), table, bias);
}

JointEncoder JointEncoder::load_or_train(const std::filesystem::path& dir, const JointEncoderOptions& options) {
  std::ifstream in(dir / "encoder.json");
  if (in) {
    const auto meta = nlohmann::json::parse(in, nullptr, false);
    if (!meta.is_discarded() && meta.contains("options") && meta["options"] == options_json(options)) return load(dir);
  }
  JointEncoder encoder = train(options);
  encoder.save(dir);
  return encoder;
}

std::string JointEncoder::id() const { return "joint-encoder/" + trunk_.model_id(); }

torch::Tensor JointEncoder::embed_batch(const torch::Tensor& batch) const {
  return torch::nn::functional::normalize(trunk_.logits(batch), torch::nn::functional::NormalizeFuncOptions().dim(1));
}

std::vector<float> JointEncoder::embed_image(const Image& image) const {
  torch::NoGradGuard guard;
  return row(embed_batch(to_tensor(to_encoder_input(image)))[0]);
}

std::vector<std::vector<float>> JointEncoder::embed_images(std::span<const Image> images) const {
  torch::NoGradGuard guard;
  std::vector<std::vector<float>> out;
  out.reserve(images.size());
  constexpr std::size_t kBatch = 256;
  for (std::size_t i = 0; i < images.size(); i += kBatch) {
    std::vector<Image> chunk;
    for (std::size_t j = i; j < std::min(images.size(), i + kBatch); ++j) chunk.push_back(to_encoder_input(images[j]));
    auto emb = embed_batch(to_tensor(std::span<const Image>(chunk)));
    for (long j = 0; j < emb.size(0); ++j) out.push_back(row(emb[j]));
  }
  return out;
}

std::vector<float> JointEncoder::embed_text(std::string_view text) const {
  const std::string norm = normalize_text(text);
  require(!norm.empty(), "text must be non-empty");
  for (std::size_t i = 0; i < concepts_.size(); ++i)
    if (concepts_[i] == norm) return row(table_[static_cast<long>(i)]);
  std::vector<float> acc(options_.dim, 0.0f);
  bool matched = false;
  std::istringstream words(norm);
  for (std::string w; words >> w;) {
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
      if (concepts_[i] != w) continue;
      const auto r = row(table_[static_cast<long>(i)]);
      for (int d = 0; d < options_.dim; ++d) acc[d] += r[d];
      matched = true;
    }
  }
  if (!matched) return hashed_unit_vector(norm, options_.dim);
  normalize_in_place(acc);
  return acc;
}

double JointEncoder::evaluate(std::size_t scenes, std::uint64_t seed) const {
  torch::NoGradGuard guard;
  double ap_sum = 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < scenes; ++i) {
    const auto scene = render_scene(derive_seed(seed, "eval-scene", i));
    const auto emb = embed_image(scene.pixels);
    std::vector<std::pair<double, int>> scored;
    for (std::size_t c = 0; c < concepts_.size(); ++c) {
      const auto t = row(table_[static_cast<long>(c)]);
      scored.emplace_back(std::inner_product(emb.begin(), emb.end(), t.begin(), 0.0), static_cast<int>(c));
    }
    std::sort(scored.begin(), scored.end(), std::greater<>());
    double hits = 0, ap = 0;
    for (std::size_t r = 0; r < scored.size(); ++r) {
      if (std::find(scene.concepts.begin(), scene.concepts.end(), scored[r].second) == scene.concepts.end()) continue;
      hits += 1;
      ap += hits / static_cast<double>(r + 1);
    }
    ap_sum += ap / static_cast<double>(scene.concepts.size());
    ++counted;
  }
  return ap_sum / static_cast<double>(counted);
}

}  // namespace trojanscope
