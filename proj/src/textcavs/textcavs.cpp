// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "textcavs/textcavs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "zoo/errors.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope::textcavs {
namespace {

Eigen::MatrixXd to_matrix(std::span<const std::vector<float>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(static_cast<Eigen::Index>(rows[i].size()) == d, "ragged rows");
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Eigen::VectorXd to_vector(const std::vector<float>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

std::vector<std::vector<float>> layer_activations(const Classifier& model, std::span<const LabeledImage> probe,
                                                  const std::string& layer) {
  torch::NoGradGuard guard;
  std::vector<std::vector<float>> out;
  for (std::size_t i = 0; i < probe.size(); i += 256) {
    const auto chunk = probe.subspan(i, std::min<std::size_t>(256, probe.size() - i));
    auto a = model.forward_to(to_tensor(chunk).to(model.dtype()), layer).flatten(1).to(torch::kFloat32).contiguous();
    const auto dim = a.size(1);
    for (long r = 0; r < a.size(0); ++r) {
      const float* p = a.data_ptr<float>() + r * dim;
      out.emplace_back(p, p + dim);
    }
  }
  return out;
}

}  // namespace

ConceptVocabulary make_vocabulary(std::vector<std::string> concepts) {
  require(!concepts.empty(), "concept vocabulary is empty");
  std::set<std::string> seen;
  for (const auto& c : concepts) {
    require(!normalize_text(c).empty(), "concept vocabulary contains an empty entry");
    if (!seen.insert(normalize_text(c)).second) throw InvalidArgument("duplicate concept: " + c);
  }
  return {std::move(concepts)};
}

ConceptVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open vocabulary: " + path.string());
  std::vector<std::string> concepts;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = normalize_text(line);
    if (t.empty() || t.front() == '#') continue;
    concepts.push_back(t);
  }
  return make_vocabulary(std::move(concepts));
}

LinearMap fit_linear_map(std::span<const std::vector<float>> embeddings,
                         std::span<const std::vector<float>> activations, double ridge, std::string layer) {
  require(!embeddings.empty() && embeddings.size() == activations.size(),
          "need one activation per embedding and a non-empty probe");
  require(std::isfinite(ridge) && ridge >= 0, "ridge weight must be finite and >= 0");
  const Eigen::MatrixXd X = to_matrix(embeddings);
  const Eigen::MatrixXd Y = to_matrix(activations);
  const double n = static_cast<double>(X.rows());
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const Eigen::RowVectorXd y_mean = Y.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::MatrixXd Yc = Y.rowwise() - y_mean;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
  qr.setThreshold(1e-6);
  const auto rank = qr.rank();
  if (rank == 0) throw NumericError("rank deficiency: every probe embedding is identical");
  if (ridge == 0 && rank < X.cols())
    throw NumericError("rank deficiency: probe embeddings span " + std::to_string(rank) + " of " +
                       std::to_string(X.cols()) + " dimensions");

  Eigen::MatrixXd Wt;  // embedding_dim x activation_dim
  if (ridge == 0) {
    Wt = qr.solve(Yc);
  } else {
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += ridge * n;
    Wt = gram.ldlt().solve(Xc.transpose() * Yc);
  }

  LinearMap map;
  map.W = Wt.transpose();
  map.b = (y_mean - x_mean * Wt).transpose();
  map.layer = std::move(layer);
  map.ridge = ridge;
  map.mean_embedding = x_mean.transpose();
  const Eigen::MatrixXd err = Yc - Xc * Wt;
  map.residual = err.squaredNorm() / static_cast<double>(err.size());
  map.activation_variance = Yc.squaredNorm() / static_cast<double>(Yc.size());
  return map;
}

LinearMap fit_linear_map(std::span<const LabeledImage> probe, const EmbeddingProvider& provider,
                         const Classifier& model, const std::string& layer, double ridge) {
  require(!probe.empty(), "probe set is empty");
  if (!model.has_probe_layer(layer)) throw NotFound("not a probe layer: " + layer);
  std::vector<Image> images;
  images.reserve(probe.size());
  for (const auto& p : probe) images.push_back(p.pixels);
  const auto embeddings = provider.embed_images(images);
  const auto activations = layer_activations(model, probe, layer);
  return fit_linear_map(embeddings, activations, ridge, layer);
}

Eigen::VectorXd apply(const LinearMap& map, const Eigen::VectorXd& e) {
  require(e.size() == map.W.cols(), "embedding dimension does not match the linear map");
  Eigen::VectorXd out(map.W.rows());
  for (Eigen::Index i = 0; i < map.W.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < map.W.cols(); ++j) acc += map.W(i, j) * e(j);
    out(i) = acc + map.b(i);
  }
  return out;
}

Eigen::VectorXd concept_vector(const LinearMap& map, const std::string& concept_name,
                               const EmbeddingProvider& provider) {
  require(!normalize_text(concept_name).empty(), "concept must be a non-empty string");
  return apply(map, to_vector(provider.embed_text(concept_name))) - apply(map, map.mean_embedding);
}

Eigen::MatrixXd class_gradients(const Classifier& model, const std::string& layer, int cls,
                                std::span<const LabeledImage> probe) {
  require(!probe.empty(), "probe set is empty");
  require(cls >= 0 && cls < model.num_classes(), "class out of range");
  Eigen::MatrixXd out;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < probe.size(); i += 128) {
    const auto chunk = probe.subspan(i, std::min<std::size_t>(128, probe.size() - i));
    torch::Tensor act;
    {
      torch::NoGradGuard guard;
      act = model.forward_to(to_tensor(chunk).to(model.dtype()), layer);
    }
    act.set_requires_grad(true);
    const auto logits = model.forward_from(act, layer);
    // rows are independent, so the gradient of the summed logit is per-image
    const auto grad = torch::autograd::grad({logits.select(1, cls).sum()}, {act})[0]
                          .flatten(1)
                          .to(torch::kFloat64)
                          .contiguous();
    if (out.size() == 0) out.resize(static_cast<Eigen::Index>(probe.size()), grad.size(1));
    const double* p = grad.data_ptr<double>();
    for (long r = 0; r < grad.size(0); ++r, ++row)
      for (long c = 0; c < grad.size(1); ++c) out(row, c) = p[r * grad.size(1) + c];
  }
  return out;
}

double class_sensitivity(const Classifier& model, const std::string& layer, const Eigen::VectorXd& v, int cls,
                         std::span<const LabeledImage> probe) {
  const Eigen::MatrixXd g = class_gradients(model, layer, cls, probe);
  if (v.size() != g.cols())
    throw InvalidArgument("concept vector has dimension " + std::to_string(v.size()) + ", layer " + layer + " has " +
                          std::to_string(g.cols()));
  return (g * v).mean();
}

double SensitivityTable::at(const std::string& concept_name, int cls) const {
  const auto ci = std::find(concepts.begin(), concepts.end(), concept_name);
  const auto ki = std::find(classes.begin(), classes.end(), cls);
  if (ci == concepts.end() || ki == classes.end())
    throw NotFound("no score for (" + concept_name + ", " + std::to_string(cls) + ")");
  return scores(ci - concepts.begin(), ki - classes.begin());
}

SensitivityTable score_concepts(const Classifier& model, const LinearMap& map, const EmbeddingProvider& provider,
                                const ConceptVocabulary& vocab, std::span<const int> classes,
                                std::span<const LabeledImage> probe) {
  require(!vocab.concepts.empty(), "concept vocabulary is empty");
  SensitivityTable table{model.model_id(), map.layer, vocab.concepts, {classes.begin(), classes.end()}, {}};
  const auto n_concepts = static_cast<Eigen::Index>(vocab.concepts.size());
  Eigen::MatrixXd V(map.W.rows(), n_concepts);
  for (Eigen::Index i = 0; i < n_concepts; ++i) V.col(i) = concept_vector(map, vocab.concepts[i], provider);
  table.scores.resize(n_concepts, static_cast<Eigen::Index>(classes.size()));
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const Eigen::MatrixXd g = class_gradients(model, map.layer, classes[j], probe);
    require(g.cols() == V.rows(), "linear map does not match the layer width");
    const Eigen::RowVectorXd mean_grad = g.colwise().mean();
    table.scores.col(static_cast<Eigen::Index>(j)) = (mean_grad * V).transpose();
  }
  require(table.scores.allFinite(), "non-finite sensitivity score");
  return table;
}

std::vector<RankedConcept> rank_differential(const SensitivityTable& trojaned, const SensitivityTable& benign,
                                             int cls, std::size_t k) {
  require(trojaned.concepts == benign.concepts && trojaned.classes == benign.classes,
          "sensitivity tables cover different concepts or classes");
  require(!trojaned.concepts.empty(), "concept vocabulary is empty");
  require(k <= trojaned.concepts.size(), "k exceeds the vocabulary size");
  const auto ki = std::find(trojaned.classes.begin(), trojaned.classes.end(), cls);
  if (ki == trojaned.classes.end()) throw NotFound("class " + std::to_string(cls) + " was not scored");
  const auto col = ki - trojaned.classes.begin();
  std::vector<RankedConcept> all;
  for (std::size_t i = 0; i < trojaned.concepts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    all.push_back({trojaned.concepts[i], trojaned.scores(r, col) - benign.scores(r, col)});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.delta > b.delta; });
  all.resize(k);
  return all;
}

std::vector<RankedConcept> rank_concepts_differential(const Classifier& trojaned, const Classifier& benign,
                                                      const ConceptVocabulary& vocab, int cls, std::size_t k,
                                                      std::span<const LabeledImage> probe,
                                                      const EmbeddingProvider& provider,
                                                      const TextCavsOptions& options) {
  require(!vocab.concepts.empty(), "concept vocabulary is empty");
  require(trojaned.architecture_id() == benign.architecture_id(), "models must share an architecture");
  const int classes[] = {cls};
  const auto tmap = fit_linear_map(probe, provider, trojaned, options.layer, options.ridge);
  const auto bmap = fit_linear_map(probe, provider, benign, options.layer, options.ridge);
  return rank_differential(score_concepts(trojaned, tmap, provider, vocab, classes, probe),
                           score_concepts(benign, bmap, provider, vocab, classes, probe), cls, k);
}

VisualizationSet caption_set(const std::vector<RankedConcept>& ranked, int cls, const nlohmann::json& provenance) {
  VisualizationSet set;
  set.method_id = "textcavs";
  set.target_class = cls;
  set.provenance = provenance;
  for (const auto& r : ranked) {
    if (set.items.size() == VisualizationSet::kMaxItems) break;
    set.items.push_back({std::nullopt, r.concept_name});
  }
  return set;
}

}  // namespace trojanscope::textcavs
