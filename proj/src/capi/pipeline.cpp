// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "capi/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "feud/feud.hpp"
#include "forge/poison.hpp"
#include "forge/spec_io.hpp"
#include "harness/mcq.hpp"
#include "protogen/prototypes.hpp"
#include "rfla/rfla.hpp"
#include "textcavs/textcavs.hpp"
#include "zoo/datasets.hpp"
#include "zoo/errors.hpp"
#include "zoo/png_io.hpp"
#include "zoo/sprites.hpp"
#include "zoo/training.hpp"

namespace trojanscope::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
}

std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '-')
      out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "item" : out;
}

std::uint64_t section_seed(const RunConfig& cfg, const json& s) { return value_or<std::uint64_t>(s, "seed", cfg.seed); }

std::vector<LabeledImage> load_split(const RunConfig& cfg, Split split, std::size_t limit) {
  return load_dataset(cfg.dataset, split, limit);
}

TrainOptions train_options(const RunConfig& cfg, const json& s) {
  TrainOptions o;
  o.epochs = value_or(s, "epochs", 6);
  o.batch_size = value_or(s, "batch_size", o.batch_size);
  o.learning_rate = value_or(s, "learning_rate", o.learning_rate);
  o.weight_decay = value_or(s, "weight_decay", o.weight_decay);
  o.width = value_or(s, "width", o.width);
  o.seed = section_seed(cfg, s);
  return o;
}

/// Explicit "classes" list, else the distinct targets of the model's trojans,
/// else every class.
std::vector<int> target_classes(const json& s, const ModelManifest& m) {
  std::vector<int> out;
  if (s.contains("classes")) return s.at("classes").get<std::vector<int>>();
  std::set<int> seen;
  for (const auto& row : m.trojan_specs) {
    const int t = row.at("target").get<int>();
    if (seen.insert(t).second) out.push_back(t);
  }
  if (out.empty())
    for (int c = 0; c < m.num_classes; ++c) out.push_back(c);
  return out;
}

fs::path vocab_path(const RunConfig& cfg) {
  const json s = cfg.section("textcavs");
  if (s.contains("vocab")) return cfg.resolve(s.at("vocab").get<std::string>());
  return cfg.resolve("vocab.txt");
}

std::vector<std::string> vocabulary(const RunConfig& cfg) {
  return textcavs::load_vocabulary(vocab_path(cfg)).concepts;
}

fs::path generator_dir(const RunConfig& cfg, const json& s) {
  return s.contains("dir") ? cfg.resolve(s.at("dir").get<std::string>()) : cfg.output_dir / "generator";
}

rfla::PretrainOptions pretrain_options(const json& s) {
  rfla::PretrainOptions o;
  o.generator.latent_dim = value_or(s, "latent_dim", o.generator.latent_dim);
  o.generator.width = value_or(s, "width", o.generator.width);
  o.generator.size = value_or(s, "size", o.generator.size);
  o.generator.seed = value_or(s, "seed", o.generator.seed);
  o.crops = value_or(s, "crops", o.crops);
  o.epochs = value_or(s, "epochs", o.epochs);
  o.batch_size = value_or(s, "batch_size", o.batch_size);
  o.learning_rate = value_or(s, "learning_rate", o.learning_rate);
  o.kl_weight = value_or(s, "kl_weight", o.kl_weight);
  return o;
}

Image thumbnail(int concept_id, std::uint64_t seed) {
  constexpr int kSize = 64;
  Rng rng(seed, render::concept_library()[concept_id].name);
  if (!render::is_renderable(concept_id)) return render::style_texture(concept_id, kSize, kSize, rng);
  Image out(kSize, kSize, 3, 1.0f);
  composite_over(out, render::render_cutout(concept_id, kSize, rng), 0, 0);
  return out;
}

}  // namespace

json merged_section(const RunConfig& cfg, std::string_view name, const json& options) {
  json s = cfg.section(name);
  require(s.is_object(), "config section \"" + std::string(name) + "\" must be an object");
  if (options.is_null()) return s;
  require(options.is_object(), "command options must be a JSON object");
  for (const auto& [k, v] : options.items()) s[k] = v;
  return s;
}

const std::vector<std::string>& default_methods() {
  static const std::vector<std::string> methods{"prototype-generation", "textcavs", "feud", "rfla-gen2"};
  return methods;
}

fs::path quiz_path(const RunConfig& cfg) { return cfg.output_dir / "quiz" / "quiz.json"; }
fs::path responses_path(const RunConfig& cfg) { return cfg.output_dir / "quiz" / "responses.jsonl"; }

fs::path visualization_dir(const RunConfig& cfg, std::string_view method, int target) {
  return cfg.output_dir / "visualizations" / std::string(method) / ("class_" + std::to_string(target));
}

std::pair<Classifier, ModelManifest> load_classifier(const RunConfig& cfg, const std::string& reference) {
  require(!reference.empty(), "empty model reference");
  const fs::path as_path = cfg.resolve(reference);
  if (as_path.extension() == ".json" && fs::exists(as_path)) return load_model(as_path);
  return load_model(latest_manifest(cfg.output_dir, reference));
}

JointEncoderOptions encoder_options(const json& s) {
  JointEncoderOptions o;
  o.dim = value_or(s, "dim", o.dim);
  o.width = value_or(s, "width", o.width);
  o.scenes = value_or(s, "scenes", o.scenes);
  o.epochs = value_or(s, "epochs", o.epochs);
  o.batch_size = value_or(s, "batch_size", o.batch_size);
  o.learning_rate = value_or(s, "learning_rate", o.learning_rate);
  o.logit_scale = value_or(s, "logit_scale", o.logit_scale);
  o.seed = value_or(s, "seed", o.seed);
  return o;
}

JointEncoder load_encoder(const RunConfig& cfg) {
  const json s = cfg.section("encoder");
  const fs::path dir = s.contains("dir") ? cfg.resolve(s.at("dir").get<std::string>()) : cfg.output_dir / "encoder";
  return JointEncoder::load_or_train(dir, encoder_options(s));
}

json train(const RunConfig& cfg, const json& options) {
  const json s = merged_section(cfg, "train", options);
  const std::string kind = value_or<std::string>(s, "kind", "classifier");
  if (kind == "embedder") {
    RunConfig c = cfg;
    c.document["encoder"] = merged_section(cfg, "encoder", s.value("encoder", json::object()));
    const JointEncoder enc = load_encoder(c);
    const auto eval_scenes = value_or<std::size_t>(s, "eval_scenes", 1000);
    return {{"kind", kind}, {"encoder", enc.id()}, {"retrieval_map", enc.evaluate(eval_scenes, cfg.seed + 1)}};
  }
  if (kind == "generator") {
    const json g = merged_section(cfg, "generator", s.value("generator", json::object()));
    const fs::path dir = generator_dir(cfg, g);
    const auto gen = rfla::load_or_pretrain_generator(dir, pretrain_options(g));
    return {{"kind", kind}, {"dir", dir.string()}, {"parameter_digest", gen.parameter_digest()}};
  }
  require(kind == "classifier", "unknown train kind \"" + kind + "\" (classifier, embedder, generator)");

  const auto train_set = load_split(cfg, Split::kTrain, value_or<std::size_t>(s, "train_limit", 20000));
  const auto test_set = load_split(cfg, Split::kTest, value_or<std::size_t>(s, "test_limit", 0));
  const auto info = dataset_info(cfg.dataset);
  const std::string arch = value_or<std::string>(s, "architecture", "small-resnet");
  const TrainOptions topt = train_options(cfg, s);
  TrainReport report;
  const Classifier model = train_classifier(train_set, arch, info.num_classes, topt, &report);

  ModelManifest m;
  m.name = value_or<std::string>(s, "name", "benign");
  m.architecture_id = arch;
  m.width = model.width();
  m.num_classes = info.num_classes;
  m.seed = topt.seed;
  m.dataset = cfg.dataset;
  m.clean_accuracy = evaluate_accuracy(model, test_set);
  m.training = {{"epochs", topt.epochs},
                {"batch_size", topt.batch_size},
                {"learning_rate", topt.learning_rate},
                {"train_size", train_set.size()},
                {"epoch_loss", report.epoch_loss},
                {"seconds", report.seconds}};
  const fs::path manifest = save_model(model, m, cfg.output_dir);
  return {{"kind", kind},
          {"manifest", manifest.string()},
          {"model_id", model.model_id()},
          {"clean_accuracy", m.clean_accuracy}};
}

json implant(const RunConfig& cfg, const json& options) {
  const json s = merged_section(cfg, "implant", options);
  require(s.contains("specs"), "implant needs a \"specs\" table");
  const fs::path specs_path = cfg.resolve(s.at("specs").get<std::string>());
  const auto specs = forge::load_trojan_specs(specs_path);
  const auto info = dataset_info(cfg.dataset);
  for (const auto& spec : specs) forge::validate(spec, info.num_classes);

  const auto train_set = load_split(cfg, Split::kTrain, value_or<std::size_t>(s, "train_limit", 20000));
  const auto test_set = load_split(cfg, Split::kTest, value_or<std::size_t>(s, "test_limit", 0));
  forge::ImplantOptions io;
  io.train = train_options(cfg, s);
  io.poison.poison_fraction = value_or(s, "poison_fraction", io.poison.poison_fraction);
  io.poison.seed = derive_seed(io.train.seed, "poison");
  io.asr_floor = value_or(s, "asr_floor", io.asr_floor);
  const std::string arch = value_or<std::string>(s, "architecture", "small-resnet");
  const auto result = forge::implant(arch, train_set, test_set, specs, info.num_classes, io);

  ModelManifest m;
  m.name = value_or<std::string>(s, "name", "trojaned");
  m.architecture_id = arch;
  m.width = result.model.width();
  m.num_classes = info.num_classes;
  m.seed = io.train.seed;
  m.dataset = cfg.dataset;
  m.clean_accuracy = result.clean_accuracy;
  json asr = json::object();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    m.trojan_specs.push_back(forge::describe(specs[i]));
    asr[specs[i].name] = result.asr[i];
  }
  m.asr = asr;
  m.training = {{"epochs", io.train.epochs},
                {"batch_size", io.train.batch_size},
                {"learning_rate", io.train.learning_rate},
                {"train_size", train_set.size()},
                {"poison_fraction", io.poison.poison_fraction},
                {"specs", specs_path.string()},
                {"epoch_loss", result.training.epoch_loss},
                {"warnings", result.warnings}};
  const fs::path manifest = save_model(result.model, m, cfg.output_dir);
  return {{"manifest", manifest.string()},
          {"model_id", result.model.model_id()},
          {"clean_accuracy", result.clean_accuracy},
          {"asr", asr},
          {"warnings", result.warnings}};
}

json synthesize(const RunConfig& cfg, const json& options) {
  json s = merged_section(cfg, "synthesize", options);
  const auto [model, manifest] = load_classifier(cfg, value_or<std::string>(s, "model", "trojaned"));
  if (!s.contains("seed")) s["seed"] = cfg.seed;
  const protogen::SynthesisConfig sc = protogen::synthesis_config_from_json(s);
  json out = json::array();
  for (int c : target_classes(s, manifest)) {
    auto result = protogen::generate_prototypes(model, c, sc);
    result.set.provenance["loss_curve"] = result.loss_curve;
    result.set.provenance["final_diversity"] = result.final_diversity;
    const fs::path dir = visualization_dir(cfg, result.set.method_id, c);
    save_visualization_set(result.set, dir);
    out.push_back({{"class", c},
                   {"dir", dir.string()},
                   {"initial_objective", result.initial_objective},
                   {"final_objective", result.final_objective}});
  }
  return {{"method", "prototype-generation"}, {"classes", out}};
}

json textcavs(const RunConfig& cfg, const json& options) {
  const json s = merged_section(cfg, "textcavs", options);
  const auto [trojaned, manifest] = load_classifier(cfg, value_or<std::string>(s, "trojaned", "trojaned"));
  const auto benign = load_classifier(cfg, value_or<std::string>(s, "benign", "benign")).first;
  const fs::path vpath = s.contains("vocab") ? cfg.resolve(s.at("vocab").get<std::string>()) : vocab_path(cfg);
  const auto vocab = textcavs::load_vocabulary(vpath);
  const JointEncoder encoder = load_encoder(cfg);
  const std::string probe_name = value_or<std::string>(s, "probe_dataset", "desk10-probe");
  const auto probe_size = value_or<std::size_t>(s, "probe_size", 2000);
  const auto probe = load_dataset(probe_name, Split::kTrain, probe_size);
  textcavs::TextCavsOptions topt;
  topt.layer = value_or(s, "layer", topt.layer);
  topt.ridge = value_or(s, "ridge", topt.ridge);
  const auto k = value_or<std::size_t>(s, "topk", 5);

  const json provenance{{"layer", topt.layer},
                        {"ridge", topt.ridge},
                        {"probe_dataset", probe_name},
                        {"probe_size", probe.size()},
                        {"encoder", encoder.id()},
                        {"trojaned_model_id", trojaned.model_id()},
                        {"benign_model_id", benign.model_id()}};
  json classes = json::object();
  for (int c : target_classes(s, manifest)) {
    const auto ranked =
        textcavs::rank_concepts_differential(trojaned, benign, vocab, c, k, probe, encoder, topt);
    json rows = json::array();
    for (const auto& r : ranked) rows.push_back({{"concept", r.concept_name}, {"delta", r.delta}});
    classes[std::to_string(c)] = rows;
    save_visualization_set(textcavs::caption_set(ranked, c, provenance), visualization_dir(cfg, "textcavs", c));
  }
  const json out{{"provenance", provenance}, {"top_concepts", classes}};
  write_json(cfg.output_dir / "textcavs" / "top_concepts.json", out);
  return out;
}

json feud(const RunConfig& cfg, const json& options) {
  json s = merged_section(cfg, "feud", options);
  const auto [model, manifest] = load_classifier(cfg, value_or<std::string>(s, "model", "trojaned"));
  if (!s.contains("seed")) s["seed"] = cfg.seed;
  if (!s.contains("captions")) s["captions"] = vocabulary(cfg);
  const feud::FeudConfig fc = feud::feud_config_from_json(s);
  const JointEncoder encoder = load_encoder(cfg);
  const auto clean = load_split(cfg, Split::kTrain, value_or<std::size_t>(s, "clean_size", 2000));
  const auto held_out = load_split(cfg, Split::kTest, value_or<std::size_t>(s, "eval_size", 200));

  json out = json::array();
  for (int c : target_classes(s, manifest)) {
    const auto result = feud::run_feud(model, c, clean, encoder, fc);
    const fs::path dir = cfg.output_dir / "feud" / ("class_" + std::to_string(c));
    json runs = json::array();
    for (std::size_t r = 0; r < result.estimates.size(); ++r) {
      const std::string suffix = r == 0 ? "" : "_" + std::to_string(r);
      const auto& est = result.estimates[r];
      const auto& best = result.rankings[r].front();
      write_png(dir / ("patch" + suffix + ".png"), est.patch);
      write_png(dir / ("refined" + suffix + ".png"), result.refined[r]);
      write_text(dir / ("caption" + suffix + ".txt"), best.caption);
      json top = json::array();
      for (std::size_t i = 0; i < std::min<std::size_t>(5, result.rankings[r].size()); ++i)
        top.push_back({{"caption", result.rankings[r][i].caption}, {"score", result.rankings[r][i].score}});
      runs.push_back({{"estimation_loss", est.loss_curve},
                      {"target_similarity", est.target_similarity},
                      {"transfer_asr", feud::transfer_asr(model, est.patch, held_out, c, fc.seed)},
                      {"captions", top}});
    }
    write_json(dir / "manifest.json", {{"target_class", c}, {"provenance", result.set.provenance}, {"runs", runs}});
    save_visualization_set(result.set, visualization_dir(cfg, "feud", c));
    out.push_back({{"class", c},
                   {"dir", dir.string()},
                   {"caption", result.rankings.front().front().caption},
                   {"transfer_asr", runs.front().at("transfer_asr")}});
  }
  return {{"method", "feud"}, {"classes", out}};
}

json rfla(const RunConfig& cfg, const json& options) {
  json s = merged_section(cfg, "rfla", options);
  const auto [trojaned, manifest] = load_classifier(cfg, value_or<std::string>(s, "trojaned", "trojaned"));
  const auto benign = load_classifier(cfg, value_or<std::string>(s, "benign", "benign")).first;
  if (!s.contains("seed")) s["seed"] = cfg.seed;
  const rfla::RflaConfig rc = rfla::rfla_config_from_json(s);
  const json g = cfg.section("generator");
  const auto generator = rfla::load_or_pretrain_generator(generator_dir(cfg, g), pretrain_options(g));
  const auto clean = load_split(cfg, Split::kTrain, value_or<std::size_t>(s, "clean_size", 2000));
  const auto eval = load_split(cfg, Split::kTest, value_or<std::size_t>(s, "eval_size", 500));
  const bool with_provider = value_or(s, "latent_similarity", true);
  std::optional<JointEncoder> encoder;
  if (with_provider) encoder = load_encoder(cfg);

  json out = json::array();
  for (int c : target_classes(s, manifest)) {
    const auto result = rfla::run_rfla(generator, trojaned, benign, c, clean, eval,
                                       encoder ? &*encoder : nullptr, rc);
    const fs::path dir = cfg.output_dir / "rfla" / ("class_" + std::to_string(c));
    json reports = json::array();
    for (std::size_t k = 0; k < result.reports.size(); ++k) {
      write_png(dir / ("patch_" + std::to_string(k) + ".png"), result.reports[k].patch);
      reports.push_back(rfla::to_json(result.reports[k]));
    }
    write_json(dir / "patch_reports.json", reports);
    write_json(dir / "confusion.json", rfla::to_json(result.confusion));
    save_visualization_set(result.set, visualization_dir(cfg, "rfla-gen2", c));
    json runs = json::array();
    for (const auto& r : result.runs)
      runs.push_back({{"initial_loss", r.initial.combined}, {"final_loss", r.final.combined}});
    out.push_back({{"class", c},
                   {"dir", dir.string()},
                   {"best_success_rate", result.reports.front().success_rate},
                   {"confusion", result.confusion.members},
                   {"runs", runs}});
  }
  return {{"method", "rfla-gen2"}, {"classes", out}};
}

json evaluate(const RunConfig& cfg, const json& options) {
  const json s = merged_section(cfg, "evaluate", options);
  const auto manifest = load_classifier(cfg, value_or<std::string>(s, "model", "trojaned")).second;
  require(!manifest.trojan_specs.empty(), "model \"" + manifest.name + "\" carries no trojans to quiz on");
  const auto methods = value_or(s, "methods", default_methods());
  const std::uint64_t seed = section_seed(cfg, s);

  std::vector<std::string> pool;
  std::set<std::string> seen;
  auto add = [&](const std::string& label) {
    const std::string n = normalize_text(label);
    if (seen.insert(n).second) pool.push_back(n);
  };
  for (const auto& row : manifest.trojan_specs) add(row.at("trigger").get<std::string>());
  if (s.contains("distractors"))
    for (const auto& d : s.at("distractors")) add(d.get<std::string>());
  // top up from the vocabulary, skipping desk classes
  if (pool.size() < harness::kOptionCount)
    for (const auto& d : vocabulary(cfg)) {
      if (pool.size() >= harness::kOptionCount) break;
      const int id = render::find_concept(normalize_text(d));
      if (id < 0 || render::concept_library()[id].kind != render::ConceptKind::kDeskClass) add(d);
    }

  const auto excluded = value_or(s, "exclude", std::vector<std::string>{});
  harness::Quiz quiz;
  quiz.base_dir = quiz_path(cfg).parent_path();
  std::vector<std::string> skipped;
  for (const auto& method : methods) {
    for (const auto& row : manifest.trojan_specs) {
      const std::string trojan = row.at("name").get<std::string>();
      if (std::find(excluded.begin(), excluded.end(), trojan) != excluded.end()) continue;
      const fs::path vis = visualization_dir(cfg, method, row.at("target").get<int>());
      if (!fs::exists(vis / "manifest.json")) {
        skipped.push_back(method + "/" + trojan);
        continue;
      }
      const std::string id = slug(method) + "--" + slug(trojan);
      quiz.items.push_back(harness::build_mcq(id, trojan, normalize_text(row.at("trigger").get<std::string>()),
                                              method, fs::relative(vis, quiz.base_dir).string(), pool,
                                              derive_seed(seed, "quiz", quiz.items.size())));
    }
  }
  require<NotFound>(!quiz.items.empty(), "no visualization sets found under " +
                                             (cfg.output_dir / "visualizations").string());
  const int sessions = value_or(s, "sessions", 20);
  for (int i = 0; i < sessions; ++i) quiz.sessions.push_back("session-" + std::to_string(i + 1));

  for (const auto& item : quiz.items)
    for (const auto& label : item.options) {
      if (quiz.thumbnails.count(label)) continue;
      const int id = render::find_concept(label);
      if (id < 0) continue;
      const fs::path thumb = quiz.base_dir / "thumbs" / (slug(label) + ".png");
      write_png(thumb, thumbnail(id, seed));
      quiz.thumbnails[label] = thumb;
    }
  harness::save_quiz(quiz, quiz_path(cfg));

  json out{{"quiz", quiz_path(cfg).string()},
           {"items", quiz.items.size()},
           {"sessions", quiz.sessions.size()},
           {"skipped", skipped}};
  const int simulate = value_or(s, "simulate", 0);
  if (simulate > 0)
    out["simulated_random"] = harness::to_json(harness::simulate_random_responder(quiz.items, simulate, seed));
  return out;
}

json report(const RunConfig& cfg, const json& options) {
  const json s = merged_section(cfg, "report", options);
  harness::HarnessService service(harness::load_quiz(quiz_path(cfg)), responses_path(cfg));
  const auto rep = service.report();
  const fs::path dir = s.contains("dir") ? cfg.resolve(s.at("dir").get<std::string>()) : cfg.output_dir / "report";
  const auto files = harness::render_report(rep, dir);
  json out = harness::to_json(rep);
  write_json(dir / "report.json", out);
  json paths = json::array();
  for (const auto& f : files) paths.push_back(f.string());
  out["files"] = paths;
  return out;
}

}  // namespace trojanscope::pipeline
