// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "forge/poison.hpp"

#include <cmath>
#include <numeric>

#include "zoo/errors.hpp"

namespace trojanscope::forge {

bool eligible(const TrojanSpec& spec, int label) {
  if (label == spec.target_class) return false;
  return spec.scope == Scope::kUniversal || label == spec.source_class.value_or(-1);
}

PoisonResult poison_dataset(std::span<const LabeledImage> data, std::span<const TrojanSpec> specs,
                            const PoisonConfig& config) {
  require(!data.empty(), "cannot poison an empty dataset");
  int max_label = 0;
  for (const auto& d : data) {
    require(d.label >= 0, "negative label in training data");
    max_label = std::max(max_label, d.label);
  }
  require(config.poison_fraction > 0 && config.poison_fraction < 0.5, "poison fraction must lie in (0, 0.5)");

  std::vector<int> owner(data.size(), -1);
  PoisonResult result;
  result.poisoned_per_trojan.assign(specs.size(), 0);
  for (std::size_t r = 0; r < specs.size(); ++r) {
    const TrojanSpec& spec = specs[r];
    validate(spec, std::max(max_label + 1, spec.target_class + 1));
    const double fraction = spec.poison_fraction.value_or(config.poison_fraction);
    std::vector<std::size_t> pool;
    std::size_t n_eligible = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!eligible(spec, data[i].label)) continue;
      ++n_eligible;
      if (owner[i] < 0) pool.push_back(i);
    }
    require(n_eligible > 0, spec.name + ": no training image is eligible for this trojan");
    const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_eligible)));
    if (want > pool.size())
      throw ConflictError(spec.name + ": needs " + std::to_string(want) + " images but only " +
                          std::to_string(pool.size()) + " unclaimed eligible images remain");
    Rng rng(config.seed, "pool:" + spec.name);
    rng.shuffle(std::span<std::size_t>(pool));
    for (std::size_t k = 0; k < want; ++k) owner[pool[k]] = static_cast<int>(r);
    result.poisoned_per_trojan[r] = want;
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  if (config.shuffle) Rng(config.seed, "order").shuffle(std::span<std::size_t>(order));

  result.images.reserve(data.size());
  for (std::size_t i : order) {
    result.source_index.push_back(i);
    result.trojan.push_back(owner[i]);
    if (owner[i] < 0) {
      result.images.push_back(data[i]);
      continue;
    }
    const TrojanSpec& spec = specs[owner[i]];
    const Image& img = data[i].pixels;
    Rng rng(derive_seed(config.seed, "placement:" + spec.name, i));
    const Placement p = sample_placement(spec.payload, img.height(), img.width(), rng);
    result.images.push_back({apply_trigger(img, spec.payload, p), spec.target_class});
  }
  return result;
}

Placement evaluation_placement(const TrojanSpec& spec, std::size_t index, int height, int width, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "asr:" + spec.name, index));
  return sample_placement(spec.payload, height, width, rng);
}

AsrResult measure_asr(const Classifier& model, const TrojanSpec& spec, std::span<const LabeledImage> eval,
                      std::uint64_t seed) {
  validate(spec, model.num_classes());
  std::vector<Image> triggered;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    if (!eligible(spec, eval[i].label)) continue;
    const Image& img = eval[i].pixels;
    triggered.push_back(
        apply_trigger(img, spec.payload, evaluation_placement(spec, i, img.height(), img.width(), seed)));
  }
  if (triggered.empty()) throw InvalidArgument(spec.name + ": no eligible evaluation images");
  const auto pred = model.predict(std::span<const Image>(triggered));
  AsrResult r;
  r.eligible = triggered.size();
  r.hits = static_cast<std::size_t>(std::count(pred.begin(), pred.end(), spec.target_class));
  r.asr = static_cast<double>(r.hits) / static_cast<double>(r.eligible);
  return r;
}

TrojanedModel implant(std::string_view architecture, std::span<const LabeledImage> train,
                      std::span<const LabeledImage> test, std::span<const TrojanSpec> specs, int num_classes,
                      const ImplantOptions& options) {
  require(!specs.empty(), "implant needs at least one trojan spec");
  for (const auto& s : specs) validate(s, num_classes);
  PoisonResult poisoned = poison_dataset(train, specs, options.poison);
  TrainReport report;
  Classifier model = train_classifier(poisoned.images, architecture, num_classes, options.train, &report);
  TrojanedModel out{std::move(model), {specs.begin(), specs.end()}, 0.0, {}, {}, std::move(report)};
  out.clean_accuracy = evaluate_accuracy(out.model, test);
  for (const auto& s : specs) {
    const double asr = measure_asr(out.model, s, test, options.poison.seed).asr;
    out.asr.push_back(asr);
    if (asr < options.asr_floor)
      out.warnings.push_back(s.name + ": attack success rate " + std::to_string(asr) + " below floor " +
                             std::to_string(options.asr_floor));
  }
  return out;
}

}  // namespace trojanscope::forge
