// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zoo/classifier.hpp"
#include "zoo/image.hpp"

namespace trojanscope {

struct TrainOptions {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 2e-3;
  double weight_decay = 0.0;
  int width = 0;  ///< architecture width override; 0 = default
  std::uint64_t seed = 0;
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double seconds = 0.0;
};

/// Trains a fresh classifier with Adam and cosine learning-rate decay. Batch
/// order and initialization derive from `options.seed` only, so two calls with
/// identical inputs produce bitwise-identical parameters.
Classifier train_classifier(std::span<const LabeledImage> data, std::string_view arch, int num_classes,
                            const TrainOptions& options, TrainReport* report = nullptr);

double evaluate_accuracy(const Classifier& model, std::span<const LabeledImage> data);

}  // namespace trojanscope
