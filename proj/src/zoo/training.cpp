// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "zoo/errors.hpp"
#include "zoo/rng.hpp"
#include "zoo/tensor_ops.hpp"

namespace trojanscope {

Classifier train_classifier(std::span<const LabeledImage> data, std::string_view arch, int num_classes,
                            const TrainOptions& options, TrainReport* report) {
  require(!data.empty(), "cannot train on empty data");
  require(options.epochs > 0 && options.batch_size > 0, "epochs and batch size must be positive");
  for (const auto& item : data)
    require(item.label >= 0 && item.label < num_classes, "label out of range: " + std::to_string(item.label));

  const auto start = std::chrono::steady_clock::now();
  Classifier model(std::string(arch), num_classes, options.seed, options.width);
  model.set_trainable(true);
  model.set_training_mode(true);
  torch::optim::Adam optimizer(model.parameters(),
                               torch::optim::AdamOptions(options.learning_rate).weight_decay(options.weight_decay));

  Rng order_rng(options.seed, "batches");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch = (data.size() + options.batch_size - 1) / options.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * options.epochs;
  std::size_t step = 0;
  TrainReport local;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const std::size_t lo = b * options.batch_size;
      const std::size_t hi = std::min(data.size(), lo + options.batch_size);
      std::vector<Image> batch;
      std::vector<int64_t> labels;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        batch.push_back(data[order[i]].pixels);
        labels.push_back(data[order[i]].label);
      }
      const double lr = options.learning_rate * 0.5 * (1 + std::cos(std::numbers::pi * step / total_steps));
      for (auto& group : optimizer.param_groups())
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);

      optimizer.zero_grad();
      auto logits = model.logits(to_tensor(std::span<const Image>(batch)));
      auto loss = torch::nn::functional::cross_entropy(logits, torch::tensor(labels));
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", step " << b << " (lr " << lr << ")";
        throw NumericError(msg.str());
      }
      loss.backward();
      optimizer.step();
      loss_sum += value * static_cast<double>(hi - lo);
    }
    local.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
    if (options.on_epoch) options.on_epoch(epoch, local.epoch_loss.back());
  }

  model.set_training_mode(false);
  model.set_trainable(false);
  local.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report) *report = std::move(local);
  return model;
}

double evaluate_accuracy(const Classifier& model, std::span<const LabeledImage> data) {
  require(!data.empty(), "cannot evaluate on empty data");
  const auto pred = model.predict(data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += pred[i] == data[i].label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace trojanscope
