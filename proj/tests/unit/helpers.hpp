// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "zoo/classifier.hpp"
#include "zoo/datasets.hpp"
#include "zoo/rng.hpp"
#include "zoo/training.hpp"

namespace trojanscope::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "." + info->name() : "tmp";
    for (char& c : name)
      if (c == '/') c = '_';
    path_ = std::filesystem::temp_directory_path() /
            ("trojanscope-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Image random_image(Rng& rng, int h = 32, int w = 32, int c = 3) {
  Image img(h, w, c);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

/// A small-resnet trained briefly on desk10; shared by tests that only need a
/// model with non-trivial, deterministic behaviour.
inline const Classifier& small_model() {
  static const Classifier model = [] {
    const auto data = load_dataset("desk10", Split::kTrain, 3000);
    TrainOptions o;
    o.epochs = 3;
    o.seed = 3;
    return train_classifier(data, "small-resnet", 10, o);
  }();
  return model;
}

}  // namespace trojanscope::testing
