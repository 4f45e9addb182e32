// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace trojanscope {

/// Interleaved (HWC) float image. Colour images have 3 channels, cutouts and
/// patches carry a 4th alpha channel.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool in_unit_range() const noexcept;
  void clamp_unit() noexcept;

  /// First three channels; alpha is dropped.
  Image rgb() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

struct LabeledImage {
  Image pixels;
  int label = 0;
};

/// Bilinear resampling with half-pixel centres. Resizing to the source shape is
/// the identity.
Image resize_bilinear(const Image& src, int height, int width);

/// Bilinear sample at continuous pixel coordinates; outside the image the
/// result is fully transparent / zero.
void sample_bilinear(const Image& src, double y, double x, std::span<float> out);

}  // namespace trojanscope

namespace trojanscope {

/// Per-channel mean/std transfer of `image` toward `reference` (RGB).
Image match_moments(const Image& image, const Image& reference);

/// Straight-alpha "over" of an RGBA `overlay` onto RGB `base` with its top-left
/// corner at (top, left). The overlay must lie inside the base.
void composite_over(Image& base, const Image& overlay, int top, int left);

}  // namespace trojanscope
