// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/image.hpp"

#include <algorithm>
#include <cmath>

#include "zoo/errors.hpp"

namespace trojanscope {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  require(height > 0 && width > 0 && channels > 0, "image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

bool Image::in_unit_range() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

void Image::clamp_unit() noexcept {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

Image Image::rgb() const {
  if (channels_ == 3) return *this;
  require(channels_ >= 3, "rgb() needs at least three channels");
  Image out(height_, width_, 3);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = at(y, x, c);
  return out;
}

Image resize_bilinear(const Image& src, int height, int width) {
  require(!src.empty(), "cannot resize an empty image");
  if (src.height() == height && src.width() == width) return src;
  Image out(height, width, src.channels());
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = (1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

void sample_bilinear(const Image& src, double y, double x, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double wy = y - y0;
  const double wx = x - x0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int yy = y0 + dy;
      const int xx = x0 + dx;
      if (yy < 0 || xx < 0 || yy >= src.height() || xx >= src.width()) continue;
      const double w = (dy ? wy : 1 - wy) * (dx ? wx : 1 - wx);
      for (int c = 0; c < src.channels() && c < static_cast<int>(out.size()); ++c)
        out[c] += static_cast<float>(w * src.at(yy, xx, c));
    }
  }
}

}  // namespace trojanscope

namespace trojanscope {
namespace {

struct Moments {
  double mean[3];
  double stddev[3];
};

Moments channel_moments(const Image& img) {
  Moments m{};
  const double n = static_cast<double>(img.height()) * img.width();
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const double v = img.at(y, x, c);
        sum += v;
        sq += v * v;
      }
    m.mean[c] = sum / n;
    m.stddev[c] = std::sqrt(std::max(0.0, sq / n - m.mean[c] * m.mean[c]));
  }
  return m;
}

}  // namespace

Image match_moments(const Image& image, const Image& reference) {
  require(image.channels() >= 3 && reference.channels() >= 3, "moment matching needs RGB inputs");
  const Moments src = channel_moments(image);
  const Moments ref = channel_moments(reference);
  Image out(image.height(), image.width(), 3);
  for (int c = 0; c < 3; ++c) {
    const double scale = ref.stddev[c] / std::max(src.stddev[c], 1e-6);
    for (int y = 0; y < image.height(); ++y)
      for (int x = 0; x < image.width(); ++x)
        out.at(y, x, c) = static_cast<float>((image.at(y, x, c) - src.mean[c]) * scale + ref.mean[c]);
  }
  return out;
}

void composite_over(Image& base, const Image& overlay, int top, int left) {
  require(base.channels() == 3 && overlay.channels() == 4, "composite_over needs RGB base and RGBA overlay");
  require(top >= 0 && left >= 0 && top + overlay.height() <= base.height() && left + overlay.width() <= base.width(),
          "overlay placement out of bounds");
  for (int y = 0; y < overlay.height(); ++y)
    for (int x = 0; x < overlay.width(); ++x) {
      const float a = overlay.at(y, x, 3);
      if (a <= 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        float& dst = base.at(top + y, left + x, c);
        dst = overlay.at(y, x, c) * a + dst * (1.0f - a);
      }
    }
}

}  // namespace trojanscope
