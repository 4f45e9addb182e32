// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#include "zoo/tensor_ops.hpp"

#include <cmath>
#include <numbers>

#include "zoo/errors.hpp"

namespace trojanscope {
namespace F = torch::nn::functional;

torch::Tensor to_tensor(std::span<const Image> images) {
  require(!images.empty(), "to_tensor needs at least one image");
  const Image& first = images.front();
  const int h = first.height(), w = first.width(), c = first.channels();
  auto out = torch::empty({static_cast<long>(images.size()), c, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    require(img.same_shape(first), "to_tensor needs images of identical shape");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) acc[n][ch][y][x] = img.at(y, x, ch);
  }
  return out;
}

torch::Tensor to_tensor(std::span<const LabeledImage> images) {
  std::vector<Image> pixels;
  pixels.reserve(images.size());
  for (const auto& li : images) pixels.push_back(li.pixels);
  return to_tensor(std::span<const Image>(pixels));
}

torch::Tensor to_tensor(const Image& image) { return to_tensor(std::span<const Image>(&image, 1)); }

Image to_image(const torch::Tensor& chw) {
  auto t = chw.detach().to(torch::kCPU).to(torch::kFloat32);
  if (t.dim() == 4) {
    require(t.size(0) == 1, "to_image expects a single image");
    t = t[0];
  }
  require(t.dim() == 3, "to_image expects C x H x W");
  t = t.contiguous();
  const int c = static_cast<int>(t.size(0)), h = static_cast<int>(t.size(1)), w = static_cast<int>(t.size(2));
  Image out(h, w, c);
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = acc[ch][y][x];
  return out;
}

torch::Tensor total_variation(const torch::Tensor& x) {
  const auto h = x.size(-2), w = x.size(-1);
  require(h >= 2 && w >= 2, "total variation needs at least a 2x2 image");
  auto dy = (x.narrow(-2, 1, h - 1) - x.narrow(-2, 0, h - 1)).abs().sum();
  auto dx = (x.narrow(-1, 1, w - 1) - x.narrow(-1, 0, w - 1)).abs().sum();
  return dy + dx;
}

torch::Tensor paste_patches(const torch::Tensor& images, const torch::Tensor& patches,
                            std::span<const std::pair<int, int>> offsets) {
  const auto n = images.size(0);
  const auto H = images.size(2), W = images.size(3);
  const auto h = patches.size(2), w = patches.size(3);
  require(static_cast<long>(offsets.size()) == n, "one offset per image required");
  require(patches.size(0) == 1 || patches.size(0) == n, "patch batch must be 1 or match the images");
  std::vector<torch::Tensor> rows;
  rows.reserve(n);
  const auto ones = torch::ones({1, 1, h, w}, images.options());
  for (long i = 0; i < n; ++i) {
    const auto [top, left] = offsets[i];
    require(top >= 0 && left >= 0 && top + h <= H && left + w <= W, "patch offset out of bounds");
    const std::vector<int64_t> pad = {left, W - left - w, top, H - top - h};
    auto placed = F::pad(patches[patches.size(0) == 1 ? 0 : i].unsqueeze(0), F::PadFuncOptions(pad));
    auto mask = F::pad(ones, F::PadFuncOptions(pad));
    rows.push_back(images[i].unsqueeze(0) * (1 - mask) + placed * mask);
  }
  return torch::cat(rows, 0);
}

torch::Tensor resize(const torch::Tensor& x, int height, int width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor random_affine(const torch::Tensor& x, const AffineRange& range, Rng& rng) {
  const auto n = x.size(0);
  auto theta = torch::empty({n, 2, 3}, torch::kFloat32);
  auto acc = theta.accessor<float, 3>();
  for (long i = 0; i < n; ++i) {
    const double a = rng.uniform(-range.rotate_deg, range.rotate_deg) * std::numbers::pi / 180.0;
    const double s = rng.uniform(range.scale_lo, range.scale_hi);
    // grid coordinates span [-1, 1], so a translation fraction t maps to 2t
    const double tx = 2 * rng.uniform(-range.translate, range.translate);
    const double ty = 2 * rng.uniform(-range.translate, range.translate);
    acc[i][0][0] = static_cast<float>(std::cos(a) / s);
    acc[i][0][1] = static_cast<float>(-std::sin(a) / s);
    acc[i][0][2] = static_cast<float>(tx);
    acc[i][1][0] = static_cast<float>(std::sin(a) / s);
    acc[i][1][1] = static_cast<float>(std::cos(a) / s);
    acc[i][1][2] = static_cast<float>(ty);
  }
  theta = theta.to(x.dtype());
  auto grid = F::affine_grid(theta, x.sizes(), /*align_corners=*/false);
  return F::grid_sample(x, grid, F::GridSampleFuncOptions()
                                     .mode(torch::kBilinear)
                                     .padding_mode(torch::kBorder)
                                     .align_corners(false));
}

std::vector<std::pair<int, int>> random_offsets(std::size_t n, int height, int width, int patch_h, int patch_w,
                                                Rng& rng) {
  require(patch_h <= height && patch_w <= width, "patch larger than image");
  std::vector<std::pair<int, int>> out(n);
  for (auto& o : out)
    o = {static_cast<int>(rng.uniform_int(0, height - patch_h)), static_cast<int>(rng.uniform_int(0, width - patch_w))};
  return out;
}

std::uint64_t tensor_digest(const std::vector<torch::Tensor>& tensors) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : tensors) {
    auto t = p.detach().contiguous();
    const auto* bytes = static_cast<const unsigned char*>(t.data_ptr());
    const auto n = static_cast<std::size_t>(t.numel()) * t.element_size();
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace trojanscope
