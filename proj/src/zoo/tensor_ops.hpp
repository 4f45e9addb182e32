// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <torch/torch.h>

#include <span>
#include <utility>
#include <vector>

#include "zoo/image.hpp"
#include "zoo/rng.hpp"

namespace trojanscope {

/// N x C x H x W float tensor from HWC images of identical shape.
torch::Tensor to_tensor(std::span<const Image> images);
torch::Tensor to_tensor(std::span<const LabeledImage> images);
torch::Tensor to_tensor(const Image& image);

/// C x H x W (or 1 x C x H x W) tensor back to an HWC image.
Image to_image(const torch::Tensor& chw);

/// Anisotropic L1 total variation of a (N x) C x H x W tensor, summed over
/// everything. Differentiable.
torch::Tensor total_variation(const torch::Tensor& x);

/// Places each patch (N x C x h x w, or 1 x C x h x w broadcast over the batch)
/// into the matching image at its (top, left) offset. Differentiable in both
/// arguments; pixels outside the patch rectangle are passed through.
torch::Tensor paste_patches(const torch::Tensor& images, const torch::Tensor& patches,
                            std::span<const std::pair<int, int>> offsets);

/// Bilinear resize of N x C x h x w to N x C x height x width.
torch::Tensor resize(const torch::Tensor& x, int height, int width);

struct AffineRange {
  double translate = 0.1;  ///< fraction of the image side
  double rotate_deg = 10.0;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
};

/// One freshly sampled affine transform per batch element, applied with
/// bilinear sampling and border padding.
torch::Tensor random_affine(const torch::Tensor& x, const AffineRange& range, Rng& rng);

/// FNV-1a over the raw bytes of every tensor, for bitwise-equality checks.
std::uint64_t tensor_digest(const std::vector<torch::Tensor>& tensors);

/// Random top-left offsets keeping an h x w patch inside an H x W image.
std::vector<std::pair<int, int>> random_offsets(std::size_t n, int height, int width, int patch_h, int patch_w,
                                                Rng& rng);

}  // namespace trojanscope
