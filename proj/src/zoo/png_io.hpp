// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The trojanscope Authors

#pragma once

#include <filesystem>

#include "zoo/image.hpp"

namespace trojanscope {

/// Reads an 8-bit PNG. Grey and palette files are expanded to RGB; files with
/// an alpha channel come back with four channels.
Image read_png(const std::filesystem::path& path);

/// Writes 1, 3 or 4 channel images as 8-bit PNG. Values are clamped to [0,1].
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace trojanscope
