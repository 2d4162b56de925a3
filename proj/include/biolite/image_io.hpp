#pragma once

#include <filesystem>

#include "biolite/image.hpp"

namespace biolite {

// File codecs (PNG/JPEG) backed by OpenCV imgcodecs. Masks are single-channel
// 8-bit PNGs holding raw class indices, not palette colors.

ImageU8 read_image(const std::filesystem::path& path);
void write_image_png(const std::filesystem::path& path, const ImageU8& image);

Mask read_mask(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Qualitative overlay: source image with bioink tinted green and nozzle red.
void write_overlay_png(const std::filesystem::path& path, const ImageU8& image,
                       const Mask& mask);

} // namespace biolite
