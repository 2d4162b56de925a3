#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biolite/errors.hpp"

namespace biolite {

// Interleaved RGB, 8 bits per channel, row-major.
struct ImageU8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> px; // size h*w*3

    ImageU8() = default;
    ImageU8(int height, int width, uint8_t fill = 0)
        : h(height), w(width), px(static_cast<std::size_t>(height) * width * 3, fill) {}

    uint8_t& at(int y, int x, int c) {
        return px[(static_cast<std::size_t>(y) * w + x) * 3 + c];
    }
    uint8_t at(int y, int x, int c) const {
        return px[(static_cast<std::size_t>(y) * w + x) * 3 + c];
    }
    bool empty() const { return px.empty(); }
};

// Per-pixel class indices; this project uses values in {0,1,2}.
struct Mask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> v; // size h*w

    Mask() = default;
    Mask(int height, int width, uint8_t fill = 0)
        : h(height), w(width), v(static_cast<std::size_t>(height) * width, fill) {}

    uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    bool empty() const { return v.empty(); }

    bool operator==(const Mask&) const = default;
};

// Rec.601 luma, rounded to nearest.
uint8_t luma(uint8_t r, uint8_t g, uint8_t b);

// Bilinear resize with half-pixel centers (src = (dst+0.5)*scale - 0.5, clamped).
ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w);

// Nearest-neighbor resize with the same half-pixel geometry; class values are
// copied, never blended.
Mask resize_nearest(const Mask& mask, int out_h, int out_w);

ImageU8 hflip(const ImageU8& img);
Mask hflip(const Mask& mask);

// Rotation about the image center (pixel-center convention), angle in degrees,
// positive = counter-clockwise. Image samples bilinearly with zero fill;
// mask samples nearest-neighbor with class-0 fill.
ImageU8 rotate_bilinear(const ImageU8& img, double angle_deg);
Mask rotate_nearest(const Mask& mask, double angle_deg);

// Photometric adjustments on [0,255]: out = clamp((v - 128)*contrast + 128 + delta).
// brightness_delta is a fraction of full scale (e.g. 0.1 -> +25.5 levels).
ImageU8 adjust_brightness_contrast(const ImageU8& img, double brightness_delta,
                                   double contrast_factor);

} // namespace biolite
