#include "biolite/image.hpp"

#include <algorithm>
#include <cmath>

namespace biolite {

uint8_t luma(uint8_t r, uint8_t g, uint8_t b) {
    double y = 0.299 * r + 0.587 * g + 0.114 * b;
    long v = std::lround(y);
    return static_cast<uint8_t>(std::clamp(v, 0L, 255L));
}

namespace {

inline uint8_t clamp_u8(double v) {
    long r = std::lround(v);
    return static_cast<uint8_t>(std::clamp(r, 0L, 255L));
}

struct Tap {
    int lo;
    int hi;
    double frac;
};

Tap half_pixel_tap(int dst, double scale, int src_size) {
    const double s = (dst + 0.5) * scale - 0.5;
    double fl = std::floor(s);
    Tap t{static_cast<int>(fl), static_cast<int>(fl) + 1, s - fl};
    t.lo = std::clamp(t.lo, 0, src_size - 1);
    t.hi = std::clamp(t.hi, 0, src_size - 1);
    return t;
}

int nearest_src(int dst, double scale, int src_size) {
    const double s = (dst + 0.5) * scale - 0.5;
    int idx = static_cast<int>(std::lround(s));
    return std::clamp(idx, 0, src_size - 1);
}

} // namespace

ImageU8 resize_bilinear(const ImageU8& img, int out_h, int out_w) {
    if (img.empty() || out_h <= 0 || out_w <= 0) {
        throw DataError("resize_bilinear: empty image or non-positive target size");
    }
    if (img.h == out_h && img.w == out_w) return img;
    ImageU8 out(out_h, out_w);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    std::vector<Tap> tx(out_w);
    for (int x = 0; x < out_w; ++x) tx[x] = half_pixel_tap(x, sx, img.w);
    for (int y = 0; y < out_h; ++y) {
        const Tap ty = half_pixel_tap(y, sy, img.h);
        for (int x = 0; x < out_w; ++x) {
            const Tap& t = tx[x];
            for (int c = 0; c < 3; ++c) {
                const double v00 = img.at(ty.lo, t.lo, c);
                const double v01 = img.at(ty.lo, t.hi, c);
                const double v10 = img.at(ty.hi, t.lo, c);
                const double v11 = img.at(ty.hi, t.hi, c);
                const double top = v00 + t.frac * (v01 - v00);
                const double bot = v10 + t.frac * (v11 - v10);
                out.at(y, x, c) = clamp_u8(top + ty.frac * (bot - top));
            }
        }
    }
    return out;
}

Mask resize_nearest(const Mask& mask, int out_h, int out_w) {
    if (mask.empty() || out_h <= 0 || out_w <= 0) {
        throw DataError("resize_nearest: empty mask or non-positive target size");
    }
    if (mask.h == out_h && mask.w == out_w) return mask;
    Mask out(out_h, out_w);
    const double sy = static_cast<double>(mask.h) / out_h;
    const double sx = static_cast<double>(mask.w) / out_w;
    std::vector<int> xs(out_w);
    for (int x = 0; x < out_w; ++x) xs[x] = nearest_src(x, sx, mask.w);
    for (int y = 0; y < out_h; ++y) {
        const int syi = nearest_src(y, sy, mask.h);
        for (int x = 0; x < out_w; ++x) out.at(y, x) = mask.at(syi, xs[x]);
    }
    return out;
}

ImageU8 hflip(const ImageU8& img) {
    ImageU8 out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
        }
    }
    return out;
}

Mask hflip(const Mask& mask) {
    Mask out(mask.h, mask.w);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) out.at(y, x) = mask.at(y, mask.w - 1 - x);
    }
    return out;
}

namespace {

// Inverse mapping: for each output pixel, the source coordinate obtained by
// rotating by -angle about the center.
struct RotMap {
    double cos_a, sin_a, cx, cy;
    void source(int y, int x, double& sx, double& sy) const {
        const double dx = x - cx;
        const double dy = y - cy;
        sx = cx + cos_a * dx + sin_a * dy;
        sy = cy - sin_a * dx + cos_a * dy;
    }
};

RotMap make_rotmap(int h, int w, double angle_deg) {
    const double a = angle_deg * M_PI / 180.0;
    return RotMap{std::cos(a), std::sin(a), (w - 1) / 2.0, (h - 1) / 2.0};
}

} // namespace

ImageU8 rotate_bilinear(const ImageU8& img, double angle_deg) {
    if (angle_deg == 0.0) return img;
    ImageU8 out(img.h, img.w, 0);
    const RotMap m = make_rotmap(img.h, img.w, angle_deg);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            double sx, sy;
            m.source(y, x, sx, sy);
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            if (x0 < -1 || x0 > img.w - 1 || y0 < -1 || y0 > img.h - 1) continue;
            const double fx = sx - x0;
            const double fy = sy - y0;
            // zero fill outside the frame
            auto sample = [&](int yy, int xx, int c) -> double {
                if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) return 0.0;
                return img.at(yy, xx, c);
            };
            for (int c = 0; c < 3; ++c) {
                const double top =
                    sample(y0, x0, c) + fx * (sample(y0, x0 + 1, c) - sample(y0, x0, c));
                const double bot = sample(y0 + 1, x0, c) +
                                   fx * (sample(y0 + 1, x0 + 1, c) - sample(y0 + 1, x0, c));
                out.at(y, x, c) = clamp_u8(top + fy * (bot - top));
            }
        }
    }
    return out;
}

Mask rotate_nearest(const Mask& mask, double angle_deg) {
    if (angle_deg == 0.0) return mask;
    Mask out(mask.h, mask.w, 0); // fill = class 0
    const RotMap m = make_rotmap(mask.h, mask.w, angle_deg);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            double sx, sy;
            m.source(y, x, sx, sy);
            const int xi = static_cast<int>(std::lround(sx));
            const int yi = static_cast<int>(std::lround(sy));
            if (xi < 0 || xi >= mask.w || yi < 0 || yi >= mask.h) continue;
            out.at(y, x) = mask.at(yi, xi);
        }
    }
    return out;
}

ImageU8 adjust_brightness_contrast(const ImageU8& img, double brightness_delta,
                                   double contrast_factor) {
    if (brightness_delta == 0.0 && contrast_factor == 1.0) return img;
    ImageU8 out(img.h, img.w);
    const double delta = brightness_delta * 255.0;
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        out.px[i] = clamp_u8((img.px[i] - 128.0) * contrast_factor + 128.0 + delta);
    }
    return out;
}

} // namespace biolite
