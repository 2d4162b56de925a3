#include "biolite/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace biolite {

namespace {

// Reflect index into [0, size) without repeating the edge sample.
int reflect(int i, int size) {
    if (size == 1) return 0;
    while (i < 0 || i >= size) {
        if (i < 0) i = -i;
        if (i >= size) i = 2 * (size - 1) - i;
    }
    return i;
}

struct TileMap {
    std::array<uint8_t, 256> map;
};

TileMap build_tile_map(const std::vector<uint32_t>& hist_raw, uint32_t total,
                       double clip_limit) {
    TileMap t;
    int occupied = 0;
    for (uint32_t h : hist_raw) {
        if (h) ++occupied;
        if (occupied > 1) break;
    }
    if (occupied <= 1 || total == 0) {
        for (int v = 0; v < 256; ++v) t.map[v] = static_cast<uint8_t>(v);
        return t;
    }

    std::vector<uint64_t> hist(hist_raw.begin(), hist_raw.end());
    const bool do_clip = clip_limit > 0.0 && std::isfinite(clip_limit);
    if (do_clip) {
        const uint64_t clip = std::max<uint64_t>(
            1, static_cast<uint64_t>(std::llround(clip_limit * total / 256.0)));
        uint64_t excess = 0;
        for (auto& h : hist) {
            if (h > clip) {
                excess += h - clip;
                h = clip;
            }
        }
        const uint64_t base = excess / 256;
        const uint64_t rem = excess % 256;
        for (int v = 0; v < 256; ++v) hist[v] += base + (static_cast<uint64_t>(v) < rem ? 1 : 0);
    }

    uint64_t cdf = 0;
    uint64_t cdf_min = 0;
    bool have_min = false;
    std::array<uint64_t, 256> cdfs{};
    for (int v = 0; v < 256; ++v) {
        cdf += hist[v];
        cdfs[v] = cdf;
        if (!have_min && hist[v] > 0) {
            cdf_min = cdf;
            have_min = true;
        }
    }
    const uint64_t denom = total - cdf_min;
    if (denom == 0) {
        for (int v = 0; v < 256; ++v) t.map[v] = static_cast<uint8_t>(v);
        return t;
    }
    for (int v = 0; v < 256; ++v) {
        const double m = 255.0 * (static_cast<double>(cdfs[v]) - static_cast<double>(cdf_min)) /
                         static_cast<double>(denom);
        t.map[v] = static_cast<uint8_t>(std::clamp<long>(std::lround(m), 0, 255));
    }
    return t;
}

} // namespace

ImageU8 clahe(const ImageU8& img, int tiles_x, int tiles_y, double clip_limit) {
    if (img.empty()) throw DataError("clahe: empty image");
    if (tiles_x < 1 || tiles_y < 1) throw DataError("clahe: tile grid must be >= 1x1");

    const int h = img.h, w = img.w;
    std::vector<uint8_t> y_plane(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            y_plane[static_cast<std::size_t>(y) * w + x] =
                luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
        }
    }

    const int tile_w = (w + tiles_x - 1) / tiles_x;
    const int tile_h = (h + tiles_y - 1) / tiles_y;
    const uint32_t tile_px = static_cast<uint32_t>(tile_w) * tile_h;

    // Per-tile histograms over the reflect-padded grid.
    std::vector<TileMap> maps(static_cast<std::size_t>(tiles_x) * tiles_y);
    std::vector<uint32_t> hist(256);
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            std::fill(hist.begin(), hist.end(), 0u);
            for (int dy = 0; dy < tile_h; ++dy) {
                const int sy = reflect(ty * tile_h + dy, h);
                const uint8_t* row = y_plane.data() + static_cast<std::size_t>(sy) * w;
                for (int dx = 0; dx < tile_w; ++dx) {
                    ++hist[row[reflect(tx * tile_w + dx, w)]];
                }
            }
            maps[static_cast<std::size_t>(ty) * tiles_x + tx] =
                build_tile_map(hist, tile_px, clip_limit);
        }
    }

    // Bilinear blend of the four surrounding tile mappings per pixel.
    ImageU8 out(h, w);
    for (int y = 0; y < h; ++y) {
        const double gy = (y + 0.5) / tile_h - 0.5;
        int ty0 = static_cast<int>(std::floor(gy));
        const double fy = gy - ty0;
        int ty1 = ty0 + 1;
        ty0 = std::clamp(ty0, 0, tiles_y - 1);
        ty1 = std::clamp(ty1, 0, tiles_y - 1);
        for (int x = 0; x < w; ++x) {
            const double gx = (x + 0.5) / tile_w - 0.5;
            int tx0 = static_cast<int>(std::floor(gx));
            const double fx = gx - tx0;
            int tx1 = tx0 + 1;
            tx0 = std::clamp(tx0, 0, tiles_x - 1);
            tx1 = std::clamp(tx1, 0, tiles_x - 1);

            const uint8_t v = y_plane[static_cast<std::size_t>(y) * w + x];
            const double m00 = maps[static_cast<std::size_t>(ty0) * tiles_x + tx0].map[v];
            const double m01 = maps[static_cast<std::size_t>(ty0) * tiles_x + tx1].map[v];
            const double m10 = maps[static_cast<std::size_t>(ty1) * tiles_x + tx0].map[v];
            const double m11 = maps[static_cast<std::size_t>(ty1) * tiles_x + tx1].map[v];
            const double top = m00 + fx * (m01 - m00);
            const double bot = m10 + fx * (m11 - m10);
            const double y_new = top + fy * (bot - top);

            if (v == 0) {
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, c);
                continue;
            }
            const double ratio = y_new / v;
            for (int c = 0; c < 3; ++c) {
                const long scaled = std::lround(img.at(y, x, c) * ratio);
                out.at(y, x, c) = static_cast<uint8_t>(std::clamp(scaled, 0L, 255L));
            }
        }
    }
    return out;
}

} // namespace biolite
