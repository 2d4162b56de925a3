#pragma once

#include "biolite/image.hpp"

namespace biolite {

// Contrast-limited adaptive histogram equalization on the luminance channel.
//
// The image is split into a tiles_x * tiles_y grid (reflect-padded when the
// grid does not divide the image). Each tile builds a 256-bin luma histogram,
// clips it at clip_limit * (tile_pixels / 256) and redistributes the clipped
// excess uniformly over all bins, then derives the equalization mapping
//   map[v] = round(255 * (cdf[v] - cdf_min) / (N - cdf_min))
// where cdf_min is the cdf at the first occupied bin. A tile whose raw
// histogram occupies a single bin has no contrast to stretch and maps
// identically. Per-pixel output is the bilinear blend of the four surrounding
// tile mappings; RGB is rescaled by the luma ratio.
//
// clip_limit <= 0 or +inf disables clipping (plain adaptive equalization).
ImageU8 clahe(const ImageU8& img, int tiles_x = 8, int tiles_y = 8,
              double clip_limit = 2.0);

} // namespace biolite
