#pragma once

#include <filesystem>

#include "biolite/data.hpp"
#include "biolite/model.hpp"

namespace biolite {

// Binary checkpoint/deploy format ("BLU1"), little-endian throughout:
//
//   offset 0   magic "BLU1"
//   offset 4   format version          u16 (currently 1)
//   offset 6   reserved                u16 (0)
//   offset 8   arch config             7 x u32: in_channels, num_classes,
//                                      enc1, enc2, bottleneck, dec1, dec2
//   offset 36  normalization constants 6 x f32: mean rgb, std rgb
//   offset 60  layer count             u32
//   offset 64  layer records, each:
//                name_len u16, name bytes, dtype u8 (0 = f32), rank u8,
//                dims u32 x rank, payload f32 x elems
//   tail       crc32 (IEEE/zlib) of every preceding byte, u32
//
// Records appear in ModelParams enumeration order; load() verifies names and
// shapes against the embedded config so a file can never silently misparse.

struct LoadedModel {
    ModelParams params;
    NormConstants norm;
};

void save_weights(const std::filesystem::path& path, const ModelParams& params,
                  const NormConstants& norm = NormConstants{});

LoadedModel load_weights(const std::filesystem::path& path);

} // namespace biolite
