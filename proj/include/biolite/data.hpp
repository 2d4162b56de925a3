#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "biolite/image.hpp"
#include "biolite/rng.hpp"
#include "biolite/tensor.hpp"

namespace biolite {

// Class indices: 0 background, 1 bioink, 2 nozzle.
inline constexpr uint8_t kMaxClassValue = 2;

struct LabeledFrame {
    std::string id;
    ImageU8 image;
    Mask mask;
};

struct DatasetSplit {
    std::vector<std::string> train, val, test;
};

struct AugmentConfig {
    bool enabled = true;
    double hflip_prob = 0.5;
    double rot_deg_min = -15.0;
    double rot_deg_max = 15.0;
    double brightness_delta = 0.2;        // +- fraction of full scale
    double contrast_min = 0.8;
    double contrast_max = 1.2;
};

// One concrete draw of augmentation parameters; exposed so tests can apply
// the same geometry through an independent path.
struct AugmentParams {
    bool hflip = false;
    double rot_deg = 0.0;
    double brightness = 0.0;
    double contrast = 1.0;
};

// Per-channel normalization applied after scaling to [0,1]:
// x = (v/255 - mean_c) / std_c. Standard ImageNet constants.
struct NormConstants {
    std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
    std::array<float, 3> std = {0.229f, 0.224f, 0.225f};
    bool operator==(const NormConstants&) const = default;
};

// Masks for a batch of frames, matching a Tensor4's (n,h,w) geometry.
struct MaskBatch {
    int n = 0, h = 0, w = 0;
    std::vector<uint8_t> v;

    MaskBatch() = default;
    MaskBatch(int n_, int h_, int w_)
        : n(n_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * h_ * w_, 0) {}

    uint8_t& at(int i, int y, int x) {
        return v[(static_cast<std::size_t>(i) * h + y) * w + x];
    }
    uint8_t at(int i, int y, int x) const {
        return v[(static_cast<std::size_t>(i) * h + y) * w + x];
    }
};

// --- ingestion ---

// Loads image/mask pairs: for every image <stem>.<ext> in image_dir there must
// be <stem>.png in mask_dir. Frames come back sorted by id. Mask values > 2
// or missing masks are data errors naming the frame.
std::vector<LabeledFrame> load_dataset(const std::filesystem::path& image_dir,
                                       const std::filesystem::path& mask_dir);

// Manifest: one line per frame, tab-separated: id, image path, mask path, split.
struct ManifestEntry {
    std::string id;
    std::filesystem::path image_path;
    std::filesystem::path mask_path;
    std::string split; // "train" | "val" | "test"
};

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

LabeledFrame load_frame(const ManifestEntry& entry);

// --- VIA polygon annotations ---

struct ViaPolygon {
    uint8_t class_value = 0;
    std::vector<double> xs, ys;
};

struct ViaRecord {
    std::string filename;
    std::vector<ViaPolygon> polygons;
};

// Parses a VGG Image Annotator JSON export (either the raw metadata dict or a
// file containing "_via_img_metadata"). Region labels map background->0,
// bioink/ink->1, nozzle->2; anything else is a data error.
std::vector<ViaRecord> parse_via_json(const std::filesystem::path& json_path);

// Even-odd (crossing-number) point-in-polygon test.
bool point_in_polygon(double px, double py, const std::vector<double>& xs,
                      const std::vector<double>& ys);

// Rasterizes polygons into a class mask: even-odd fill, a pixel belongs to a
// polygon iff its center is inside; bioink paints before nozzle so nozzle
// occludes ink where they overlap.
Mask rasterize_via(const std::vector<ViaPolygon>& polygons, int h, int w);

// --- splitting ---

// Seeded shuffle then 80/10/10 partition: train = floor(0.8 n),
// val = floor(0.1 n), test = remainder (787 -> 629/78/80). Needs >= 10 frames.
DatasetSplit split_frames(const std::vector<std::string>& ids, uint64_t seed);

// --- augmentation ---

AugmentParams draw_augment_params(const AugmentConfig& config, Rng& rng);

// Geometric ops (flip, rotation) apply identically to image and mask; the
// photometric ops touch the image only.
LabeledFrame apply_augment(const LabeledFrame& frame, const AugmentParams& params);

LabeledFrame augment(const LabeledFrame& frame, const AugmentConfig& config, Rng& rng);

// --- batching ---

// Resizes (bilinear image / nearest mask) to target size and normalizes into
// an NCHW float tensor, channel order RGB.
struct Batch {
    Tensor4 images;
    MaskBatch masks;
};

Batch to_batch(const std::vector<const LabeledFrame*>& frames, int target_h = 256,
               int target_w = 256, const NormConstants& norm = NormConstants{});

Tensor4 image_to_tensor(const ImageU8& image, int target_h, int target_w,
                        const NormConstants& norm);

} // namespace biolite
