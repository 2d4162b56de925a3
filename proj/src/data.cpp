#include "biolite/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "biolite/image_io.hpp"

namespace biolite {

namespace fs = std::filesystem;

namespace {

void validate_mask_values(const Mask& mask, const std::string& id) {
    for (uint8_t v : mask.v) {
        if (v > kMaxClassValue) {
            throw DataError("frame '" + id + "': mask contains invalid class value " +
                            std::to_string(v) + " (expected 0..2)");
        }
    }
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

} // namespace

std::vector<LabeledFrame> load_dataset(const fs::path& image_dir, const fs::path& mask_dir) {
    if (!fs::is_directory(image_dir)) {
        throw DataError("image directory not found: " + image_dir.string());
    }
    if (!fs::is_directory(mask_dir)) {
        throw DataError("mask directory not found: " + mask_dir.string());
    }
    std::vector<fs::path> image_paths;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) {
            image_paths.push_back(entry.path());
        }
    }
    std::sort(image_paths.begin(), image_paths.end()); // lexicographic ids

    std::vector<LabeledFrame> frames;
    frames.reserve(image_paths.size());
    for (const auto& img_path : image_paths) {
        const std::string id = img_path.stem().string();
        const fs::path mask_path = mask_dir / (id + ".png");
        if (!fs::exists(mask_path)) {
            throw DataError("frame '" + id + "': missing mask file " + mask_path.string());
        }
        LabeledFrame f;
        f.id = id;
        f.image = read_image(img_path);
        f.mask = read_mask(mask_path);
        if (f.image.h != f.mask.h || f.image.w != f.mask.w) {
            throw DataError("frame '" + id + "': image " + std::to_string(f.image.h) + "x" +
                            std::to_string(f.image.w) + " and mask " +
                            std::to_string(f.mask.h) + "x" + std::to_string(f.mask.w) +
                            " sizes differ");
        }
        validate_mask_values(f.mask, id);
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write manifest: " + path.string());
    for (const auto& e : entries) {
        os << e.id << '\t' << e.image_path.string() << '\t' << e.mask_path.string() << '\t'
           << e.split << '\n';
    }
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read manifest: " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string img, msk;
        if (!std::getline(ls, e.id, '\t') || !std::getline(ls, img, '\t') ||
            !std::getline(ls, msk, '\t') || !std::getline(ls, e.split)) {
            throw FormatError("manifest " + path.string() + ": malformed line " +
                              std::to_string(lineno));
        }
        // relative paths resolve against the manifest's directory
        const fs::path base = path.parent_path();
        e.image_path = fs::path(img).is_absolute() ? fs::path(img) : base / img;
        e.mask_path = fs::path(msk).is_absolute() ? fs::path(msk) : base / msk;
        entries.push_back(std::move(e));
    }
    return entries;
}

LabeledFrame load_frame(const ManifestEntry& entry) {
    LabeledFrame f;
    f.id = entry.id;
    f.image = read_image(entry.image_path);
    f.mask = read_mask(entry.mask_path);
    if (f.image.h != f.mask.h || f.image.w != f.mask.w) {
        throw DataError("frame '" + entry.id + "': image and mask sizes differ");
    }
    validate_mask_values(f.mask, entry.id);
    return f;
}

namespace {

uint8_t class_from_label(const std::string& raw) {
    std::string label = raw;
    std::transform(label.begin(), label.end(), label.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (label == "background") return 0;
    if (label == "bioink" || label == "ink") return 1;
    if (label == "nozzle") return 2;
    throw DataError("unknown annotation label '" + raw + "' (expected background/bioink/nozzle)");
}

} // namespace

std::vector<ViaRecord> parse_via_json(const fs::path& json_path) {
    std::ifstream is(json_path);
    if (!is) throw DataError("cannot read VIA annotations: " + json_path.string());
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("VIA JSON parse error in " + json_path.string() + ": " + e.what());
    }
    const nlohmann::json* meta = &doc;
    if (doc.contains("_via_img_metadata")) meta = &doc["_via_img_metadata"];
    if (!meta->is_object()) {
        throw FormatError("VIA JSON: expected an object of image records");
    }

    std::vector<ViaRecord> records;
    for (const auto& [key, rec] : meta->items()) {
        ViaRecord out;
        out.filename = rec.value("filename", key);
        if (rec.contains("regions")) {
            const auto& regions = rec["regions"];
            // VIA v2 uses an array, v1 a dict keyed by index
            auto handle_region = [&out](const nlohmann::json& region) {
                const auto& shape = region.at("shape_attributes");
                const std::string name = shape.value("name", "");
                ViaPolygon poly;
                std::string label;
                if (region.contains("region_attributes")) {
                    const auto& attrs = region["region_attributes"];
                    for (const auto& [k, v] : attrs.items()) {
                        (void)k;
                        if (v.is_string()) {
                            label = v.get<std::string>();
                            break;
                        }
                    }
                }
                if (label.empty()) {
                    throw DataError("VIA region without a class label");
                }
                poly.class_value = class_from_label(label);
                if (name == "polygon" || name == "polyline") {
                    for (const auto& x : shape.at("all_points_x")) poly.xs.push_back(x.get<double>());
                    for (const auto& y : shape.at("all_points_y")) poly.ys.push_back(y.get<double>());
                } else if (name == "rect") {
                    const double x = shape.at("x").get<double>();
                    const double y = shape.at("y").get<double>();
                    const double w = shape.at("width").get<double>();
                    const double h = shape.at("height").get<double>();
                    poly.xs = {x, x + w, x + w, x};
                    poly.ys = {y, y, y + h, y + h};
                } else {
                    throw DataError("unsupported VIA region shape '" + name + "'");
                }
                if (poly.xs.size() != poly.ys.size() || poly.xs.size() < 3) {
                    throw FormatError("VIA polygon with mismatched or too few points");
                }
                out.polygons.push_back(std::move(poly));
            };
            if (regions.is_array()) {
                for (const auto& region : regions) handle_region(region);
            } else if (regions.is_object()) {
                for (const auto& [idx, region] : regions.items()) {
                    (void)idx;
                    handle_region(region);
                }
            }
        }
        records.push_back(std::move(out));
    }
    std::sort(records.begin(), records.end(),
              [](const ViaRecord& a, const ViaRecord& b) { return a.filename < b.filename; });
    return records;
}

// Even-odd test: crossing count of a +x ray from the query point.
bool point_in_polygon(double px, double py, const std::vector<double>& xs,
                      const std::vector<double>& ys) {
    bool inside = false;
    const std::size_t n = xs.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = xs[i], yi = ys[i];
        const double xj = xs[j], yj = ys[j];
        if ((yi > py) != (yj > py)) {
            const double x_cross = xi + (py - yi) * (xj - xi) / (yj - yi);
            if (px < x_cross) inside = !inside;
        }
    }
    return inside;
}

Mask rasterize_via(const std::vector<ViaPolygon>& polygons, int h, int w) {
    if (h <= 0 || w <= 0) throw DataError("rasterize_via: non-positive mask size");
    Mask mask(h, w, 0);
    // bioink first, then nozzle, so nozzle occludes ink at the tip
    for (uint8_t cls : {uint8_t{1}, uint8_t{2}}) {
        for (const auto& poly : polygons) {
            if (poly.class_value != cls) continue;
            double min_x = poly.xs[0], max_x = poly.xs[0];
            double min_y = poly.ys[0], max_y = poly.ys[0];
            for (std::size_t i = 1; i < poly.xs.size(); ++i) {
                min_x = std::min(min_x, poly.xs[i]);
                max_x = std::max(max_x, poly.xs[i]);
                min_y = std::min(min_y, poly.ys[i]);
                max_y = std::max(max_y, poly.ys[i]);
            }
            const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 1)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil(max_y + 1)));
            const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 1)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x + 1)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (point_in_polygon(x + 0.5, y + 0.5, poly.xs, poly.ys)) {
                        mask.at(y, x) = cls;
                    }
                }
            }
        }
    }
    return mask;
}

DatasetSplit split_frames(const std::vector<std::string>& ids, uint64_t seed) {
    if (ids.size() < 10) {
        throw DataError("split: need at least 10 frames, got " + std::to_string(ids.size()));
    }
    std::vector<std::string> shuffled = ids;
    Rng rng(derive_seed(seed, "dataset-split"));
    rng.shuffle(shuffled);
    const std::size_t n = shuffled.size();
    const std::size_t n_train = n * 8 / 10;
    const std::size_t n_val = n / 10;
    DatasetSplit s;
    s.train.assign(shuffled.begin(), shuffled.begin() + n_train);
    s.val.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
    s.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
    return s;
}

AugmentParams draw_augment_params(const AugmentConfig& config, Rng& rng) {
    AugmentParams p;
    if (!config.enabled) return p;
    p.hflip = rng.next_double() < config.hflip_prob;
    p.rot_deg = rng.uniform(config.rot_deg_min, config.rot_deg_max);
    p.brightness = rng.uniform(-config.brightness_delta, config.brightness_delta);
    p.contrast = rng.uniform(config.contrast_min, config.contrast_max);
    return p;
}

LabeledFrame apply_augment(const LabeledFrame& frame, const AugmentParams& params) {
    LabeledFrame out;
    out.id = frame.id;
    out.image = frame.image;
    out.mask = frame.mask;
    if (params.hflip) {
        out.image = hflip(out.image);
        out.mask = hflip(out.mask);
    }
    if (params.rot_deg != 0.0) {
        out.image = rotate_bilinear(out.image, params.rot_deg);
        out.mask = rotate_nearest(out.mask, params.rot_deg);
    }
    if (params.brightness != 0.0 || params.contrast != 1.0) {
        out.image = adjust_brightness_contrast(out.image, params.brightness, params.contrast);
    }
    return out;
}

LabeledFrame augment(const LabeledFrame& frame, const AugmentConfig& config, Rng& rng) {
    return apply_augment(frame, draw_augment_params(config, rng));
}

Tensor4 image_to_tensor(const ImageU8& image, int target_h, int target_w,
                        const NormConstants& norm) {
    const ImageU8 resized = resize_bilinear(image, target_h, target_w);
    Tensor4 t(Shape{1, 3, target_h, target_w});
    for (int c = 0; c < 3; ++c) {
        const float mean = norm.mean[c];
        const float inv_std = 1.0f / norm.std[c];
        float* plane = t.data() + t.offset(0, c, 0, 0);
        for (int y = 0; y < target_h; ++y) {
            for (int x = 0; x < target_w; ++x) {
                plane[static_cast<std::size_t>(y) * target_w + x] =
                    (resized.at(y, x, c) / 255.0f - mean) * inv_std;
            }
        }
    }
    return t;
}

Batch to_batch(const std::vector<const LabeledFrame*>& frames, int target_h, int target_w,
               const NormConstants& norm) {
    if (frames.empty()) throw DataError("to_batch: empty frame list");
    Batch b;
    b.images = Tensor4(Shape{static_cast<int>(frames.size()), 3, target_h, target_w});
    b.masks = MaskBatch(static_cast<int>(frames.size()), target_h, target_w);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const LabeledFrame& f = *frames[i];
        Tensor4 one = image_to_tensor(f.image, target_h, target_w, norm);
        std::copy(one.flat().begin(), one.flat().end(),
                  b.images.flat().begin() + b.images.offset(static_cast<int>(i), 0, 0, 0));
        const Mask resized = resize_nearest(f.mask, target_h, target_w);
        std::copy(resized.v.begin(), resized.v.end(),
                  b.masks.v.begin() + static_cast<std::size_t>(i) * target_h * target_w);
    }
    return b;
}

} // namespace biolite
