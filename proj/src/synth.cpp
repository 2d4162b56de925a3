#include "biolite/synth.hpp"

#include <algorithm>
#include <cmath>

#include "biolite/image_io.hpp"

namespace biolite {

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "medium") return Difficulty::medium;
    if (s == "hard") return Difficulty::hard;
    throw DataError("unknown difficulty '" + s + "' (expected easy/medium/hard)");
}

const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "easy";
}

namespace {

struct Vec2 {
    double x, y;
};

// Quadratic B-spline smoothing of the control polygon: a quadratic Bezier
// between consecutive segment midpoints, densely sampled into a polyline.
std::vector<Vec2> sample_spline(const std::vector<std::array<double, 2>>& ctrl) {
    std::vector<Vec2> pts;
    if (ctrl.size() < 2) {
        for (const auto& p : ctrl) pts.push_back({p[0], p[1]});
        return pts;
    }
    auto mid = [&](std::size_t i) {
        return Vec2{(ctrl[i][0] + ctrl[i + 1][0]) / 2.0, (ctrl[i][1] + ctrl[i + 1][1]) / 2.0};
    };
    constexpr int kSteps = 12;
    pts.push_back({ctrl[0][0], ctrl[0][1]});
    auto bezier = [&pts](Vec2 a, Vec2 c, Vec2 b) {
        for (int s = 1; s <= kSteps; ++s) {
            const double t = static_cast<double>(s) / kSteps;
            const double u = 1.0 - t;
            pts.push_back({u * u * a.x + 2 * u * t * c.x + t * t * b.x,
                           u * u * a.y + 2 * u * t * c.y + t * t * b.y});
        }
    };
    if (ctrl.size() == 2) {
        pts.push_back({ctrl[1][0], ctrl[1][1]});
        return pts;
    }
    bezier({ctrl[0][0], ctrl[0][1]}, {ctrl[1][0], ctrl[1][1]}, mid(1));
    for (std::size_t i = 1; i + 2 < ctrl.size(); ++i) {
        bezier(mid(i), {ctrl[i + 1][0], ctrl[i + 1][1]}, mid(i + 1));
    }
    bezier(mid(ctrl.size() - 2), {ctrl[ctrl.size() - 2][0], ctrl[ctrl.size() - 2][1]},
           {ctrl.back()[0], ctrl.back()[1]});
    return pts;
}

double dist_to_polyline(double px, double py, const std::vector<Vec2>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double ax = pts[i].x, ay = pts[i].y;
        const double bx = pts[i + 1].x, by = pts[i + 1].y;
        const double dx = bx - ax, dy = by - ay;
        const double len2 = dx * dx + dy * dy;
        double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = px - (ax + t * dx);
        const double ey = py - (ay + t * dy);
        best = std::min(best, ex * ex + ey * ey);
    }
    return std::sqrt(best);
}

// Trapezoid from the top edge down to the tip.
void nozzle_polygon(const SceneConfig& c, std::vector<double>& xs, std::vector<double>& ys) {
    const double half_tip = c.nozzle_tip_width / 2.0;
    const double spread = std::tan(c.nozzle_taper_deg * M_PI / 180.0) * c.nozzle_tip_y;
    const double half_top = half_tip + spread;
    xs = {c.nozzle_tip_x - half_top, c.nozzle_tip_x + half_top, c.nozzle_tip_x + half_tip,
          c.nozzle_tip_x - half_tip};
    ys = {-1.0, -1.0, c.nozzle_tip_y, c.nozzle_tip_y};
}

// 3x3 subsample coverage; the center sample is included, so coverage 1 implies
// the pixel center is inside (keeps image and mask consistent at full opacity).
constexpr double kSub[3] = {1.0 / 6.0, 3.0 / 6.0, 5.0 / 6.0};

template <typename InsideFn>
double coverage3x3(int y, int x, InsideFn&& inside) {
    int hits = 0;
    for (int sy = 0; sy < 3; ++sy) {
        for (int sx = 0; sx < 3; ++sx) {
            if (inside(x + kSub[sx], y + kSub[sy])) ++hits;
        }
    }
    return hits / 9.0;
}

inline uint8_t clamp_u8d(double v) {
    return static_cast<uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

} // namespace

std::vector<std::array<double, 2>> nozzle_vertices(const SceneConfig& config) {
    std::vector<double> xs, ys;
    nozzle_polygon(config, xs, ys);
    std::vector<std::array<double, 2>> out;
    for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({xs[i], ys[i]});
    return out;
}

SynthFrame generate(const SceneConfig& config) {
    if (config.height <= 0 || config.width <= 0) {
        throw DataError("generate: non-positive frame size");
    }
    if (config.ink_thickness < 1.0 && !config.ink_control_points.empty()) {
        throw DataError("generate: ink thickness must be >= 1 px");
    }
    const int h = config.height, w = config.width;
    SynthFrame out;
    out.provenance = config;
    out.frame.image = ImageU8(h, w);
    out.frame.mask = Mask(h, w, 0);

    // background: base color + linear illumination ramp + Gaussian noise
    Rng noise_rng(derive_seed(config.seed, "synth-noise"));
    const double grad_angle = derive_seed(config.seed, "synth-grad") % 360 * M_PI / 180.0;
    const double gx = std::cos(grad_angle), gy = std::sin(grad_angle);
    std::vector<double> base(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double proj =
                ((x * gx + y * gy) / std::max(1.0, gx * w + gy * h) + 1.0) / 2.0;
            const double ramp = config.gradient_amplitude * (proj - 0.5);
            const double noise =
                config.noise_amplitude > 0.0 ? noise_rng.normal(0.0, config.noise_amplitude)
                                             : 0.0;
            for (int c = 0; c < 3; ++c) {
                base[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    config.background_color[c] + ramp + noise;
            }
        }
    }

    // ink trace
    std::vector<Vec2> ink_pts = sample_spline(config.ink_control_points);
    const double r = config.ink_thickness / 2.0;
    if (ink_pts.size() >= 2) {
        double min_x = ink_pts[0].x, max_x = ink_pts[0].x;
        double min_y = ink_pts[0].y, max_y = ink_pts[0].y;
        for (const auto& p : ink_pts) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        const int y0 = std::max(0, static_cast<int>(std::floor(min_y - r - 2)));
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(max_y + r + 2)));
        const int x0 = std::max(0, static_cast<int>(std::floor(min_x - r - 2)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x + r + 2)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dc = dist_to_polyline(x + 0.5, y + 0.5, ink_pts);
                double cov;
                if (dc <= r - 1.0) {
                    cov = 1.0;
                } else if (dc >= r + 1.0) {
                    continue;
                } else {
                    cov = coverage3x3(y, x, [&](double px, double py) {
                        return dist_to_polyline(px, py, ink_pts) <= r;
                    });
                }
                double* px = &base[(static_cast<std::size_t>(y) * w + x) * 3];
                for (int c = 0; c < 3; ++c) {
                    px[c] = (1.0 - cov) * px[c] + cov * config.ink_color[c];
                }
                if (dc <= r) out.frame.mask.at(y, x) = 1; // center-inside rule
            }
        }
    }

    // nozzle on top
    if (config.nozzle_tip_width > 0.0 && config.nozzle_tip_y > 0.0) {
        std::vector<double> nxs, nys;
        nozzle_polygon(config, nxs, nys);
        const double min_x = *std::min_element(nxs.begin(), nxs.end());
        const double max_x = *std::max_element(nxs.begin(), nxs.end());
        const int y1 = std::min(h - 1, static_cast<int>(std::ceil(config.nozzle_tip_y + 2)));
        const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 2)));
        const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x + 2)));
        for (int y = 0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double cov = coverage3x3(
                    y, x, [&](double px, double py) { return point_in_polygon(px, py, nxs, nys); });
                if (cov == 0.0) continue;
                double* px = &base[(static_cast<std::size_t>(y) * w + x) * 3];
                // slight vertical shading so the nozzle is not flat
                const double shade = 1.0 - 0.15 * (y / std::max(1.0, config.nozzle_tip_y));
                for (int c = 0; c < 3; ++c) {
                    px[c] = (1.0 - cov) * px[c] + cov * config.nozzle_color[c] * shade;
                }
                if (point_in_polygon(x + 0.5, y + 0.5, nxs, nys)) {
                    out.frame.mask.at(y, x) = 2;
                }
            }
        }
    }

    for (std::size_t i = 0; i < base.size(); ++i) out.frame.image.px[i] = clamp_u8d(base[i]);
    return out;
}

namespace {

struct TierPhotometrics {
    std::array<uint8_t, 3> background, ink, nozzle;
    double noise, gradient;
};

// All tiers consume the photo stream identically so geometry (drawn from a
// separate stream) stays tier-invariant for a given seed.
TierPhotometrics draw_photometrics(Difficulty tier, Rng& rng) {
    TierPhotometrics p;
    const double bg_level = rng.uniform(170.0, 220.0);
    const double bg_tint_r = rng.uniform(-10.0, 10.0);
    const double bg_tint_b = rng.uniform(-10.0, 10.0);
    p.background = {clamp_u8d(bg_level + bg_tint_r), clamp_u8d(bg_level),
                    clamp_u8d(bg_level + bg_tint_b)};

    const int hue_pick = static_cast<int>(rng.next_below(3));
    const double ink_main = rng.uniform(120.0, 190.0);
    const double ink_off = rng.uniform(20.0, 60.0);
    const double nozzle_level = rng.uniform(50.0, 90.0);
    const double noise_unit = rng.next_double();
    const double gradient_unit = rng.next_double();
    const double hard_offset = rng.uniform(-30.0, 30.0);

    switch (tier) {
        case Difficulty::easy:
            p.noise = 0.0;
            p.gradient = 0.0;
            break;
        case Difficulty::medium:
            p.noise = 4.0 + 4.0 * noise_unit;
            p.gradient = 20.0 + 20.0 * gradient_unit;
            break;
        case Difficulty::hard:
            p.noise = 6.0 + 6.0 * noise_unit;
            p.gradient = 30.0 + 30.0 * gradient_unit;
            break;
    }
    if (tier == Difficulty::hard) {
        // ink barely separated from the background
        const double lvl = bg_level + hard_offset;
        p.ink = {clamp_u8d(lvl), clamp_u8d(lvl - 8), clamp_u8d(lvl - 4)};
    } else {
        // saturated ink, hue rotated per frame
        std::array<double, 3> ch = {ink_off, ink_off, ink_off};
        ch[hue_pick] = ink_main;
        ch[(hue_pick + 1) % 3] = ink_off + 40.0;
        p.ink = {clamp_u8d(ch[0]), clamp_u8d(ch[1]), clamp_u8d(ch[2])};
    }
    p.nozzle = {clamp_u8d(nozzle_level), clamp_u8d(nozzle_level),
                clamp_u8d(nozzle_level + 5)};
    return p;
}

} // namespace

std::vector<SynthFrame> generate_dataset(int n, Difficulty difficulty, uint64_t seed,
                                         int height, int width) {
    if (n < 1) throw DataError("generate_dataset: n must be >= 1");
    std::vector<SynthFrame> frames;
    frames.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng geom(derive_seed(seed, "synth-geom", static_cast<uint64_t>(i)));
        Rng photo(derive_seed(seed, "synth-photo", static_cast<uint64_t>(i)));

        SceneConfig c;
        c.height = height;
        c.width = width;
        c.seed = derive_seed(seed, "synth-frame", static_cast<uint64_t>(i));

        c.nozzle_tip_x = geom.uniform(0.30, 0.70) * width;
        c.nozzle_tip_y = geom.uniform(0.30, 0.55) * height;
        c.nozzle_tip_width = geom.uniform(0.05, 0.09) * width;
        c.nozzle_taper_deg = geom.uniform(4.0, 12.0);

        // serpentine print path wandering from the tip toward the bottom
        const int n_ctrl = 4 + static_cast<int>(geom.next_below(3));
        const double margin = 0.08 * width;
        double px = c.nozzle_tip_x + geom.uniform(-0.05, 0.05) * width;
        double py = c.nozzle_tip_y + geom.uniform(0.02, 0.06) * height;
        c.ink_control_points.clear();
        for (int k = 0; k < n_ctrl; ++k) {
            c.ink_control_points.push_back({std::clamp(px, margin, width - margin),
                                            std::clamp(py, margin, height - 1.0 - margin)});
            px += geom.uniform(-0.35, 0.35) * width;
            py += geom.uniform(0.08, 0.18) * height;
        }
        c.ink_thickness = geom.uniform(0.02, 0.04) * width;

        const TierPhotometrics photometrics = draw_photometrics(difficulty, photo);
        c.background_color = photometrics.background;
        c.ink_color = photometrics.ink;
        c.nozzle_color = photometrics.nozzle;
        c.noise_amplitude = photometrics.noise;
        c.gradient_amplitude = photometrics.gradient;

        SynthFrame f = generate(c);
        char id[32];
        std::snprintf(id, sizeof(id), "synth_%05d", i);
        f.frame.id = id;
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_dataset(const std::filesystem::path& out_dir,
                   const std::vector<SynthFrame>& frames, uint64_t split_seed) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "masks");
    std::vector<std::string> ids;
    ids.reserve(frames.size());
    for (const auto& f : frames) ids.push_back(f.frame.id);
    DatasetSplit split = split_frames(ids, split_seed);

    auto split_of = [&split](const std::string& id) -> std::string {
        if (std::find(split.train.begin(), split.train.end(), id) != split.train.end())
            return "train";
        if (std::find(split.val.begin(), split.val.end(), id) != split.val.end()) return "val";
        return "test";
    };

    std::vector<ManifestEntry> entries;
    for (const auto& f : frames) {
        const fs::path img = fs::path("images") / (f.frame.id + ".png");
        const fs::path msk = fs::path("masks") / (f.frame.id + ".png");
        write_image_png(out_dir / img, f.frame.image);
        write_mask_png(out_dir / msk, f.frame.mask);
        entries.push_back({f.frame.id, img, msk, split_of(f.frame.id)});
    }
    write_manifest(out_dir / "manifest.txt", entries);
}

} // namespace biolite
