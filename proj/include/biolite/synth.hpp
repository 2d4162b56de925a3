#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "biolite/data.hpp"

namespace biolite {

enum class Difficulty { easy, medium, hard };

Difficulty difficulty_from_string(const std::string& s);
const char* difficulty_name(Difficulty d);

// Full description of one synthetic bioprinting scene. The mask is derived
// from the same geometry that paints the image, so ground truth is exact by
// construction.
struct SceneConfig {
    int height = 256;
    int width = 256;

    // nozzle: trapezoid hanging from the top edge, tapering to the tip
    double nozzle_tip_x = 128.0;
    double nozzle_tip_y = 110.0;
    double nozzle_tip_width = 18.0;
    double nozzle_taper_deg = 8.0;
    std::array<uint8_t, 3> nozzle_color = {70, 70, 75};

    // ink: quadratic-spline polyline stroked with round caps
    std::vector<std::array<double, 2>> ink_control_points;
    double ink_thickness = 7.0;
    std::array<uint8_t, 3> ink_color = {30, 90, 170};

    std::array<uint8_t, 3> background_color = {200, 200, 195};
    double noise_amplitude = 0.0;     // stddev of per-pixel Gaussian noise
    double gradient_amplitude = 0.0;  // peak-to-peak illumination ramp

    uint64_t seed = 0; // drives noise only; geometry comes from the fields above
};

struct SynthFrame {
    LabeledFrame frame;
    SceneConfig provenance;
};

// The trapezoid the nozzle paints, as (x, y) vertices; the mask labels a pixel
// class 2 iff its center lies inside this polygon.
std::vector<std::array<double, 2>> nozzle_vertices(const SceneConfig& config);

// Renders background, then the ink trace, then the nozzle on top; the mask is
// painted with the same shapes in the same order. Image edges are
// anti-aliased; the mask uses pixel-center coverage only.
SynthFrame generate(const SceneConfig& config);

// n randomized frames. Geometry is drawn from a tier-independent stream so
// easy/medium/hard with the same seed share geometry and differ only in
// photometrics (contrast, noise, illumination).
std::vector<SynthFrame> generate_dataset(int n, Difficulty difficulty, uint64_t seed,
                                         int height = 256, int width = 256);

// Writes images/ + masks/ + manifest.txt (split assigned via split_frames) in
// the exact layout load_dataset/read_manifest consume.
void write_dataset(const std::filesystem::path& out_dir,
                   const std::vector<SynthFrame>& frames, uint64_t split_seed);

} // namespace biolite
