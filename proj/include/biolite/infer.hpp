#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biolite/data.hpp"
#include "biolite/model.hpp"

namespace biolite {

struct InferOptions {
    bool apply_clahe = true;      // preprocessing flag (see data pipeline)
    bool explicit_softmax = false; // softmax before argmax; argmax is invariant
    int input_size = 256;
    NormConstants norm;
};

// End-to-end single-frame pipeline: Resize -> (CLAHE) -> Normalize -> ToTensor
// -> forward -> (Softmax) -> Argmax -> nearest-resize back to the source
// resolution. Argmax ties go to the lowest class index.
Mask infer(const ImageU8& image, const ModelParams& params,
           const InferOptions& opts = InferOptions{});

// --- latency benchmarking ---

struct StageStats {
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

struct LatencyReport {
    int frames = 0;  // timed frames (warmup excluded)
    int warmup = 0;
    int threads = 1;
    StageStats preprocess, forward, postprocess, end_to_end;

    // Published reference points recorded alongside (not measured here):
    // {label, milliseconds}.
    std::vector<std::pair<std::string, double>> reference_points;

    std::string to_csv() const;
};

// Times n frames (after `warmup` untimed frames) with a monotonic clock.
// threads > 1 distributes frames over a pool; per-frame stage times are still
// measured per task.
LatencyReport benchmark(const ModelParams& params, const std::vector<ImageU8>& frames,
                        int n = 100, int warmup = 10, int threads = 1,
                        const InferOptions& opts = InferOptions{});

// --- complexity reporting ---

struct ComplexityReport {
    std::vector<LayerRow> rows;
    int64_t total_params = 0;
    int64_t total_flops = 0;
    int input_h = 256;
    int input_w = 256;

    std::string to_text() const;  // per-layer table + totals
    std::string to_csv() const;
};

ComplexityReport describe(const ArchConfig& config, int h = 256, int w = 256);

} // namespace biolite
