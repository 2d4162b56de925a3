#include "biolite/infer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "biolite/clahe.hpp"
#include "biolite/nn_ops.hpp"

namespace biolite {

namespace {

Mask argmax_channels(const Tensor4& probs_or_logits) {
    const Shape& s = probs_or_logits.shape();
    Mask mask(s.h, s.w);
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    std::vector<const float*> in(s.c);
    for (int c = 0; c < s.c; ++c) in[c] = probs_or_logits.data() + probs_or_logits.offset(0, c, 0, 0);
    for (std::size_t p = 0; p < plane; ++p) {
        int best = 0;
        float bv = in[0][p];
        for (int c = 1; c < s.c; ++c) {
            if (in[c][p] > bv) { // strict: lowest class index wins ties
                bv = in[c][p];
                best = c;
            }
        }
        mask.v[p] = static_cast<uint8_t>(best);
    }
    return mask;
}

} // namespace

Mask infer(const ImageU8& image, const ModelParams& params, const InferOptions& opts) {
    if (image.empty()) throw DataError("infer: empty input image");
    ImageU8 resized = resize_bilinear(image, opts.input_size, opts.input_size);
    if (opts.apply_clahe) resized = clahe(resized);
    Tensor4 input = image_to_tensor(resized, opts.input_size, opts.input_size, opts.norm);
    Tensor4 logits = model_forward(params, input);
    Mask mask;
    if (opts.explicit_softmax) {
        Tensor4 probs = softmax_channels(logits);
        mask = argmax_channels(probs);
    } else {
        mask = argmax_channels(logits); // softmax is monotone per pixel
    }
    return resize_nearest(mask, image.h, image.w);
}

namespace {

struct FrameTimes {
    double pre, fwd, post;
};

FrameTimes timed_infer(const ImageU8& image, const ModelParams& params,
                       const InferOptions& opts, Mask* out_mask) {
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };
    const auto t0 = clock::now();
    ImageU8 resized = resize_bilinear(image, opts.input_size, opts.input_size);
    if (opts.apply_clahe) resized = clahe(resized);
    Tensor4 input = image_to_tensor(resized, opts.input_size, opts.input_size, opts.norm);
    const auto t1 = clock::now();
    Tensor4 logits = model_forward(params, input);
    const auto t2 = clock::now();
    Mask mask;
    if (opts.explicit_softmax) {
        Tensor4 probs = softmax_channels(logits);
        mask = argmax_channels(probs);
    } else {
        mask = argmax_channels(logits);
    }
    mask = resize_nearest(mask, image.h, image.w);
    const auto t3 = clock::now();
    if (out_mask) *out_mask = std::move(mask);
    return {ms(t0, t1), ms(t1, t2), ms(t2, t3)};
}

StageStats stats_of(std::vector<double> samples) {
    StageStats s;
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean_ms = sum / static_cast<double>(samples.size());
    const std::size_t n = samples.size();
    s.median_ms = (n % 2 == 1) ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    // nearest-rank p95
    std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    s.p95_ms = samples[rank - 1];
    return s;
}

} // namespace

LatencyReport benchmark(const ModelParams& params, const std::vector<ImageU8>& frames,
                        int n, int warmup, int threads, const InferOptions& opts) {
    if (n < 1) throw DataError("benchmark: need at least one timed frame");
    if (frames.empty()) throw DataError("benchmark: empty frame list");
    threads = std::max(1, threads);

    LatencyReport report;
    report.frames = n;
    report.warmup = warmup;
    report.threads = threads;
    report.reference_points = {
        {"biolite_unet_paper_pi4b_cpu", 335.0},
        {"biolite_unet_paper_gpu", 0.41},
    };

    auto frame_at = [&frames](int i) -> const ImageU8& { return frames[i % frames.size()]; };

    for (int i = 0; i < warmup; ++i) timed_infer(frame_at(i), params, opts, nullptr);

    std::vector<FrameTimes> times(n);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) times[i] = timed_infer(frame_at(i), params, opts, nullptr);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= n) return;
                    times[i] = timed_infer(frame_at(i), params, opts, nullptr);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    std::vector<double> pre(n), fwd(n), post(n), total(n);
    for (int i = 0; i < n; ++i) {
        pre[i] = times[i].pre;
        fwd[i] = times[i].fwd;
        post[i] = times[i].post;
        total[i] = times[i].pre + times[i].fwd + times[i].post;
    }
    report.preprocess = stats_of(std::move(pre));
    report.forward = stats_of(std::move(fwd));
    report.postprocess = stats_of(std::move(post));
    report.end_to_end = stats_of(std::move(total));
    return report;
}

std::string LatencyReport::to_csv() const {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed;
    os << "kind,label,stage,frames,threads,mean_ms,median_ms,p95_ms\n";
    auto row = [&os, this](const char* stage, const StageStats& s) {
        os << "measured,this_host," << stage << ',' << frames << ',' << threads << ','
           << s.mean_ms << ',' << s.median_ms << ',' << s.p95_ms << '\n';
    };
    row("preprocess", preprocess);
    row("forward", forward);
    row("postprocess", postprocess);
    row("end_to_end", end_to_end);
    for (const auto& [label, value] : reference_points) {
        os << "reference," << label << ",end_to_end,,," << value << ",,\n";
    }
    return os.str();
}

ComplexityReport describe(const ArchConfig& config, int h, int w) {
    ComplexityReport r;
    r.rows = describe_layers(config, h, w);
    r.input_h = h;
    r.input_w = w;
    for (const auto& row : r.rows) {
        r.total_params += row.params;
        r.total_flops += row.flops;
    }
    return r;
}

std::string ComplexityReport::to_text() const {
    std::ostringstream os;
    os << "layer         kind            out shape (n,c,h,w)   params      flops\n";
    for (const auto& row : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-13s %-15s %-21s %-11lld %lld\n", row.name.c_str(),
                      row.kind.c_str(), row.out_shape.str().c_str(),
                      static_cast<long long>(row.params), static_cast<long long>(row.flops));
        os << line;
    }
    char totals[192];
    std::snprintf(totals, sizeof(totals),
                  "total: %lld params (%.4f M), %lld flops (%.4f G) at %dx%d\n",
                  static_cast<long long>(total_params), total_params / 1e6,
                  static_cast<long long>(total_flops), total_flops / 1e9, input_w, input_h);
    os << totals;
    return os.str();
}

std::string ComplexityReport::to_csv() const {
    std::ostringstream os;
    os << "layer,kind,out_n,out_c,out_h,out_w,params,flops\n";
    for (const auto& row : rows) {
        os << row.name << ',' << row.kind << ',' << row.out_shape.n << ',' << row.out_shape.c
           << ',' << row.out_shape.h << ',' << row.out_shape.w << ',' << row.params << ','
           << row.flops << '\n';
    }
    os << "total,,,,,," << total_params << ',' << total_flops << '\n';
    return os.str();
}

} // namespace biolite
